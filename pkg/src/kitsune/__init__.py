"""Online unsupervised network intrusion detection with an ensemble of autoencoders."""

from kitsune.incremental_stats import DampedStat, StatLink, decay_factor
from kitsune.packet_ingest import PacketMeta, parse_frame, read_pcap, write_pcap
from kitsune.features import FeatureExtractor, StatRegistry, feature_names
from kitsune.feature_mapper import CorrSummary, FeatureMap, cluster
from kitsune.kitnet import Autoencoder, KitNET, rmse, sigmoid
from kitsune.metrics import auc, eer, rate_at_fpr
from kitsune.pipeline import PipelineConfig, run, run_detector_only

__all__ = [
    "Autoencoder",
    "CorrSummary",
    "DampedStat",
    "FeatureExtractor",
    "FeatureMap",
    "KitNET",
    "PacketMeta",
    "PipelineConfig",
    "StatLink",
    "StatRegistry",
    "auc",
    "cluster",
    "decay_factor",
    "eer",
    "feature_names",
    "parse_frame",
    "rate_at_fpr",
    "read_pcap",
    "rmse",
    "run",
    "run_detector_only",
    "sigmoid",
    "write_pcap",
]
