"""End-to-end orchestration: packets -> features -> feature map -> KitNET.

The detector moves through three phases, counted in instances:

* ``fm-train`` for the first ``fm_grace`` instances: only the correlation
  summary is updated;
* ``ad-train`` for the next ``ad_grace`` instances: KitNET learns and the
  threshold ``phi`` grows to the largest training score;
* ``execute`` afterwards: scores are compared with ``phi * beta_s``.

Phases never go backwards. Only the current instance is ever held.
"""

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from kitsune.feature_mapper import CorrSummary, FeatureMap, cluster
from kitsune.features import DEFAULT_LAMBDAS, FeatureExtractor
from kitsune.kitnet import KitNET
from kitsune.packet_ingest import FormatError, prefetch, read_feature_csv, read_pcap

logger = logging.getLogger(__name__)

__all__ = [
    "AlertRecord",
    "ConfigError",
    "InputError",
    "OnlineDetector",
    "PipelineConfig",
    "benchmark",
    "run",
    "run_detector_only",
]

SCORE_FLUSH_ROWS = 1024


class ConfigError(ValueError):
    """Invalid pipeline configuration."""


class InputError(RuntimeError):
    """Input cannot be used (too short, wrong width, unreadable)."""


@dataclass
class PipelineConfig:
    pcap: Optional[str] = None
    features: Optional[str] = None
    m: int = 10
    fm_grace: int = 5_000
    ad_grace: int = 50_000
    lambdas: tuple = DEFAULT_LAMBDAS
    rho: float = 0.75
    lr: float = 0.1
    beta_s: float = 1.0
    seed: Optional[int] = 0
    evict_every: Optional[int] = 100_000
    epsilon: float = 1e-6
    scores: Optional[str] = None
    alerts: Optional[str] = None
    save_model: Optional[str] = None
    load_model: Optional[str] = None
    dump_features: Optional[str] = None
    prefetch: bool = False

    def validate(self):
        if (self.pcap is None) == (self.features is None):
            raise ConfigError("exactly one of pcap or features input is required")
        if self.fm_grace < 2:
            raise ConfigError("fm_grace must be at least 2")
        if self.ad_grace < 1:
            raise ConfigError("ad_grace must be at least 1")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must be in (0, 1]")
        if not 0 < self.lr <= 1:
            raise ConfigError("lr must be in (0, 1]")
        if self.beta_s < 1:
            raise ConfigError("beta must be >= 1")
        if self.load_model is None and self.features is None and self.m > 23 * len(self.lambdas):
            raise ConfigError("m cannot exceed the number of features")


@dataclass(frozen=True)
class AlertRecord:
    index: int
    timestamp: float
    score: float
    threshold: float
    group: int


class OnlineDetector:
    """Feature mapper plus KitNET, fed one instance at a time."""

    def __init__(self, n, m=10, fm_grace=5_000, ad_grace=50_000, rho=0.75, lr=0.1, beta_s=1.0,
                 seed=None, model=None):
        self.n = n
        self.m = min(m, n)
        self.fm_grace = fm_grace
        self.ad_grace = ad_grace
        self.rho = rho
        self.lr = lr
        self.beta_s = beta_s
        self.seed = seed
        self.summary = CorrSummary(n)
        self.model = model
        # instrumented count of feature rows held at once; never exceeds 1
        self._held = 0
        self.peak_retained = 0
        if model is not None:
            if model.n != n:
                raise InputError(f"model expects {model.n} features, input has {n}")
            self.summary = None
            self.phase = "execute" if model.mode == "execute" else "ad-train"
        else:
            self.phase = "fm-train"

    def _build_model(self):
        fmap = cluster(self.summary.distance_matrix(), self.m)
        self.model = KitNET(fmap, self.rho, self.lr, self.beta_s, self.seed)
        self.summary = None
        logger.info("feature map learned: k=%d groups (m=%d)", fmap.k, self.m)

    def process(self, x):
        """Consume one instance; returns the score, or ``None`` during fm-train."""
        self._held += 1
        self.peak_retained = max(self.peak_retained, self._held)
        try:
            return self._process(x)
        finally:
            self._held -= 1

    def _process(self, x):
        if self.phase == "fm-train":
            self.summary.update(x)
            if self.summary.n_t >= self.fm_grace:
                self._build_model()
                self.phase = "ad-train"
            return None
        if self.phase == "ad-train":
            s = self.model.train_step(x)
            if self.model.n_trained >= self.ad_grace:
                self.model.freeze()
                self.phase = "execute"
            return s
        return self.model.execute_step(x)


class _ScoreWriter:
    def __init__(self, path):
        self.fh = open(path, "w", newline="") if path else None
        self.rows = []
        if self.fh:
            self.writer = csv.writer(self.fh)
            self.writer.writerow(["index", "timestamp", "rmse"])

    def add(self, index, timestamp, score):
        if self.fh:
            self.rows.append((index, timestamp, score))
            if len(self.rows) >= SCORE_FLUSH_ROWS:
                self.flush()

    def flush(self):
        if self.fh and self.rows:
            self.writer.writerows(self.rows)
            self.fh.flush()
            self.rows = []

    def close(self):
        if self.fh:
            self.flush()
            self.fh.close()


def _instances(config):
    """Yield ``(timestamp, x)`` and return the feature width up front."""
    if config.pcap is not None:
        fe = FeatureExtractor(config.lambdas, config.epsilon, config.evict_every)
        packets = read_pcap(config.pcap)
        if config.prefetch:
            packets = prefetch(packets)
        return fe.n_features, fe.feature_names(), fe.process(packets), fe
    timestamps, X = read_feature_csv(config.features)
    if timestamps is None:
        timestamps = np.arange(len(X), dtype=np.float64)
    return X.shape[1], None, zip(timestamps.tolist(), X), None


def run(config):
    """Process the configured input end to end and return a summary dict."""
    config.validate()
    n, names, stream, fe = _instances(config)
    model = KitNET.load(config.load_model) if config.load_model else None
    if model is None and config.m > n:
        raise ConfigError(f"m={config.m} exceeds the {n} input features")
    det = OnlineDetector(n, config.m, config.fm_grace, config.ad_grace, config.rho, config.lr,
                         config.beta_s, config.seed, model)

    scores = _ScoreWriter(config.scores)
    alerts_fh = open(config.alerts, "w") if config.alerts else None
    dump_fh = open(config.dump_features, "w", newline="") if config.dump_features else None
    if dump_fh:
        dump = csv.writer(dump_fh)
        dump.writerow(["timestamp", *(names or [f"f{i}" for i in range(n)])])

    count = 0
    n_alerts = 0
    exec_scores = []
    t0 = time.perf_counter()
    try:
        for index, (ts, x) in enumerate(stream):
            count += 1
            if dump_fh:
                dump.writerow([ts, *x.tolist()])
            phase = det.phase
            s = det.process(x)
            if s is not None:
                scores.add(index, ts, s)
            if phase == "execute":
                exec_scores.append(s)
                if det.model.is_alert(s):
                    n_alerts += 1
                    if alerts_fh:
                        group = int(np.argmax(det.model.ensemble_errors(x)))
                        rec = AlertRecord(index, ts, s, det.model.threshold, group)
                        alerts_fh.write(json.dumps(asdict(rec)) + "\n")
                        alerts_fh.flush()
    finally:
        scores.close()
        if alerts_fh:
            alerts_fh.close()
        if dump_fh:
            dump_fh.close()
    elapsed = time.perf_counter() - t0

    warnings = []
    if count == 0:
        raise InputError("input contains no packets")
    if det.phase == "fm-train":
        raise InputError(
            f"input has {count} instances but the feature mapper needs fm_grace={config.fm_grace}"
        )
    if not exec_scores:
        msg = f"training consumed all {count} instances; no instance was executed"
        logger.warning(msg)
        warnings.append(msg)
    if config.save_model:
        det.model.save(config.save_model)

    return {
        "instances": count,
        "phase": det.phase,
        "k": det.model.k,
        "group_sizes": det.model.fmap.sizes,
        "phi": det.model.phi,
        "threshold": det.model.threshold,
        "trained": det.model.n_trained,
        "executed": len(exec_scores),
        "alerts": n_alerts,
        "mean_execute_score": float(np.mean(exec_scores)) if exec_scores else None,
        "evicted": fe.evicted if fe else 0,
        "registry_entries": len(fe.registry) if fe else 0,
        "peak_retained": det.peak_retained,
        "seconds": elapsed,
        "warnings": warnings,
    }


def run_detector_only(config):
    """Like :func:`run` but from a feature CSV, skipping packet parsing and extraction."""
    if config.features is None:
        raise ConfigError("run_detector_only needs a feature CSV")
    return run(config)


def benchmark(X, ks, rho=0.75, lr=0.1, seed=0, train_rows=1000, min_seconds=0.25, repeats=3):
    """Per-instance execute throughput for forced uniform partitions.

    For each ``k`` the ``n`` features are split into ``k`` contiguous groups,
    a model is trained on the first ``train_rows`` rows, and
    :meth:`KitNET.execute_step` is timed one row at a time. Returns
    ``{k: instances per second}`` (best of ``repeats``).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[1]
    rows = list(X)
    models = {}
    for k in ks:
        model = KitNET(FeatureMap.uniform(n, k), rho, lr, 1.0, seed)
        model.train_many(X[: max(1, min(train_rows, len(X)))])
        model.freeze()
        model.execute_step(rows[0])
        models[k] = model
    rates = {k: 0.0 for k in ks}
    # repeats are interleaved across k so slow periods on the host hit every k alike
    for _ in range(repeats):
        for k, model in models.items():
            done = 0
            start = time.perf_counter()
            while True:
                for x in rows:
                    model.execute_step(x)
                done += len(rows)
                elapsed = time.perf_counter() - start
                if elapsed >= min_seconds:
                    break
            rates[k] = max(rates[k], done / elapsed)
    return rates
