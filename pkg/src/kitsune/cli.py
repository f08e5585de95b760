"""Command line entry point: ``kitsune run | bench | eval``.

Exit codes: 0 success, 1 usage error, 2 input format error.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from kitsune import metrics
from kitsune.feature_mapper import NotReadyError
from kitsune.packet_ingest import FormatError, read_feature_csv
from kitsune.pipeline import ConfigError, InputError, PipelineConfig, benchmark, run

EXIT_OK, EXIT_USAGE, EXIT_INPUT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    parser = _Parser(prog="kitsune", description="Online autoencoder-ensemble network intrusion detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="train on the head of the input, then score the rest")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pcap", help="classic pcap capture (Ethernet)")
    src.add_argument("--features", help="feature-vector CSV (detector only)")
    p.add_argument("--m", type=int, default=10, help="max inputs per ensemble autoencoder")
    p.add_argument("--fm-grace", type=int, default=5_000)
    p.add_argument("--ad-grace", type=int, default=50_000)
    p.add_argument("--rho", type=float, default=0.75, help="hidden-layer compression ratio")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=1.0, help="alert sensitivity (>= 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--evict-every", type=int, default=100_000)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--scores", help="write index,timestamp,rmse rows here")
    p.add_argument("--alerts", help="write alerts as JSON lines here")
    p.add_argument("--save-model")
    p.add_argument("--load-model")
    p.add_argument("--dump-features", help="write extracted feature vectors as CSV")
    p.add_argument("--prefetch", action="store_true", help="parse packets on a background thread")

    b = sub.add_parser("bench", help="execute throughput for forced ensemble sizes")
    b.add_argument("--features", required=True)
    b.add_argument("--k", type=_int_list, default=[1, 12, 35])
    b.add_argument("--rho", type=float, default=0.75)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--rows", type=int, default=2_000, help="rows used for timing")

    e = sub.add_parser("eval", help="AUC / EER / TPR at fixed FPR from scores and labels")
    e.add_argument("--scores", required=True,
                   help="scores CSV (index,timestamp,rmse) or a two-column score,label CSV")
    e.add_argument("--labels", help="labels CSV: one 'label' column per packet, or index,label")
    e.add_argument("--skip", type=int, default=0, help="ignore rows with index below this")
    e.add_argument("--fpr", type=float, default=0.001)
    e.add_argument("--sweep", help="write threshold,fpr,tpr,fnr rows here")
    return parser


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip().lower() for h in rows[0]]
    return header, [r for r in rows[1:] if r]


def _load_scored(args):
    header, rows = _read_csv(args.scores)
    if args.labels is None:
        if header[:2] != ["score", "label"]:
            raise FormatError(f"{args.scores}: expected score,label columns when --labels is omitted")
        scores = np.array([float(r[0]) for r in rows])
        return scores, metrics.parse_labels(r[1] for r in rows)
    if "rmse" not in header or "index" not in header:
        raise FormatError(f"{args.scores}: expected index and rmse columns")
    i_col, s_col = header.index("index"), header.index("rmse")
    lheader, lrows = _read_csv(args.labels)
    if "label" not in lheader:
        raise FormatError(f"{args.labels}: missing label column")
    l_col = lheader.index("label")
    if "index" in lheader:
        x_col = lheader.index("index")
        by_index = {int(r[x_col]): r[l_col] for r in lrows}
    else:
        by_index = {i: r[l_col] for i, r in enumerate(lrows)}
    scores, labels = [], []
    for r in rows:
        idx = int(r[i_col])
        if idx < args.skip:
            continue
        if idx not in by_index:
            raise FormatError(f"{args.labels}: no label for packet {idx}")
        scores.append(float(r[s_col]))
        labels.append(by_index[idx])
    return np.array(scores), metrics.parse_labels(labels)


def _cmd_run(args):
    config = PipelineConfig(
        pcap=args.pcap, features=args.features, m=args.m, fm_grace=args.fm_grace,
        ad_grace=args.ad_grace, rho=args.rho, lr=args.lr, beta_s=args.beta, seed=args.seed,
        evict_every=args.evict_every, epsilon=args.epsilon, scores=args.scores,
        alerts=args.alerts, save_model=args.save_model, load_model=args.load_model,
        dump_features=args.dump_features, prefetch=args.prefetch,
    )
    summary = run(config)
    for w in summary["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps(summary, indent=2))


def _cmd_bench(args):
    _, X = read_feature_csv(args.features)
    rates = benchmark(X[: args.rows], args.k, rho=args.rho, seed=args.seed)
    print(json.dumps({"n": X.shape[1], "packets_per_second": {str(k): r for k, r in rates.items()}}, indent=2))


def _cmd_eval(args):
    scores, labels = _load_scored(args)
    print(json.dumps(metrics.report(scores, labels, args.fpr), indent=2))
    if args.sweep:
        thr, fpr, tpr = metrics.roc_sweep(scores, labels)
        with open(args.sweep, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", "fpr", "tpr", "fnr"])
            w.writerows(zip(thr.tolist(), fpr.tolist(), tpr.tolist(), (1 - tpr).tolist()))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "bench": _cmd_bench, "eval": _cmd_eval}[args.command]
    try:
        handler(args)
    except ConfigError as exc:
        print(f"kitsune: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, InputError, NotReadyError, ValueError, OSError) as exc:
        print(f"kitsune: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
