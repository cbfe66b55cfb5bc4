"""Command-line entry point: simulate, extract, train, detect, evaluate."""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import detect as detect_mod
from . import simulator
from .features import write_feature_csv
from .fl.data import LABEL_INDEX, LABELS, MinMaxScaler, label_flows, load_dataset, read_truth_csv, stratified_split
from .fl.metrics import Metrics, evaluate as evaluate_metrics
from .fl.model import DEFAULT_LAYOUT
from .fl.training import ALL_METHODS, LocalConfig, RoundConfig, run_rounds
from .modelfile import TrainedModel
from .syslogout import FileSink, UdpSink

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _metrics_row(name: str, m: Metrics) -> str:
    return (f"{name:<12} {m.accuracy * 100:>8.2f}% {m.tpr * 100:>8.2f}% "
            f"{m.fpr * 100:>8.2f}% {m.f1 * 100:>8.2f}%")


def _metrics_header() -> str:
    return f"{'Method':<12} {'Accuracy':>9} {'TPR':>9} {'FPR':>9} {'F1':>9}"


def cmd_simulate(args) -> int:
    cfg = simulator.SimConfig.from_file(args.config)
    trace = simulator.simulate(cfg)
    simulator.write_pcap(trace, args.pcap)
    simulator.write_truth(trace, args.truth)
    print(f"wrote {len(trace.packets)} packets to {args.pcap}, "
          f"{len(trace.truth_entries())} truth entries to {args.truth}")
    return EXIT_OK


def cmd_extract(args) -> int:
    rows = detect_mod.extract_feature_rows(args.pcap)
    if args.labels:
        truth = read_truth_csv(args.labels)
        labels, _, _ = label_flows(rows, truth, benign_run=True)
        for row, label in zip(rows, labels):
            row["label"] = label
    write_feature_csv(rows, args.out)
    print(f"wrote {len(rows)} flows to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    dataset = load_dataset(args.features, args.truth)
    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = stratified_split(dataset.y, args.holdout, rng)

    # pooled min-max: each hub contributes only its (min, max) vectors
    train_mask = np.zeros(len(dataset), dtype=bool)
    train_mask[train_idx] = True
    stats = []
    for h in sorted(set(dataset.hubs.tolist())):
        mask = (dataset.hubs == h) & train_mask
        if mask.any():
            stats.append((dataset.X[mask].min(axis=0), dataset.X[mask].max(axis=0)))
    scaler = MinMaxScaler.fit_pooled(stats)

    Xs = scaler.transform(dataset.X)
    clients = []
    for h in sorted(set(dataset.hubs.tolist())):
        mask = (dataset.hubs == h) & train_mask
        if mask.any():
            clients.append((f"hub-{h}", Xs[mask], dataset.y[mask]))
    holdout = (Xs[test_idx], dataset.y[test_idx])

    cfg = RoundConfig(
        method=args.method, rounds=args.rounds,
        local=LocalConfig(epochs=args.epochs, batch_size=args.batch_size,
                          lr=args.lr, mu=args.mu),
        seed=args.seed, layout=DEFAULT_LAYOUT)
    params, history = run_rounds(clients, cfg, holdout=holdout)

    if history:
        print(_metrics_header())
        print(_metrics_row(args.method, history[-1]))
    TrainedModel.new(params, scaler, DEFAULT_LAYOUT).save(args.out)
    print(f"saved model to {args.out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    model = TrainedModel.load(args.model)
    sink = None
    if args.syslog_file:
        sink = FileSink(args.syslog_file)
    elif args.syslog_udp:
        host, port = args.syslog_udp.rsplit(":", 1)
        sink = UdpSink(host, int(port))

    def run_one(pcap_path: str, audit_path: str) -> None:
        events = detect_mod.detect(pcap_path, model, audit_csv=audit_path, sink=sink)
        print(f"{pcap_path}: {len(events)} security events")

    if args.watch:
        import os
        seen: set[str] = set()
        try:
            while True:
                for name in sorted(os.listdir(args.watch)):
                    if name.endswith(".pcap") and name not in seen:
                        seen.add(name)
                        path = os.path.join(args.watch, name)
                        run_one(path, path + ".audit.csv")
                time.sleep(args.poll_interval)
        except KeyboardInterrupt:
            return EXIT_OK
    run_one(args.pcap, args.audit)
    return EXIT_OK


def _read_label_column(path: str, preferred: str) -> tuple[list[str], list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    col = preferred if rows and preferred in rows[0] else "label"
    ids = [r.get("flow_id", str(i)) for i, r in enumerate(rows)]
    return ids, [r[col] for r in rows]


def cmd_evaluate(args) -> int:
    pred_ids, pred_labels = _read_label_column(args.pred, "predicted_label")
    true_ids, true_labels = _read_label_column(args.truth, "label")
    true_by_id = dict(zip(true_ids, true_labels))
    pairs = [(p, true_by_id[i]) for i, p in zip(pred_ids, pred_labels) if i in true_by_id]
    if not pairs:
        print("error: no joinable rows between predictions and truth", file=sys.stderr)
        return EXIT_RUNTIME
    y_pred = np.array([LABEL_INDEX.get(p, 0) for p, _ in pairs])
    y_true = np.array([LABEL_INDEX.get(t, 0) for _, t in pairs])
    m = evaluate_metrics(y_pred, y_true, len(LABELS))
    print(_metrics_header())
    print(_metrics_row(args.name, m))
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ocpp-flowguard",
                     description="Flow-based OCPP 1.6 intrusion detection toolkit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="generate labeled traffic as a PCAP + truth CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--pcap", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="extract per-flow features from a PCAP")
    p.add_argument("--pcap", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="truth CSV used to fill the label column")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="federated training of the flow classifier")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--truth", nargs="+", required=True)
    p.add_argument("--method", choices=ALL_METHODS, default="fedavg")
    p.add_argument("--rounds", type=int, default=30)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--holdout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="classify flows of a PCAP and emit security events")
    p.add_argument("--pcap")
    p.add_argument("--model", required=True)
    p.add_argument("--audit", default="audit.csv")
    p.add_argument("--syslog-file")
    p.add_argument("--syslog-udp", metavar="HOST:PORT")
    p.add_argument("--watch", metavar="DIR", help="poll a directory for new .pcap files")
    p.add_argument("--poll-interval", type=float, default=2.0)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--name", default="model")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help (0) or a usage error (1)
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if args.func is cmd_detect and not args.pcap and not args.watch:
        parser.print_usage(sys.stderr)
        print("error: detect needs --pcap or --watch", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_OK
    except Exception as exc:  # runtime failures exit 2 with a one-line diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
