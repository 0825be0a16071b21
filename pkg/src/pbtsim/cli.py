"""Reproduction harness: configure runs, compare policies, emit metric tables.

Exit codes are a stable contract: 0 success, 2 usage or configuration
problems, 3 runtime invariant violations. Every summary file embeds the
full configuration and a workload content hash so comparisons are
provably like-for-like; `compare` refuses summaries whose fingerprints
differ.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import random
import statistics
import sys

from .baselines import RoutingPolicy, flow_feasible, parse_policy
from .credit import format_credit, parse_credit
from .engine import (
    Event,
    LinkChangeEvent,
    RunMetrics,
    SimParams,
    TransactionEvent,
    run_dynamic,
    run_static,
)
from .errors import ConfigError, InternalError, ParseError
from .workload import (
    build_graph,
    format_report,
    generate_synthetic,
    parse_link_changes,
    parse_snapshot,
    parse_transactions,
    preprocess,
    serialize_link_changes,
    serialize_snapshot,
    serialize_transactions,
)

SUMMARY_METRICS = ("success_ratio", "delay_hops", "tx_messages", "path_len", "stab_messages")

_CONFIG_KEYS = {
    "mode", "policy", "snapshot", "transactions", "link_changes", "out",
    "trees", "attempts", "epoch", "tl", "landmarks", "runs", "seed",
    "sample", "feasible_only", "addr_overhead",
}


def _load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{i}: bad config line {line!r}")
            values[key] = value.strip()
    return values


def _parse_trees(text: str) -> list[int]:
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError:
            raise ConfigError(f"bad trees range {text!r}") from None
        if lo_i < 1 or hi_i < lo_i:
            raise ConfigError(f"bad trees range {text!r}")
        return list(range(lo_i, hi_i + 1))
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"bad trees value {text!r}") from None
    if value < 1:
        raise ConfigError("trees must be >= 1")
    return [value]


def _parse_bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def _atomic_write(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None


# ---- run ---------------------------------------------------------------------


class _RunOptions:
    """Merged config-file and flag values for cmd_run."""

    def __init__(self, args: argparse.Namespace):
        cfg = _load_config(args.config) if args.config else {}

        def pick(name: str, default: str | None = None) -> str | None:
            flag = getattr(args, name, None)
            if flag is not None:
                return str(flag)
            return cfg.get(name, default)

        self.mode = pick("mode", "static")
        if self.mode not in ("static", "dynamic"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        policy_text = pick("policy")
        if not policy_text:
            raise ConfigError("a policy is required")
        self.policy = parse_policy(policy_text)
        self.snapshot = pick("snapshot")
        self.transactions = pick("transactions")
        if not self.snapshot or not self.transactions:
            raise ConfigError("snapshot and transactions files are required")
        self.link_changes = pick("link_changes")
        self.out = pick("out", ".")
        self.trees = _parse_trees(pick("trees", "3"))
        self.attempts = int(pick("attempts", "2"))
        self.epoch = int(pick("epoch", "1000"))
        tl = pick("tl")
        self.tl = parse_credit(tl) if tl else None
        self.landmarks = pick("landmarks", "degree")
        self.runs = int(pick("runs", "1"))
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        self.seed = int(pick("seed", "1"))
        sample = pick("sample")
        self.sample = int(sample) if sample else None
        feasible = pick("feasible_only", "false")
        self.feasible_only = _parse_bool(feasible)
        addr = pick("addr_overhead", "true")
        self.addr_overhead = _parse_bool(addr)

    def fingerprint(self, workload_bytes: bytes) -> str:
        h = hashlib.sha256()
        h.update(workload_bytes)
        config = (
            f"mode={self.mode};attempts={self.attempts};epoch={self.epoch};"
            f"tl={self.tl};landmarks={self.landmarks};runs={self.runs};"
            f"seed={self.seed};sample={self.sample};feasible_only={self.feasible_only};"
            f"addr_overhead={self.addr_overhead}"
        )
        h.update(config.encode())
        return h.hexdigest()[:16]

    def config_line(self) -> str:
        parts = [
            f"mode={self.mode}", f"policy={self.policy.label}",
            f"trees={','.join(map(str, self.trees))}", f"attempts={self.attempts}",
            f"epoch={self.epoch}", f"tl={self.tl if self.tl is not None else 'auto'}",
            f"landmarks={self.landmarks}", f"runs={self.runs}", f"seed={self.seed}",
            f"sample={self.sample}", f"feasible_only={self.feasible_only}",
            f"addr_overhead={self.addr_overhead}",
        ]
        return "; ".join(parts)


def _slug(label: str) -> str:
    return label.lower().replace("-", "_").replace("@", "_")


def _tx_csv(metrics: RunMetrics) -> str:
    lines = ["index,time,success,attempts,messages,hop_delay,mean_path_len"]
    for t in metrics.transactions:
        lines.append(
            f"{t.index},{format_credit(t.time)},{int(t.success)},{t.attempts},"
            f"{t.messages},{t.hop_delay},{t.mean_path_length:.6f}"
        )
    return "\n".join(lines) + "\n"


def _epoch_csv(metrics: RunMetrics) -> str:
    lines = ["epoch,transactions,successes,success_ratio,stab_messages"]
    for e in metrics.epochs:
        lines.append(
            f"{e.epoch},{e.transactions},{e.successes},{e.success_ratio:.6f},"
            f"{e.stabilization_messages}"
        )
    return "\n".join(lines) + "\n"


def _summary_rows(label: str, runs: list[RunMetrics]) -> str:
    summaries = [m.summary() for m in runs]
    cells = [label]
    means = []
    sds = []
    for key in SUMMARY_METRICS:
        values = [s[key] for s in summaries]
        mean = statistics.fmean(values)
        sd = statistics.stdev(values) if len(values) > 1 else 0.0
        means.append(f"{mean:.6f}")
        sds.append(f"{sd:.6f}")
    return ",".join(cells + means + sds)


def cmd_run(args: argparse.Namespace) -> int:
    opts = _RunOptions(args)
    snapshot_text = _read_text(opts.snapshot)
    tx_text = _read_text(opts.transactions)
    changes_text = _read_text(opts.link_changes) if opts.link_changes else None

    snapshot = parse_snapshot(snapshot_text)
    tx_file = parse_transactions(tx_text)
    changes = parse_link_changes(changes_text) if changes_text is not None else None

    workload_bytes = snapshot_text.encode() + tx_text.encode() + (
        changes_text.encode() if changes_text is not None else b""
    )
    fingerprint = opts.fingerprint(workload_bytes)

    g = build_graph(snapshot)
    pool = [TransactionEvent(t.time, t.value, t.src, t.dst) for t in tx_file.records]
    if opts.feasible_only:
        pool = [t for t in pool if t.src in g.nodes and t.dst in g.nodes
                and flow_feasible(g, t.src, t.dst, t.value)]
        if not pool:
            raise ConfigError("no max-flow-feasible transactions in the pool")
    change_events = (
        [LinkChangeEvent(c.time, c.u, c.v, c.new_weight) for c in changes.records]
        if changes is not None
        else []
    )

    os.makedirs(opts.out, exist_ok=True)
    summary_lines = [
        f"# fingerprint={fingerprint}",
        f"# config: {opts.config_line()}",
        "# dispersion=sample standard deviation over runs",
        "policy," + ",".join(SUMMARY_METRICS) + ","
        + ",".join(f"{m}_sd" for m in SUMMARY_METRICS),
    ]

    for trees in opts.trees:
        label = opts.policy.label if len(opts.trees) == 1 else f"{opts.policy.label}@L{trees}"
        run_metrics: list[RunMetrics] = []
        for r in range(opts.runs):
            params = SimParams(
                trees=trees, attempts=opts.attempts, epoch=opts.epoch, tl=opts.tl,
                landmark_mode=opts.landmarks, seed=opts.seed + r,
                addr_overhead=opts.addr_overhead,
            )
            txs = pool
            if opts.sample is not None:
                picker = random.Random(opts.seed + r)
                txs = [pool[picker.randrange(len(pool))] for _ in range(opts.sample)]
            if opts.mode == "static":
                metrics = run_static(g, txs, opts.policy, params)
            else:
                events: list[Event] = sorted(
                    change_events + list(txs), key=lambda e: e.time
                )
                metrics = run_dynamic(g, events, opts.policy, params)
            run_metrics.append(metrics)
            slug = _slug(label)
            _atomic_write(os.path.join(opts.out, f"{slug}_run{r}_transactions.csv"), _tx_csv(metrics))
            _atomic_write(os.path.join(opts.out, f"{slug}_run{r}_epochs.csv"), _epoch_csv(metrics))
        summary_lines.append(_summary_rows(label, run_metrics))

    summary_path = os.path.join(opts.out, "summary.csv")
    _atomic_write(summary_path, "\n".join(summary_lines) + "\n")
    print(f"wrote {summary_path}")
    return 0


# ---- compare ------------------------------------------------------------------


def _parse_summary(path: str) -> tuple[str, list[list[str]]]:
    fingerprint = None
    rows = []
    header_seen = False
    for i, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("# fingerprint="):
                fingerprint = line.split("=", 1)[1]
            continue
        if not header_seen:
            header_seen = True  # column header
            continue
        rows.append(line.split(","))
    if fingerprint is None or not rows:
        raise ConfigError(f"{path} is not a summary file")
    return fingerprint, rows


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.summaries) < 2:
        raise ConfigError("compare needs at least two summary files")
    parsed = [_parse_summary(p) for p in args.summaries]
    fingerprints = {fp for fp, _ in parsed}
    if len(fingerprints) != 1:
        raise ConfigError(
            "workload fingerprints differ; refusing to compare: "
            + ", ".join(sorted(fingerprints))
        )
    print("policy," + ",".join(SUMMARY_METRICS))
    out_lines = []
    for _, rows in parsed:
        for row in rows:
            label = row[0]
            cells = []
            for j in range(len(SUMMARY_METRICS)):
                mean = float(row[1 + j])
                sd = float(row[1 + len(SUMMARY_METRICS) + j])
                cells.append(f"{mean:.4f}±{sd:.4f}")
            line = ",".join([label] + cells)
            print(line)
            out_lines.append(line)
    if args.out:
        _atomic_write(
            args.out,
            "policy," + ",".join(SUMMARY_METRICS) + "\n" + "\n".join(out_lines) + "\n",
        )
    return 0


# ---- generate / preprocess -------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    def parse_range(text: str) -> tuple[float, float]:
        lo, _, hi = text.partition(":")
        try:
            return float(lo), float(hi)
        except ValueError:
            raise ConfigError(f"bad range {text!r}") from None

    snapshot, txs = generate_synthetic(
        args.nodes,
        model=args.model,
        tx_count=args.tx_count,
        seed=args.seed,
        m=args.m,
        k=args.k,
        rewire_p=args.rewire_p,
        weight_range=parse_range(args.weight_range),
        value_range=parse_range(args.value_range),
    )
    _atomic_write(args.snapshot_out, serialize_snapshot(snapshot))
    _atomic_write(args.transactions_out, serialize_transactions(txs))
    print(f"wrote {args.snapshot_out} and {args.transactions_out}")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    snapshot = parse_snapshot(_read_text(args.snapshot))
    txs = parse_transactions(_read_text(args.transactions))
    changes = (
        parse_link_changes(_read_text(args.link_changes))
        if args.link_changes
        else parse_link_changes("time,u,v,new_weight\n")
    )
    result = preprocess(snapshot, txs, changes)
    os.makedirs(args.out_dir, exist_ok=True)
    _atomic_write(os.path.join(args.out_dir, "snapshot.csv"), serialize_snapshot(result.snapshot))
    _atomic_write(os.path.join(args.out_dir, "transactions.csv"), serialize_transactions(result.transactions))
    _atomic_write(os.path.join(args.out_dir, "link_changes.csv"), serialize_link_changes(result.link_changes))
    report_text = format_report(result.report)
    _atomic_write(os.path.join(args.out_dir, "report.txt"), report_text)
    print(report_text, end="")
    return 0


# ---- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbtsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a workload under one policy")
    run.add_argument("--config", help="key=value config file; flags override")
    run.add_argument("--mode", choices=("static", "dynamic"))
    run.add_argument("--policy", help="e.g. GE-RAND-OND, LM-MUL-PER, TO-SW, FF")
    run.add_argument("--snapshot")
    run.add_argument("--transactions")
    run.add_argument("--link-changes", dest="link_changes")
    run.add_argument("--out")
    run.add_argument("--trees", help="tree count, or a sweep like 1..7")
    run.add_argument("--attempts", type=int)
    run.add_argument("--epoch", type=int)
    run.add_argument("--tl")
    run.add_argument("--landmarks", choices=("degree", "random"))
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--sample", type=int, help="transactions sampled per run")
    run.add_argument("--feasible-only", dest="feasible_only", action="store_const", const="true",
                     help="restrict the pool to max-flow-feasible transactions")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="merge summaries into one table")
    cmp_.add_argument("summaries", nargs="*")
    cmp_.add_argument("--out")
    cmp_.set_defaults(func=cmd_compare)

    gen = sub.add_parser("generate", help="write a synthetic workload")
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--model", choices=("scale-free", "small-world"), default="scale-free")
    gen.add_argument("--tx-count", dest="tx_count", type=int, default=0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--m", type=int, default=2)
    gen.add_argument("--k", type=int, default=4)
    gen.add_argument("--rewire-p", dest="rewire_p", type=float, default=0.1)
    gen.add_argument("--weight-range", dest="weight_range", default="0.5:500")
    gen.add_argument("--value-range", dest="value_range", default="1:100")
    gen.add_argument("--snapshot-out", dest="snapshot_out", required=True)
    gen.add_argument("--transactions-out", dest="transactions_out", required=True)
    gen.set_defaults(func=cmd_generate)

    pre = sub.add_parser("preprocess", help="apply the dataset cleaning rules")
    pre.add_argument("--snapshot", required=True)
    pre.add_argument("--transactions", required=True)
    pre.add_argument("--link-changes", dest="link_changes")
    pre.add_argument("--out-dir", dest="out_dir", required=True)
    pre.set_defaults(func=cmd_preprocess)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except InternalError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
