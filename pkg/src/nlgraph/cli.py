"""Command-line front end: ``nlgraph {simulate,learn,causal,evaluate}``.

Exit codes: 0 success, 2 bad flags, 3 bad input data or I/O failure,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .benchgen import f1_score, generate, pr_auc, pr_curve, replicate_seed, truth_nodes
from .core import DataMatrix, LearnConfig, validate
from .errors import MalformedCsvError, NlgraphError, UnknownColumnError
from .structure_learning import causal_search, default_workers, learn

log = logging.getLogger("nlgraph")

EXIT_FLAGS = 2
EXIT_DATA = 3

# conventions behind the evaluation numbers, echoed into every manifest
AUC_CONVENTIONS = {
    "ranking": "raw p-value, ascending",
    "integration": "step-wise sum of recall increment times precision",
    "untested_true_edges": "false negatives",
}


@dataclass
class RunManifest:
    command: str
    config: Dict[str, object]
    seed: int
    version: str = __version__
    timings: Dict[str, float] = field(default_factory=dict)
    tested_pairs: int = 0
    selected_edges: int = 0
    conventions: Dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(**d)

    def write(self, out_dir: Path) -> None:
        (out_dir / "manifest.json").write_text(self.to_json())


# --- file I/O ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_csv(path) -> DataMatrix:
    """Read a header-plus-reals comma-separated file into a validated DataMatrix."""
    rows: List[List[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsvError(1, "empty file") from None
        header = [h.strip() for h in header]
        if not header or any(h == "" for h in header):
            raise MalformedCsvError(1, "empty column name in header")
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != len(header):
                raise MalformedCsvError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise MalformedCsvError(line, str(exc)) from None
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    data = DataMatrix(values, tuple(header))
    validate(data)
    return data


def write_csv(path, data: DataMatrix) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(data.names) + "\n")
        for row in data.values:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_tsv(path, header: Sequence[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")


# --- commands --------------------------------------------------------------------


def _learn_config(args, ns: Optional[int]) -> LearnConfig:
    return LearnConfig(
        ns=ns,
        alpha=args.alpha,
        cit_kind="permutation" if args.cit == "perm" else "kernel",
        variant=args.variant,
        seed=args.seed,
        workers=args.workers,
    )


def cmd_simulate(args) -> int:
    data, truth, spec = generate(args.model, args.n, args.p, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "data.csv", data)
    _write_tsv(out / "truth.tsv", ("i", "j"), ((i + 1, j + 1) for i, j in truth.sorted_edges()))
    (out / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_learn(args) -> int:
    t0 = time.perf_counter()
    data = read_csv(args.data)
    read_time = time.perf_counter() - t0
    cfg = _learn_config(args, args.ns)
    res = learn(data, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = sorted(res.records, key=lambda r: (r.adj_p, r.i, r.j))
    _write_tsv(
        out / "edges.tsv",
        ("i", "j", "cond_size", "raw_p", "adj_p", "selected"),
        ((r.i + 1, r.j + 1, len(r.cond_set), _fmt(r.raw_p), _fmt(r.adj_p), int(r.selected))
         for r in recs),
    )
    config = _config_echo(args)
    config["ns_resolved"] = res.ns
    RunManifest(
        "learn", config, args.seed,
        timings={"read": read_time, **res.timings},
        tested_pairs=res.tested_pairs, selected_edges=len(res.graph),
    ).write(out)
    return 0


def cmd_causal(args) -> int:
    t0 = time.perf_counter()
    frame = read_csv(args.data)
    read_time = time.perf_counter() - t0
    yidx = frame.index_of(args.response)
    keep = [k for k in range(frame.p) if k != yidx]
    data = DataMatrix(frame.values[:, keep], tuple(frame.names[k] for k in keep))
    forced = []
    for name in args.force_feature or ():
        if name == args.response:
            raise UnknownColumnError(name)
        forced.append(data.index_of(name))
    cfg = _learn_config(args, args.ns)
    cfg = replace(cfg, force_features=tuple(forced))
    res = causal_search(data, frame.values[:, yidx], cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = sorted(res.records, key=lambda r: (r.adj_p, r.j))
    _write_tsv(
        out / "causal.tsv",
        ("feature", "raw_p", "adj_p", "selected", "cond_set"),
        ((data.names[r.j], _fmt(r.raw_p), _fmt(r.adj_p), int(r.selected),
          ";".join(data.names[k] for k in r.cond_set)) for r in recs),
    )
    RunManifest(
        "causal", _config_echo(args), args.seed,
        timings={"read": read_time, **res.timings},
        tested_pairs=len(res.records), selected_edges=len(res.selected),
    ).write(out)
    return 0


def cmd_evaluate(args) -> int:
    t_start = time.perf_counter()
    cfg = _learn_config(args, args.ns)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, curves = [], []
    timings: Dict[str, float] = {}
    tested = selected = 0
    for r in range(args.replicates):
        rseed = replicate_seed(args.seed, r)
        data, truth, _ = generate(args.model, args.n, args.p, rseed)
        res = learn(data, replace(cfg, seed=rseed))
        points = pr_curve(res.records, truth)
        auc = pr_auc(points)
        f1 = f1_score(res.graph, truth)
        f1_support = f1_score(res.graph, truth, truth_nodes(truth))
        rows.append((r, rseed, _fmt(auc), _fmt(f1), _fmt(f1_support)))
        curves.extend((r, _fmt(q.threshold), _fmt(q.precision), _fmt(q.recall)) for q in points)
        for k, v in res.timings.items():
            timings[k] = timings.get(k, 0.0) + v
        tested += res.tested_pairs
        selected += len(res.graph)
        log.info("replicate %d: auc=%.4f f1=%.3f", r, auc, f1)
    _write_tsv(out / "auc.tsv", ("replicate", "seed", "auc", "f1", "f1_support"), rows)
    _write_tsv(out / "pr_curve.tsv", ("replicate", "threshold", "precision", "recall"), curves)
    aucs = np.array([float(row[2]) for row in rows])
    f1s = np.array([float(row[3]) for row in rows])
    f1_support = np.array([float(row[4]) for row in rows])
    m = len(aucs)
    summary = {
        "replicates": m,
        "mean_auc": float(aucs.mean()),
        "sd_mean_auc": float(aucs.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0,
        "mean_f1": float(f1s.mean()),
        "mean_f1_support": float(f1_support.mean()),
        "wall_seconds": time.perf_counter() - t_start,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    RunManifest(
        "evaluate", _config_echo(args), args.seed, timings=timings,
        tested_pairs=tested, selected_edges=selected, conventions=dict(AUC_CONVENTIONS),
    ).write(out)
    print(f"mean AUC {summary['mean_auc']:.4f} (SD of mean {summary['sd_mean_auc']:.4f}), "
          f"mean F1 on true-edge nodes {summary['mean_f1_support']:.4f}")
    return 0


def _config_echo(args) -> Dict[str, object]:
    skip = {"func", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --- argument parsing ----------------------------------------------------------


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _alpha(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _add_learning_flags(sp, with_variant: bool = True) -> None:
    sp.add_argument("--ns", type=_positive_int, default=None,
                    help="neighborhood size (default floor(n / log n))")
    sp.add_argument("--alpha", type=_alpha, default=0.01)
    sp.add_argument("--cit", choices=("kernel", "perm"), default="kernel")
    if with_variant:
        sp.add_argument("--variant", choices=("full", "restricted", "blanket"), default="full")
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--workers", type=_positive_int, default=None,
                    help="worker processes (default $NLGRAPH_WORKERS or 1)")
    sp.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nlgraph {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic dataset with its true graph")
    sp.add_argument("--model", choices=("example1", "example2"), required=True)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--p", type=_positive_int, required=True)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("learn", help="learn a Markov network from a CSV file")
    sp.add_argument("--data", required=True)
    _add_learning_flags(sp)
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("causal", help="find the direct neighbors of one response column")
    sp.add_argument("--data", required=True)
    sp.add_argument("--response", required=True)
    sp.add_argument("--force-feature", action="append", default=[],
                    help="always include this column (repeatable)")
    _add_learning_flags(sp, with_variant=False)
    sp.set_defaults(func=cmd_causal, variant="full")

    sp = sub.add_parser("evaluate", help="replicate simulate+learn and average PR-AUC")
    sp.add_argument("--model", choices=("example1", "example2"), required=True)
    sp.add_argument("--replicates", type=_positive_int, required=True)
    sp.add_argument("--n", type=_positive_int, default=400)
    sp.add_argument("--p", type=_positive_int, default=30)
    _add_learning_flags(sp)
    sp.set_defaults(func=cmd_evaluate)
    return parser


def _check_model_dims(parser, args) -> None:
    model = getattr(args, "model", None)
    if model == "example1" and args.p < 7:
        parser.error("example1 needs --p >= 7")
    if model == "example2" and args.p < 3:
        parser.error("example2 needs --p >= 3")
    if model is not None and args.n < 10:
        parser.error("--n must be at least 10")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_model_dims(parser, args)
    if hasattr(args, "workers") and args.workers is None:
        args.workers = default_workers()
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NlgraphError as exc:
        print(f"nlgraph: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"nlgraph: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
