"""Command-line driver: ``hamforge <subcommand> ...``.

Exit codes: 0 success, 2 usage or parameter error, 3 runtime failure.
Machine-readable output (JSON, CSV, edge lists, circuit text) goes to --out or
stdout; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import ftcost
from .circuit import count_resources, parse, serialize
from .graphs import (NAMED_GRAPHS, GenerationError, Graph, format_edge_list, load_edge_list,
                     load_named, random_regular, random_regular_odd_repair)
from .optimizer import VERIFY_MAX_QUBITS, optimize, verify_equivalence
from .sim import (NondeterministicCircuitError, SearchFailure, find_min_r, is_unitary,
                  spectral_distance, unitary_of)
from .synth import DisorderedHeisenberg, build_pf_circuit

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
AUTO_VERIFY_QUBITS = 8
MASK64 = (1 << 64) - 1
CSV_COLUMNS = ("k", "n", "sample", "seed", "status", "r_min", "error", "elapsed_ms")

# evolution time t = 2d, with d the diameter of the degree-diameter target graph for k
SWEEP_TIME = {k: 2.0 * d for k, d, _ in NAMED_GRAPHS.values()}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# seeds

def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def sample_seed(master: int, k: int, n: int, sample: int) -> int:
    """Per-sample seed: fold k, n and the sample index into the master seed."""
    s = splitmix64(master & MASK64)
    for v in (k, n, sample):
        s = splitmix64(s ^ v)
    return s


def disorder_seed(seed: int) -> int:
    return splitmix64(seed ^ 0xD1B54A32D192ED03)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    k: int = 3
    n_range: list = field(default_factory=lambda: [4, 12])   # inclusive [lo, hi]
    n_values: list | None = None                             # explicit n list, overrides n_range
    order: int = 4
    t: float | None = None
    epsilon: float = 1e-3
    samples: int = 10
    seed: int = 0
    mode: str = "preft"
    cost_model: dict = field(default_factory=dict)
    out: str | None = None
    workers: int = 1

    def ns(self) -> list[int]:
        if self.n_values is not None:
            ns = sorted({int(x) for x in self.n_values})
        else:
            if len(self.n_range) != 2:
                raise UsageError("n_range must be [lo, hi]")
            ns = list(range(int(self.n_range[0]), int(self.n_range[1]) + 1))
        if not ns:
            raise UsageError("n_range is empty")
        return ns

    def validate(self) -> None:
        if not 0 < self.epsilon < 1:
            raise UsageError("epsilon must lie in (0, 1)")
        if self.samples < 1:
            raise UsageError("samples must be >= 1")
        if self.mode not in ("preft", "ft"):
            raise UsageError(f"unknown mode {self.mode!r}")
        if self.order not in (2, 4, 6):
            raise UsageError(f"unsupported order {self.order}")
        ns = self.ns()
        if max(ns) > 12:
            raise UsageError("sweep points are limited to n <= 12")
        if min(ns) <= self.k:
            raise UsageError(f"need n > k for every point (k={self.k})")


def load_config(path) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return data


# ---------------------------------------------------------------------------
# shared helpers

def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj, out: str | None) -> None:
    _write(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)


def _graph_from_args(args) -> Graph:
    if getattr(args, "graph", None):
        return load_edge_list(args.graph)
    if getattr(args, "named", None):
        return load_named(args.named)
    if getattr(args, "regular", None):
        n, k = args.regular
        return random_regular(n, k, args.seed)
    raise UsageError("give one of --graph, --named or --regular N K")


def _add_graph_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--graph", help="edge-list file")
    g.add_argument("--named", help=f"named graph: {', '.join(sorted(NAMED_GRAPHS))}")
    g.add_argument("--regular", nargs=2, type=int, metavar=("N", "K"),
                   help="random K-regular graph on N nodes (uses --seed)")


def _hamiltonian(args, g: Graph) -> DisorderedHeisenberg:
    return DisorderedHeisenberg.random(g, disorder_seed(args.seed), args.t, args.epsilon)


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_graph(args) -> int:
    if args.named:
        g = load_named(args.named)
    elif args.regular:
        n, k = args.regular
        if (n * k) % 2 and args.repair:
            g = random_regular_odd_repair(n, k, args.seed)
        else:
            g = random_regular(n, k, args.seed)
    else:
        raise UsageError("give --named NAME or --regular N K")
    _write(format_edge_list(g), args.out)
    return EXIT_OK


def cmd_build(args) -> int:
    g = _graph_from_args(args)
    h = _hamiltonian(args, g)
    c = build_pf_circuit(h, args.order, args.r, args.mode, lower_gates=not args.macro)
    _write(serialize(c), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    c = parse(Path(args.input).read_text())
    opt, stats = optimize(c)
    verified = None
    if c.num_qubits <= AUTO_VERIFY_QUBITS or args.verify:
        if c.num_qubits > VERIFY_MAX_QUBITS:
            raise UsageError(f"cannot verify circuits on more than {VERIFY_MAX_QUBITS} qubits")
        verified = verify_equivalence(c, opt)
    _write(serialize(opt), args.out)
    report = stats.as_dict()
    report.update(verified=verified, before=count_resources(c).as_dict(),
                  after=count_resources(opt).as_dict())
    _json(report, args.stats)
    return EXIT_OK if verified is not False else EXIT_RUNTIME


def cmd_simulate(args) -> int:
    c = parse(Path(args.input).read_text())
    u = unitary_of(c)
    report = {"num_qubits": c.num_qubits, "dimension": int(u.shape[0]), "unitary": is_unitary(u)}
    if args.against:
        other = unitary_of(parse(Path(args.against).read_text()))
        report["distance"] = spectral_distance(u, other, phase_invariant=False)
        report["distance_phase_invariant"] = spectral_distance(u, other, phase_invariant=True)
    if args.matrix:
        np.save(args.matrix, u)
        report["matrix"] = args.matrix
    _json(report, args.out)
    return EXIT_OK


def cmd_find_r(args) -> int:
    g = _graph_from_args(args)
    h = _hamiltonian(args, g)
    res = find_min_r(h, args.order, args.budget, args.mode)
    report = asdict(res)
    report.update(n=g.n, t=h.t, epsilon=h.epsilon, order=args.order, mode=args.mode)
    _json(report, args.out)
    return EXIT_OK


def _sweep_job(job: tuple) -> dict:
    k, n, sample, seed, order, t, epsilon, mode, timing = job
    row = {"k": k, "n": n, "sample": sample, "seed": seed, "status": "ok",
           "r_min": "", "error": "", "elapsed_ms": 0}
    start = time.perf_counter()
    try:
        if (n * k) % 2:
            g = random_regular_odd_repair(n, k, seed)
            row["status"] = "repaired"
        else:
            g = random_regular(n, k, seed)
        h = DisorderedHeisenberg.random(g, disorder_seed(seed), t, epsilon)
        res = find_min_r(h, order, None, mode)
        row["r_min"] = res.r_min
        row["error"] = format(res.achieved_error, ".17g")
    except (GenerationError, SearchFailure, ValueError) as exc:
        row["status"] = f"failed:{type(exc).__name__}"
    if timing:
        row["elapsed_ms"] = round((time.perf_counter() - start) * 1000)
    return row


def run_sweep(cfg: ExperimentConfig, timing: bool = False) -> str:
    """Run a sweep and return the CSV text; rows are sorted by (k, n, sample)."""
    cfg.validate()
    t = cfg.t if cfg.t is not None else SWEEP_TIME.get(cfg.k)
    jobs = [(cfg.k, n, s, sample_seed(cfg.seed, cfg.k, n, s), cfg.order, t, cfg.epsilon,
             cfg.mode, timing) for n in cfg.ns() for s in range(cfg.samples)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    rows.sort(key=lambda r: (r["k"], r["n"], r["sample"]))
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    data = load_config(args.config) if args.config else {}
    for name in ("k", "order", "t", "epsilon", "samples", "seed", "mode", "out", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    if args.n is not None:
        data["n_values"] = args.n
    if args.n_range is not None:
        data["n_range"], data["n_values"] = args.n_range, None
    cfg = ExperimentConfig(**data)
    text = run_sweep(cfg, timing=args.timing)
    _write(text, cfg.out)
    return EXIT_OK


def fit_sweep_csv(text: str) -> dict:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise UsageError("CSV has no data rows")
    missing = set(CSV_COLUMNS) - set(rows[0])
    if missing:
        raise UsageError(f"CSV is missing columns {sorted(missing)}")
    by_k: dict[int, dict[int, list[float]]] = {}
    for row in rows:
        if row["status"] not in ("ok", "repaired") or not row["r_min"]:
            continue
        by_k.setdefault(int(row["k"]), {}).setdefault(int(row["n"]), []).append(float(row["r_min"]))
    if not by_k:
        raise UsageError("CSV has no successful rows")
    out = {}
    for k, per_n in sorted(by_k.items()):
        points = [(n, float(np.mean(v))) for n, v in sorted(per_n.items())]
        fit = ftcost.fit_power_law(points)
        out[str(k)] = {"c": fit.c, "alpha": fit.alpha, "residual": fit.residual,
                       "points": [[n, r] for n, r in points],
                       "std": {str(n): float(np.std(v)) for n, v in sorted(per_n.items())}}
    return out


def cmd_fit(args) -> int:
    _json(fit_sweep_csv(Path(args.csv).read_text()), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    g = _graph_from_args(args)
    model = ftcost.CostModel()
    if args.cost_model:
        model = ftcost.load_cost_overrides(args.cost_model, model)
    flags = {}
    if args.no_rus:
        flags["rus_enabled"] = False
    if args.no_mixing:
        flags["mixing_enabled"] = False
    if args.no_weight_trick:
        flags["weight_trick_enabled"] = False
    model = model.with_flags(**flags)
    r = args.r
    if r != "from_fit":
        try:
            r = int(r)
        except ValueError:
            raise UsageError(f"--r must be an integer or 'from_fit', got {r!r}") from None
    disorders = np.random.default_rng(disorder_seed(args.seed)).uniform(-1, 1, g.n)
    rep = ftcost.estimate(g, disorders, args.order, model, r, args.mode, args.epsilon, args.t,
                          exact=args.exact, use_optimizer=not args.no_optimize)
    _json(rep.as_dict(), args.out)
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser, mode=True, order=True) -> None:
    p.add_argument("--seed", type=int, default=0, help="u64 seed")
    p.add_argument("--out", help="output path (default stdout)")
    if mode:
        p.add_argument("--mode", choices=("preft", "ft"), default="preft")
    if order:
        p.add_argument("--order", type=int, choices=(2, 4, 6), default=4)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hamforge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="write a graph as an edge list")
    _common(p, mode=False, order=False)
    p.add_argument("--named")
    p.add_argument("--regular", nargs=2, type=int, metavar=("N", "K"))
    p.add_argument("--repair", action="store_true", help="allow the odd n*k repair path")
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("build", help="build a product-formula circuit")
    _common(p)
    _add_graph_source(p)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--macro", action="store_true", help="keep heis gates unlowered")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("optimize", help="optimize a circuit file")
    _common(p, mode=False, order=False)
    p.add_argument("input")
    p.add_argument("--stats", help="stats JSON path (default stdout)")
    p.add_argument("--verify", action="store_true", help="verify even above 8 qubits")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="dense unitary of a circuit file")
    _common(p, mode=False, order=False)
    p.add_argument("input")
    p.add_argument("--against", help="second circuit to compare with")
    p.add_argument("--matrix", help="save the unitary as .npy")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("find-r", help="minimal r reaching the error target")
    _common(p)
    _add_graph_source(p)
    p.add_argument("--t", type=float)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--budget", type=float, help="error budget (default eps, or eps/2 in ft mode)")
    p.set_defaults(func=cmd_find_r)

    p = sub.add_parser("sweep", help="r_min over random graphs, one CSV row per sample")
    p.add_argument("--config", help="ExperimentConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--mode", choices=("preft", "ft"))
    p.add_argument("--order", type=int, choices=(2, 4, 6))
    p.add_argument("--k", type=int)
    n = p.add_mutually_exclusive_group()
    n.add_argument("--n", type=int, nargs="+", help="explicit list of n")
    n.add_argument("--n-range", type=int, nargs=2, metavar=("LO", "HI"), help="inclusive n range")
    p.add_argument("--t", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--timing", action="store_true",
                   help="record elapsed_ms (makes output run-dependent)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="power-law fit of a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("estimate", help="resource estimate")
    _common(p)
    _add_graph_source(p)
    p.add_argument("--r", default="from_fit")
    p.add_argument("--t", type=float)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--cost-model", help="key=value override file")
    p.add_argument("--no-rus", action="store_true")
    p.add_argument("--no-mixing", action="store_true")
    p.add_argument("--no-weight-trick", action="store_true")
    p.add_argument("--no-optimize", action="store_true")
    p.add_argument("--exact", action="store_true", help="optimize the full circuit")
    p.set_defaults(func=cmd_estimate)
    return ap


_RUNTIME_ERRORS = (GenerationError, SearchFailure, NondeterministicCircuitError, RuntimeError)
_USAGE_ERRORS = (ValueError, LookupError, OSError, TypeError, json.JSONDecodeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"hamforge {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except _USAGE_ERRORS as exc:
        print(f"hamforge {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
