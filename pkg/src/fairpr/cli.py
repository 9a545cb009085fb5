"""Command-line interface.

Every command that writes ``OUT`` also writes ``OUT.manifest.json``
describing how it was produced; ``fairpr replay`` reruns a manifest.
Exit codes: 0 success, 1 I/O or parse error, 2 invalid input or
infeasible specification, 3 iteration cap reached.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from types import SimpleNamespace

import numpy as np

from . import __version__
from ._validation import make_spec
from .graph import GraphFormatError, load_edge_list, load_groups, load_protected, top_degree_protected
from .metrics import evaluate
from .pagerank import DEFAULT_GAMMA, DEFAULT_MAX_ITER, PrConfig, power_iterate
from .postprocess import postprocess, sum_fair_targets, zeroed_counts
from .projection import InfeasibleSpecError, MinFair, constraint_violation
from .solver import FairSolveConfig, solve

log = logging.getLogger("fairpr")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2, 3
MANIFEST_SCHEMA = "fairpr.manifest/1"
SWEEP_SCHEMA = "fairpr.sweep/1"
SWEEP_COLUMNS = ["phi", "method", "tv", "utility_loss_l2", "kendall_tau", "fairness_violation", "iterations", "wall_time"]
DEFAULT_ALPHA_MASS = 0.25
DEFAULT_PROTECTED_FRACTION = 0.01


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# parsing helpers


def _csv_floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def _thread_cap(requested):
    env = os.environ.get("FAIRPR_THREADS")
    cap = None
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise CliError(EXIT_INVALID, f"FAIRPR_THREADS must be an integer, got {env!r}") from None
    if requested is None:
        return cap or 1
    return min(requested, cap) if cap else requested


# ---------------------------------------------------------------------------
# files


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_scores(path, vertex_ids, x):
    """Write ``{vertex: score}`` JSON with 17 significant digits."""
    lines = [f"  {json.dumps(str(v))}: {float(s):.17g}" for v, s in zip(vertex_ids, x)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("{\n" + ",\n".join(lines) + "\n}\n")


def read_scores(path):
    """Return ``(vertex_ids, scores)`` from a score file, in file order."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"{path}: not a score file ({exc.msg})", exc.lineno) from None
    if not isinstance(data, dict) or not data:
        raise GraphFormatError(f"{path}: expected a non-empty JSON object")
    try:
        scores = np.array([float(v) for v in data.values()])
    except (TypeError, ValueError):
        raise GraphFormatError(f"{path}: scores must be numbers") from None
    return list(data), scores


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


class Manifest:
    def __init__(self, args, argv):
        self.data = {
            "schema": MANIFEST_SCHEMA,
            "command": args.command,
            "argv": list(argv),
            "cwd": os.getcwd(),
            "version": __version__,
            "inputs": {},
            "outputs": [],
        }
        self.start = time.perf_counter()

    def add_input(self, name, path):
        if path is None:
            return
        # pipes and other special files cannot be read twice, so they go unhashed
        digest = _sha256(path) if os.path.isfile(path) else None
        entry = {"path": os.fspath(path), "sha256": digest}
        if name in self.data["inputs"]:
            prev = self.data["inputs"][name]
            self.data["inputs"][name] = (prev if isinstance(prev, list) else [prev]) + [entry]
        else:
            self.data["inputs"][name] = entry

    def update(self, **fields):
        self.data.update(fields)

    def write(self, out):
        self.data["wall_time"] = time.perf_counter() - self.start
        self.data["outputs"].append(os.fspath(out))
        _write_json(f"{out}.manifest.json", _json_safe(self.data))


# ---------------------------------------------------------------------------
# shared setup


def _load_graph(args, manifest):
    manifest.add_input("graph", args.graph)
    return load_edge_list(args.graph, directed=args.directed)


def _pr_config(args):
    try:
        return PrConfig(gamma=args.gamma, tol=args.tol, max_iter=args.max_iter)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from None


def _pr_fields(cfg, n):
    res = cfg.resolve(n)
    return {"gamma": res.gamma, "tol": res.tol, "max_iter": res.max_iter, "teleport": "uniform"}


def _load_partition(args, graph, manifest):
    manifest.add_input("groups", args.groups)
    partition = load_groups(args.groups, graph)
    protected_source = "none"
    if getattr(args, "protected", None):
        for p in args.protected:
            manifest.add_input("protected", p)
        partition = load_protected(args.protected, graph, partition)
        protected_source = "file"
    elif getattr(args, "criterion", "sum") in ("min", "sum-min"):
        partition = top_degree_protected(graph, partition, group=0, fraction=DEFAULT_PROTECTED_FRACTION)
        protected_source = f"top-degree:{DEFAULT_PROTECTED_FRACTION:g}"
    manifest.update(
        protected={
            "source": protected_source,
            "sets": {
                str(partition.group_labels[k]): [graph.vertex_ids[i] for i in s]
                for k, s in enumerate(partition.protected_sets)
            },
        }
    )
    return partition


def _default_alpha(partition):
    sizes = [s.size for s in partition.protected_sets]
    return [DEFAULT_ALPHA_MASS / s if s else 0.0 for s in sizes]


def _spec_from_args(args, partition, phi=None):
    phi = args.phi if phi is None else phi
    alpha = args.alpha
    if args.criterion in ("min", "sum-min") and alpha is None:
        alpha = _default_alpha(partition)
    if args.criterion in ("sum", "sum-min") and phi is None:
        raise CliError(EXIT_INVALID, f"--criterion {args.criterion} needs --phi")
    spec = make_spec(args.criterion, phi, alpha)
    spec.validate(partition)
    return spec


def _spec_fields(spec):
    out = {"criterion": {
        "SumFair": "sum", "MinFair": "min", "SumMinFair": "sum-min",
    }[type(spec).__name__]}
    if hasattr(spec, "phi"):
        out["phi"] = list(spec.phi)
    if hasattr(spec, "alpha"):
        out["alpha"] = list(spec.alpha)
    return out


def _metric_phi(spec, partition, baseline):
    if isinstance(spec, MinFair):
        return partition.group_sums(baseline)
    return spec.targets(partition)


def _metrics(baseline, x, spec, partition, precision_at):
    report = evaluate(baseline, x, partition, phi=_metric_phi(spec, partition, baseline), precision_at=precision_at)
    out = report.to_dict()
    out["constraint_violation"] = constraint_violation(x, spec, partition)
    out["group_sums"] = partition.group_sums(x).tolist()
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_pagerank(args, manifest):
    graph = _load_graph(args, manifest)
    cfg = _pr_config(args)
    x, report = power_iterate(graph, cfg)
    write_scores(args.out, graph.vertex_ids, x)
    manifest.update(**_pr_fields(cfg, graph.n), directed=graph.directed, report=report.summary())
    manifest.write(args.out)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_fairrari(args, manifest):
    graph = _load_graph(args, manifest)
    partition = _load_partition(args, graph, manifest)
    cfg = _pr_config(args)
    spec = _spec_from_args(args, partition)
    p_o, base_report = power_iterate(graph, cfg)
    x, report = solve(graph, partition, FairSolveConfig(spec=spec, pr=cfg, n_jobs=_thread_cap(args.threads)))
    write_scores(args.out, graph.vertex_ids, x)
    _write_json(f"{args.out}.metrics.json", _json_safe(_metrics(p_o, x, spec, partition, args.precision_at)))
    manifest.update(
        **_pr_fields(cfg, graph.n),
        directed=graph.directed,
        spec=_spec_fields(spec),
        report=report.summary(),
        baseline_report=base_report.summary(),
    )
    manifest.write(args.out)
    ok = report.converged and base_report.converged
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_postprocess(args, manifest):
    graph = _load_graph(args, manifest)
    partition = _load_partition(args, graph, manifest)
    cfg = _pr_config(args)
    spec = _spec_from_args(args, partition)
    base_report = None
    if args.baseline:
        manifest.add_input("baseline", args.baseline)
        ids, p_o = read_scores(args.baseline)
        if set(ids) != set(graph.vertex_ids) or len(ids) != graph.n:
            raise CliError(EXIT_INVALID, "baseline vertices do not match the graph")
        pos = {v: i for i, v in enumerate(ids)}
        p_o = p_o[[pos[v] for v in graph.vertex_ids]]
    else:
        p_o, base_report = power_iterate(graph, cfg)
    x = postprocess(p_o, spec, partition)
    write_scores(args.out, graph.vertex_ids, x)
    metrics = _metrics(p_o, x, spec, partition, args.precision_at)
    metrics["zeroed"] = dict(zip(map(str, partition.group_labels), zeroed_counts(x, partition)))
    _write_json(f"{args.out}.metrics.json", _json_safe(metrics))
    manifest.update(
        **_pr_fields(cfg, graph.n),
        directed=graph.directed,
        spec=_spec_fields(spec),
        baseline_report=base_report.summary() if base_report else None,
    )
    manifest.write(args.out)
    return EXIT_OK if base_report is None or base_report.converged else EXIT_NOT_CONVERGED


def cmd_evaluate(args, manifest):
    manifest.add_input("baseline", args.baseline)
    manifest.add_input("candidate", args.candidate)
    manifest.add_input("groups", args.groups)
    ids, base = read_scores(args.baseline)
    cids, cand = read_scores(args.candidate)
    if len(cids) != len(ids) or set(cids) != set(ids):
        raise CliError(EXIT_INVALID, "baseline and candidate cover different vertex sets")
    pos = {v: i for i, v in enumerate(cids)}
    cand = cand[[pos[v] for v in ids]]
    # groups are resolved against the baseline's vertex order
    universe = SimpleNamespace(n=len(ids), index={v: i for i, v in enumerate(ids)}, vertex_ids=ids)
    try:
        partition = load_groups(args.groups, universe)
    except GraphFormatError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from None
    try:
        report = evaluate(base, cand, partition, phi=args.phi, precision_at=args.precision_at)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from None
    payload = _json_safe(report.to_dict())
    if args.out:
        _write_json(args.out, payload)
        manifest.write(args.out)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def _phi_grid(start, stop, step):
    if step <= 0:
        raise CliError(EXIT_INVALID, "--phi-step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count <= 0:
        raise CliError(EXIT_INVALID, "empty phi grid")
    # round away accumulated binary error so grid points print cleanly
    return [round(start + i * step, 12) for i in range(count)]


def cmd_sweep(args, manifest):
    if args.criterion == "min":
        raise CliError(EXIT_INVALID, "sweep varies group targets; use --criterion sum or sum-min")
    grid = _phi_grid(args.phi_from, args.phi_to, args.phi_step)
    graph = _load_graph(args, manifest)
    partition = _load_partition(args, graph, manifest)
    cfg = _pr_config(args)
    K = partition.n_groups
    specs = []
    for phi in grid:
        targets = sum_fair_targets(phi, K, split=args.phi_split)
        specs.append(_spec_from_args(args, partition, phi=targets.tolist()))
    p_o, base_report = power_iterate(graph, cfg)
    if not base_report.converged:
        log.warning("baseline PageRank hit the iteration cap")

    def run(job):
        phi, spec, method = job
        start = time.perf_counter()
        if method == "fairrari":
            x, report = solve(graph, partition, FairSolveConfig(spec=spec, pr=cfg))
            iters, converged = report.iterations, report.converged
        else:
            x = postprocess(p_o, spec, partition)
            iters, converged = 0, True
        wall = time.perf_counter() - start
        m = evaluate(p_o, x, partition, phi=spec.targets(partition))
        row = {
            "phi": phi,
            "method": method,
            "tv": m.tv,
            "utility_loss_l2": m.utility_loss_l2,
            "kendall_tau": m.kendall_tau,
            "fairness_violation": m.fairness_violation,
            "iterations": iters,
            "wall_time": wall,
        }
        return row, converged

    jobs = [(phi, spec, method) for phi, spec in zip(grid, specs) for method in args.methods]
    workers = _thread_cap(args.threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    rank = {m: i for i, m in enumerate(args.methods)}
    results.sort(key=lambda r: (r[0]["phi"], rank[r[0]["method"]]))

    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row, _ in results:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
    manifest.update(
        **_pr_fields(cfg, graph.n),
        directed=graph.directed,
        csv_schema=SWEEP_SCHEMA,
        grid=grid,
        phi_split=args.phi_split,
        spec=_spec_fields(specs[0]) | {"phi": "grid"},
        baseline_report=base_report.summary(),
    )
    manifest.write(args.out)
    ok = base_report.converged and all(c for _, c in results)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_replay(args, manifest):
    with open(args.manifest, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"{args.manifest}: not a manifest ({exc.msg})") from None
    if data.get("schema") != MANIFEST_SCHEMA:
        raise CliError(EXIT_INVALID, f"unsupported manifest schema {data.get('schema')!r}")
    prev = os.getcwd()
    os.chdir(data["cwd"])
    try:
        if args.check_inputs:
            for name, entry in data["inputs"].items():
                for e in entry if isinstance(entry, list) else [entry]:
                    if e["sha256"] is not None and _sha256(e["path"]) != e["sha256"]:
                        raise CliError(EXIT_IO, f"input {name} ({e['path']}) changed since the manifest was written")
        return main(data["argv"])
    finally:
        os.chdir(prev)


# ---------------------------------------------------------------------------
# argument parser


def _add_pr_flags(p):
    p.add_argument("--graph", required=True, help="edge list, one 'SRC DST' pair per line")
    p.add_argument("--directed", action="store_true", help="treat each line as a directed arc")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--tol", type=float, default=None, help="l1 stopping threshold (default n*1e-6)")
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULT_MAX_ITER)
    p.add_argument("--out", required=True)


def _add_fair_flags(p, sweep=False):
    p.add_argument("--groups", required=True, help="'VERTEX GROUP' lines")
    p.add_argument("--criterion", choices=["sum", "min", "sum-min"], default="sum")
    if not sweep:
        p.add_argument("--phi", type=_csv_floats, default=None, help="group targets, e.g. 0.6,0.4")
    p.add_argument("--alpha", type=_csv_floats, default=None, help="per-group floors (default 0.25/|A|)")
    p.add_argument("--protected", action="append", default=None, help="protected vertices, one per line; repeatable")
    p.add_argument("--threads", type=_positive_int, default=None)
    if not sweep:
        p.add_argument("--precision-at", type=_csv_floats, default=[], help="percents for phi-precision")


def build_parser():
    parser = argparse.ArgumentParser(prog="fairpr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fairpr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pagerank", help="plain PageRank")
    _add_pr_flags(p)
    p.set_defaults(func=cmd_pagerank)

    p = sub.add_parser("fairrari", help="fair PageRank by projected iteration")
    _add_pr_flags(p)
    _add_fair_flags(p)
    p.set_defaults(func=cmd_fairrari)

    p = sub.add_parser("postprocess", help="project a PageRank vector onto the fairness set")
    _add_pr_flags(p)
    _add_fair_flags(p)
    p.add_argument("--baseline", default=None, help="score file to project instead of computing PageRank")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("evaluate", help="compare two score files")
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--phi", type=_csv_floats, default=None, help="targets (default: baseline group shares)")
    p.add_argument("--precision-at", type=_csv_floats, default=[])
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="trade-off table over a grid of targets")
    _add_pr_flags(p)
    _add_fair_flags(p, sweep=True)
    p.add_argument("--phi-from", type=float, required=True)
    p.add_argument("--phi-to", type=float, required=True)
    p.add_argument("--phi-step", type=float, required=True)
    p.add_argument("--phi-split", choices=["equal-rest"], default="equal-rest")
    p.add_argument(
        "--methods",
        type=lambda s: [m for m in s.split(",") if m],
        default=["fairrari", "postprocess"],
        help="comma separated subset of fairrari,postprocess",
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--check-inputs", action="store_true", help="fail if an input file changed")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="fairpr: %(message)s")
    if getattr(args, "methods", None) is not None:
        bad = set(args.methods) - {"fairrari", "postprocess"}
        if bad or not args.methods:
            parser.error(f"unknown methods: {', '.join(sorted(bad)) or '(none)'}")
    manifest = Manifest(args, argv)
    try:
        code = args.func(args, manifest)
    except CliError as exc:
        print(f"fairpr: error: {exc}", file=sys.stderr)
        return exc.code
    except InfeasibleSpecError as exc:
        print(f"fairpr: error: infeasible specification ({exc.check}): {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, GraphFormatError) as exc:
        print(f"fairpr: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"fairpr: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if code == EXIT_NOT_CONVERGED:
        print("fairpr: warning: iteration cap reached before convergence", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
