"""Command-line entry point: ``modquery {generate,index,query,evaluate}``.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 file format, 5 precondition,
6 non-convergence.  Seeds come from ``--seed``, else ``MODQUERY_SEED``,
else 0.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict

from . import __version__
from ._io import atomic_write
from .ensemble import AUTO, IndexBuildConfig, build_index, load_index, save_index
from .errors import ConvergenceError, FormatError, PreconditionError
from .evaluation import EvalConfig, evaluate_network, results_csv, roc_csv, summary_csv
from .graph import largest_connected_component, load_edge_list, load_label_set, write_edge_list, write_label_set
from .lfr import LfrConfig, LfrError, generate
from .louvain import LouvainConfig
from .query import expansion_scores, rank_query, resolve_seeds, seed_cohesion
from .rwr import ORIENTATIONS, RwrConfig, rwr_rank, rwr_scores

log = logging.getLogger("modquery")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FORMAT, EXIT_PRECONDITION, EXIT_CONVERGENCE = 0, 2, 3, 4, 5, 6
SEED_ENV = "MODQUERY_SEED"


class UsageError(Exception):
    pass


def resolve_seed(flag):
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return _seed_value(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{SEED_ENV}: {exc}") from None


def _seed_value(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _p_cut(text):
    if text == AUTO:
        return AUTO
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a probability or 'auto', got {text!r}") from None


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text):
    return tuple(x for x in text.split(",") if x)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def write_manifest(path, command, argv, config, seed, inputs, timings, **extra):
    doc = {
        "subcommand": command,
        "argv": list(argv),
        "tool_version": __version__,
        "python": platform.python_version(),
        "master_seed": seed,
        "config": config,
        "inputs": {os.fspath(p): file_digest(p) for p in inputs},
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
        **extra,
    }
    atomic_write(path, (json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n").encode())


class _Timer:
    def __init__(self):
        self.t = {}

    def __call__(self, name):
        timer = self

        class _Span:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                timer.t[name] = time.perf_counter() - self.start

        return _Span()


def _load_graph(path):
    g = load_edge_list(path)
    h = largest_connected_component(g)
    if h.n < g.n:
        log.info("using largest connected component: %d of %d vertices", h.n, g.n)
    return h


def cmd_generate(args, argv):
    timer = _Timer()
    cfg = LfrConfig(n=args.n, avg_degree=args.avg_degree, max_degree=args.max_degree,
                    tau_degree=args.tau_degree, tau_community=args.tau_community,
                    min_community=args.min_community, max_community=args.max_community,
                    mixing=args.mixing, overlap_fraction=args.overlap_fraction,
                    memberships_per_overlap=args.memberships_per_overlap,
                    rng_seed=resolve_seed(args.seed), take_lcc=not args.keep_all)
    with timer("generate"):
        net = generate(cfg)
    prefix = args.out_prefix
    with timer("write"):
        write_edge_list(net.graph, prefix + ".edges", node_table=False)
        write_label_set(net.truth, net.graph, prefix + ".labels")
    man = net.manifest()
    write_manifest(prefix + ".manifest.json", "generate", argv, man["config"], cfg.rng_seed, [],
                   timer.t, network={k: v for k, v in man.items() if k != "config"},
                   outputs=[prefix + ".edges", prefix + ".labels"])
    print(f"n={net.graph.n} m={net.graph.m} communities={len(net.truth)} "
          f"realized_mixing={net.realized_mixing:.4f}")
    return EXIT_OK


def _index_config(args, seed):
    return IndexBuildConfig(num_partitions=args.partitions, p_cut=args.p_cut, master_seed=seed,
                            louvain=LouvainConfig(min_delta_q=args.min_delta_q),
                            workers=args.workers)


def cmd_index(args, argv):
    timer = _Timer()
    seed = resolve_seed(args.seed)
    cfg = _index_config(args, seed)
    with timer("load"):
        g = _load_graph(args.edges)
    with timer("build"):
        idx = build_index(g, cfg)
    with timer("save"):
        save_index(idx, args.out)
    config = asdict(cfg)
    config["p_cut_resolved"] = idx.p_cut
    write_manifest(args.out + ".manifest.json", "index", argv, config, seed, [args.edges], timer.t,
                   graph={"n": g.n, "m": g.m, "fingerprint": f"{idx.fingerprint:016x}"},
                   mean_q=float(idx.q_values.mean()))
    print(f"n={g.n} m={g.m} P={idx.num_partitions} p_cut={idx.p_cut:.4f} "
          f"mean_Q={idx.q_values.mean():.6f}")
    return EXIT_OK


def cmd_query(args, argv):
    timer = _Timer()
    names = _str_list(args.seeds)
    if not names:
        raise UsageError("--seeds needs at least one vertex id")
    if args.method == "rwr" and not args.graph:
        raise UsageError("--method rwr needs --graph")
    inputs = [args.index]
    g = None
    with timer("load"):
        if args.graph:
            g = _load_graph(args.graph)
            inputs.append(args.graph)
        idx = load_index(args.index, g)
    seeds = resolve_seeds(idx.ids, names)
    extra = {"seeds": list(names)}
    with timer("score"):
        if args.method == "expansion":
            res = expansion_scores(idx, seeds)
            ranked = rank_query(res, args.include_seeds, args.top_k)
            cohesion = seed_cohesion(res)
            column = "mu"
            config = {"method": "expansion"}
            if cohesion is not None:
                print(f"seed_cohesion={cohesion!r}", file=sys.stderr)
            extra["seed_cohesion"] = cohesion
        else:
            rcfg = RwrConfig(alpha=args.alpha, orientation=args.orientation)
            res = rwr_scores(g, seeds, rcfg)
            ranked = rwr_rank(res, args.include_seeds, args.top_k)
            column = "p"
            config = {"method": "rwr", **asdict(rcfg)}
            extra["rwr"] = {"iterations": res.iterations, "residual": res.residual}
    seed_names = {idx.ids[i] for i in seeds}
    lines = [f"vertex,{column},is_seed"]
    lines += [f"{v},{s!r},{int(v in seed_names)}" for v, s in ranked]
    text = "\n".join(lines) + "\n"
    config.update(top_k=args.top_k, include_seeds=args.include_seeds)
    if args.out:
        atomic_write(args.out, text.encode())
    else:
        sys.stdout.write(text)
    manifest = args.manifest or ((args.out or os.fspath(args.index) + ".query") + ".manifest.json")
    write_manifest(manifest, "query", argv, config, idx.master_seed, inputs, timer.t, **extra)
    return EXIT_OK


def cmd_evaluate(args, argv):
    timer = _Timer()
    seed = resolve_seed(args.seed)
    inputs = [args.edges, args.labels]
    with timer("load"):
        g = _load_graph(args.edges)
        labels = load_label_set(args.labels, g, min_size=args.min_size)
    log.info("%d communities retained (%d excluded below size %d)",
             len(labels), labels.excluded, args.min_size)
    methods = args.methods
    idx = None
    config = {}
    if "expansion" in methods:
        if args.index:
            with timer("load_index"):
                idx = load_index(args.index, g)
            inputs.append(args.index)
        else:
            icfg = _index_config(args, seed)
            with timer("build_index"):
                idx = build_index(g, icfg)
            config["index"] = asdict(icfg)
            config["index"]["p_cut_resolved"] = idx.p_cut
    ecfg = EvalConfig(seed_sizes=args.seed_sizes, max_subsets=args.max_subsets, rng_seed=seed,
                      methods=methods, rwr=RwrConfig(alpha=args.alpha, orientation=args.orientation),
                      workers=args.workers)
    config["evaluation"] = asdict(ecfg)
    with timer("evaluate"):
        report = evaluate_network(g, idx, labels, ecfg)
    prefix = args.out_prefix
    name = args.network or os.path.splitext(os.path.basename(args.edges))[0]
    atomic_write(prefix + ".results.csv", results_csv(report, name).encode())
    atomic_write(prefix + ".summary.csv", summary_csv(report, name).encode())
    atomic_write(prefix + ".roc.csv", roc_csv(report).encode())
    summary = {f"{m}/{s}": {"mean_auc": sm.mean_auc, "std_auc": sm.std_auc, "n_trials": sm.n_trials}
               for (m, s), sm in report.summaries.items()}
    write_manifest(prefix + ".manifest.json", "evaluate", argv, config, seed, inputs, timer.t,
                   summary=summary, skipped=[list(x) for x in report.skipped],
                   communities=len(labels))
    for (m, s), sm in sorted(report.summaries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"{m} s={s} mean_auc={sm.mean_auc:.4f} std={sm.std_auc:.4f} trials={sm.n_trials}")
    return EXIT_OK


def _add_index_flags(p, partitions):
    p.add_argument("--partitions", type=int, default=partitions, help=f"ensemble size (default {partitions})")
    p.add_argument("--p-cut", type=_p_cut, default=0.5,
                   help="edge cut probability for start partitions (default 0.5), or 'auto'")
    p.add_argument("--min-delta-q", type=float, default=1e-9)


def _add_rwr_flags(p):
    p.add_argument("--alpha", type=float, default=0.25, help="restart probability")
    p.add_argument("--orientation", choices=ORIENTATIONS, default="mass_conserving")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modquery", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write an LFR-style benchmark network")
    p.add_argument("out_prefix")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--avg-degree", type=float, default=20.0)
    p.add_argument("--max-degree", type=int, default=50)
    p.add_argument("--tau-degree", type=float, default=2.0)
    p.add_argument("--tau-community", type=float, default=1.0)
    p.add_argument("--min-community", type=int, default=10)
    p.add_argument("--max-community", type=int, default=100)
    p.add_argument("--mixing", type=float, default=0.3)
    p.add_argument("--overlap-fraction", type=float, default=0.0)
    p.add_argument("--memberships-per-overlap", type=int, default=4)
    p.add_argument("--keep-all", action="store_true", help="do not restrict to the largest component")
    p.add_argument("--seed", type=_seed_value)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("index", help="build a partition ensemble index")
    p.add_argument("edges")
    p.add_argument("out")
    _add_index_flags(p, 2000)
    p.add_argument("--seed", type=_seed_value)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="rank vertices against a seed set")
    p.add_argument("index")
    p.add_argument("--seeds", required=True, help="comma-separated vertex ids")
    p.add_argument("--method", choices=("expansion", "rwr"), default="expansion")
    p.add_argument("--graph", help="edge list the index was built from (required for rwr)")
    p.add_argument("--top-k", type=int)
    p.add_argument("--include-seeds", action="store_true")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--manifest", help="manifest path")
    _add_rwr_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", help="cross-validate both methods against labelled communities")
    p.add_argument("edges")
    p.add_argument("labels")
    p.add_argument("out_prefix")
    p.add_argument("--index", help="prebuilt index (otherwise one is built)")
    _add_index_flags(p, 200)
    p.add_argument("--seed-sizes", type=_int_list, default=(3, 7, 15))
    p.add_argument("--max-subsets", type=int, default=120)
    p.add_argument("--methods", type=_str_list, default=("expansion", "rwr"))
    p.add_argument("--min-size", type=int, default=3)
    p.add_argument("--network", help="name used in the CSV network column")
    p.add_argument("--seed", type=_seed_value)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    _add_rwr_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"modquery: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"modquery: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FormatError as exc:
        print(f"modquery: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (PreconditionError, LfrError) as exc:
        print(f"modquery: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"modquery: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"modquery: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
