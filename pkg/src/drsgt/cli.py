"""Command-line entry point.

Subcommands: run, sweep, validate-graph, inspect-instance, replicate-figure.
Exit codes: 0 success, 2 configuration/topology error, 3 engine fault.
The default output directory is taken from $DRSGT_OUTPUT_DIR when set.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import ConfigError, EngineFault, TopologyError
from .experiment import (
    ExperimentConfig,
    parse_overrides,
    replicate_figure,
    run_experiment,
    run_sweep,
    summary_mapping,
    write_manifest,
    SWEEP_AXES,
)
from .network import build_topology, spectral_diagnostics
from .oracles import estimate_sigma, instance_bounds, load_instance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3


def _default_out(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("DRSGT_OUTPUT_DIR")
    return Path(env) if env else Path.cwd()


def _load_config(path: str, extra: list[str]) -> ExperimentConfig:
    cfg_path = Path(path)
    if not cfg_path.exists():
        raise ConfigError([f"config file not found: {cfg_path}"])
    config = ExperimentConfig.from_file(cfg_path)
    if extra:
        config.apply_overrides(parse_overrides(extra))
    config.validate()
    return config


def cmd_run(args, extra: list[str]) -> int:
    config = _load_config(args.config, extra)
    out_dir = _default_out(args.out)
    result = run_experiment(config, out_dir=out_dir, target_eps=args.target_eps)
    record = {
        "id": Path(args.config).stem,
        "csv": str(result.csv_path.name),
        "status": "ok",
        "config": config.to_mapping(),
        "summary": summary_mapping(result.summary),
    }
    write_manifest(result.csv_path.with_suffix(".manifest.jsonl"), [record])
    print(f"wrote {result.rows_written} rows to {result.csv_path}")
    s = result.summary
    print(
        f"iterations={s.iterations} samples={s.total_samples} "
        f"comm_rounds={s.comm_rounds} min_grad_norm={s.min_grad_norm}"
    )
    if args.target_eps is not None:
        if s.stopped_early:
            print(
                f"target grad_norm^2 <= {args.target_eps:g} reached at "
                f"iteration {s.iterations}: samples={s.total_samples} "
                f"comm_rounds={s.comm_rounds}"
            )
        else:
            print(f"target grad_norm^2 <= {args.target_eps:g} not reached")
    return EXIT_OK


def cmd_sweep(args, extra: list[str]) -> int:
    config = _load_config(args.config, extra)
    values = [v for v in (x.strip() for x in args.values.split(",")) if v]
    manifest, records = run_sweep(
        config, args.axis, values, _default_out(args.out), jobs=args.jobs
    )
    failed = [r for r in records if r["status"] != "ok"]
    print(f"{len(records) - len(failed)}/{len(records)} runs ok; manifest: {manifest}")
    for r in failed:
        print(f"  failed: {r['id']}: {r['error']}", file=sys.stderr)
    return EXIT_OK


def cmd_validate_graph(args, extra: list[str]) -> int:
    if extra:
        raise ConfigError([f"unexpected argument {extra[0]!r}"])
    if args.kind == "explicit":
        edges = []
        path = Path(args.n_or_file)
        if not path.exists():
            raise ConfigError([f"edge file not found: {path}"])
        max_node = 0
        for line in path.read_text().splitlines():
            text = line.split("#", 1)[0].split()
            if text:
                i, j = int(text[0]), int(text[1])
                edges.append((i, j))
                max_node = max(max_node, i, j)
        net = build_topology("explicit", max_node + 1, edges=edges)
    else:
        kind = "erdos_renyi" if args.kind == "erdos" else args.kind
        net = build_topology(kind, int(args.n_or_file), p=args.p, seed=args.seed)
    diag = spectral_diagnostics(net, args.t)
    print(f"agents={net.n_agents} edges={net.n_edges}")
    print(f"sigma2={diag.sigma2:.12g}")
    print(f"L_t={diag.l_t:.12g} (t={args.t})")
    print(f"t_min={diag.t_min}")
    if args.t >= diag.t_min:
        print(f"t={args.t} meets the multi-step consensus bound: ok")
    else:
        print(f"warning: t={args.t} is below the theoretical bound t_min={diag.t_min}")
    return EXIT_OK


def cmd_inspect_instance(args, extra: list[str]) -> int:
    path = Path(args.source)
    if path.suffix == ".bin" and path.exists():
        problem = load_instance(path)
    else:
        config = _load_config(args.source, extra)
        from .experiment import build_problem

        problem = build_problem(config)
    bounds = instance_bounds(problem)
    print(f"agents={problem.n_agents} n={problem.n} r={problem.r}")
    print(f"rows per agent: {[problem.m(i) for i in range(problem.n_agents)]}")
    print(f"f_star={problem.f_star:.12g}")
    top = ", ".join(f"{v:.6g}" for v in problem.eigvals[: problem.r + 2])
    print(f"top eigenvalues: {top}")
    print(f"sample_norm_bound={bounds.sample_norm:.6g}")
    print(f"lipschitz_fun={bounds.lipschitz_fun:.6g} lipschitz_grad={bounds.lipschitz_grad:.6g}")
    print(f"tracker_bound={bounds.tracker_bound:.6g}")
    sigma = estimate_sigma(problem, n_draws=args.sigma_draws)
    print(f"sigma_hat={sigma:.6g} (empirical single-sample noise, {args.sigma_draws} draws)")
    return EXIT_OK


def cmd_replicate_figure(args, extra: list[str]) -> int:
    overrides = parse_overrides(extra) if extra else None
    out_dir = _default_out(args.out) / args.figure
    manifest, records = replicate_figure(args.figure, out_dir, overrides=overrides)
    for record in records:
        status = record["status"]
        print(f"{record['id']}: {status} ({record['csv']})")
        if status != "ok":
            print(f"  {record['error']}", file=sys.stderr)
    print(f"manifest: {manifest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drsgt",
        description="Decentralized Riemannian gradient tracking experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config", help="path to a key = value config file")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument(
        "--target-eps", type=float, default=None,
        help="stop at the first iteration with exact grad_norm^2 <= EPS",
    )
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a one-axis sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_graph = sub.add_parser("validate-graph", help="print spectral diagnostics of a topology")
    p_graph.add_argument("kind", choices=("ring", "complete", "star", "erdos", "explicit"))
    p_graph.add_argument("n_or_file", help="number of agents, or an edge file for 'explicit'")
    p_graph.add_argument("--t", type=int, default=1)
    p_graph.add_argument("--p", type=float, default=None, help="edge probability for erdos")
    p_graph.add_argument("--seed", type=int, default=0)
    p_graph.set_defaults(fn=cmd_validate_graph)

    p_inspect = sub.add_parser("inspect-instance", help="summarize a problem instance")
    p_inspect.add_argument("source", help="config file or .bin instance cache")
    p_inspect.add_argument("--sigma-draws", type=int, default=500)
    p_inspect.set_defaults(fn=cmd_inspect_instance)

    p_fig = sub.add_parser("replicate-figure", help="run a built-in figure protocol")
    p_fig.add_argument("figure", help="fig1 | fig2 | fig5")
    p_fig.add_argument("--out", default=None)
    p_fig.set_defaults(fn=cmd_replicate_figure)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.fn(args, extra)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"error: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except (TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineFault as exc:
        print(f"engine fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
