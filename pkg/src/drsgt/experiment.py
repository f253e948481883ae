"""Experiment harness: metrics, configuration, runs, sweeps, CSV persistence.

Per-iteration metrics are computed at the induced arithmetic mean of the
agent iterates using exact (full-data) gradients, so the reported gradient
norm is the deterministic quantity of interest rather than a noisy
estimate; metrics never consume oracle samples or random numbers.

CSV schema (version 1): a ``# schema=1`` comment line, then the header

    k,f_gap,grad_norm,consensus,ds,samples_cum,comm_rounds_cum,wall_ms

with floats written at 17 significant digits for bitwise replay fidelity.
By default ``wall_ms`` is written as 0 so that identical configurations and
seeds produce identical file digests; set ``timing = on`` to record real
wall-clock milliseconds (which breaks bitwise reproducibility).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .engine import AlgoConfig, EngineBase, build_engine
from .errors import ConfigError, DegenerateMeanError
from .network import NetworkSpec, build_topology
from .oracles import (
    PcaProblem,
    SampleSchedule,
    generate_pca_instance,
    load_instance,
    make_oracle,
    save_instance,
)
from .stiefel import StiefelPoint, induced_arithmetic_mean, procrustes_distance

SCHEMA_VERSION = 1
CSV_COLUMNS = ("k", "f_gap", "grad_norm", "consensus", "ds",
               "samples_cum", "comm_rounds_cum", "wall_ms")
CSV_HEADER = ",".join(CSV_COLUMNS)


@dataclass(frozen=True)
class MetricsRow:
    """One measurement of a run, taken at the induced arithmetic mean."""

    k: int
    f_gap: float
    grad_norm: float
    consensus: float
    ds: float
    samples_cum: int
    comm_rounds_cum: int
    wall_ms: int = 0

    def to_csv(self) -> str:
        return ",".join(
            [
                str(self.k),
                f"{self.f_gap:.17g}",
                f"{self.grad_norm:.17g}",
                f"{self.consensus:.17g}",
                f"{self.ds:.17g}",
                str(self.samples_cum),
                str(self.comm_rounds_cum),
                str(self.wall_ms),
            ]
        )


def compute_metrics(
    problem: PcaProblem,
    points: list[StiefelPoint],
    k: int,
    samples_cum: int,
    comm_rounds_cum: int,
    wall_ms: int = 0,
) -> MetricsRow:
    """Evaluate the four convergence metrics at the cluster mean.

    Raises:
        DegenerateMeanError: when the cluster mean is rank deficient (callers
            record a sentinel row and continue).
    """
    xhat = induced_arithmetic_mean(points)
    f_gap = problem.objective(xhat) - problem.f_star
    grad_norm = problem.riemannian_gradient(xhat).norm
    consensus = math.sqrt(
        sum(float(np.linalg.norm(p.data - xhat.data) ** 2) for p in points)
    )
    ds = procrustes_distance(xhat, problem.x_star)
    return MetricsRow(
        k=k,
        f_gap=f_gap,
        grad_norm=grad_norm,
        consensus=consensus,
        ds=ds,
        samples_cum=samples_cum,
        comm_rounds_cum=comm_rounds_cum,
        wall_ms=wall_ms,
    )


def sentinel_row(k: int, samples_cum: int, comm_rounds_cum: int, wall_ms: int = 0) -> MetricsRow:
    nan = float("nan")
    return MetricsRow(k, nan, nan, nan, nan, samples_cum, comm_rounds_cum, wall_ms)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_TOPOLOGIES = ("ring", "complete", "star")


@dataclass
class ExperimentConfig:
    """Flat experiment description; mirrors the key = value config file."""

    n_agents: int = 4
    m_per_agent: int = 2500
    n: int = 8
    r: int = 3
    eigengap: float = 0.8
    instance_seed: int = 0
    topology: str = "ring"  # ring | complete | star | erdos:<p> | explicit:<edgefile>
    graph_seed: int = 0
    t: int = 1
    algorithm: str = "drsgt"  # drsgt | drsgd
    alpha: float = 1.0
    beta: float = 0.1
    beta_decay: float = 0.5
    schedule: str = "polynomial:1"
    oracle: str = "sampling"  # sampling | exact | synthetic:<sigma>
    max_iters: int = 1000
    log_every: int = 1
    seed: int = 0
    audit_every: int = 50
    init: str = "common"
    output: str = "run.csv"
    timing: bool = False
    cache: str = ""

    _INT_FIELDS = {"n_agents", "m_per_agent", "n", "r", "instance_seed", "graph_seed",
                   "t", "max_iters", "log_every", "seed", "audit_every"}
    _FLOAT_FIELDS = {"eigengap", "alpha", "beta", "beta_decay"}
    _BOOL_FIELDS = {"timing"}

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        cfg = cls()
        cfg.apply_overrides(mapping)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(parse_config_file(path))

    def apply_overrides(self, mapping: dict) -> None:
        errors = []
        known = set(self.field_names())
        for key, raw in mapping.items():
            if key not in known:
                errors.append(f"{key}: unknown configuration key")
                continue
            try:
                setattr(self, key, self._coerce(key, raw))
            except (TypeError, ValueError) as exc:
                errors.append(f"{key}: {exc}")
        if errors:
            raise ConfigError(errors)

    def _coerce(self, key: str, raw):
        if isinstance(raw, str):
            raw = raw.strip()
        if key in self._INT_FIELDS:
            return int(raw)
        if key in self._FLOAT_FIELDS:
            return float(raw)
        if key in self._BOOL_FIELDS:
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("on", "true", "1", "yes"):
                return True
            if str(raw).lower() in ("off", "false", "0", "no"):
                return False
            raise ValueError(f"expected on/off, got {raw!r}")
        return str(raw)

    def to_mapping(self) -> dict:
        out = {}
        for name in self.field_names():
            value = getattr(self, name)
            out[name] = value if isinstance(value, (int, float, bool)) else str(value)
        return out

    def validate(self) -> None:
        errors = []
        if self.n_agents < 1:
            errors.append("n_agents: must be >= 1")
        if self.m_per_agent < 1:
            errors.append("m_per_agent: must be >= 1")
        if not 0 < self.r < self.n:
            errors.append(f"r: need 0 < r < n, got r={self.r}, n={self.n}")
        if not 0.0 < self.eigengap <= 1.0:
            errors.append(f"eigengap: must lie in (0, 1], got {self.eigengap}")
        kind = self.topology.split(":", 1)[0]
        if kind not in _TOPOLOGIES + ("erdos", "explicit"):
            errors.append(f"topology: unknown kind {self.topology!r}")
        if self.t < 1:
            errors.append(f"t: must be >= 1, got {self.t}")
        if self.algorithm not in ("drsgt", "drsgd"):
            errors.append(f"algorithm: must be drsgt or drsgd, got {self.algorithm!r}")
        if self.alpha <= 0:
            errors.append("alpha: must be positive")
        if self.beta <= 0:
            errors.append("beta: must be positive")
        try:
            SampleSchedule.parse(self.schedule)
        except ValueError as exc:
            errors.append(f"schedule: {exc}")
        okind = self.oracle.split(":", 1)[0]
        if okind not in ("sampling", "exact", "synthetic"):
            errors.append(f"oracle: unknown kind {self.oracle!r}")
        if self.max_iters < 0:
            errors.append("max_iters: must be >= 0")
        if self.log_every < 1:
            errors.append("log_every: must be >= 1")
        if self.audit_every < 1:
            errors.append("audit_every: must be >= 1")
        if self.init not in ("common", "independent"):
            errors.append(f"init: must be common or independent, got {self.init!r}")
        if not self.output:
            errors.append("output: must be a nonempty path")
        if errors:
            raise ConfigError(errors)


def parse_config_file(path) -> dict:
    """Parse the flat `key = value` config grammar ('#' starts a comment)."""
    path = Path(path)
    mapping: dict[str, str] = {}
    errors = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            errors.append(f"{path.name}:{lineno}: expected 'key = value', got {line.strip()!r}")
            continue
        key, value = text.split("=", 1)
        mapping[key.strip()] = value.strip()
    if errors:
        raise ConfigError(errors)
    return mapping


def parse_overrides(pairs: list[str]) -> dict:
    """Parse CLI overrides of the form --key=value."""
    mapping = {}
    errors = []
    for pair in pairs:
        if not pair.startswith("--") or "=" not in pair:
            errors.append(f"override {pair!r} must look like --key=value")
            continue
        key, value = pair[2:].split("=", 1)
        mapping[key.strip()] = value.strip()
    if errors:
        raise ConfigError(errors)
    return mapping


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def build_problem(config: ExperimentConfig) -> PcaProblem:
    if config.cache and Path(config.cache).exists():
        return load_instance(config.cache)
    problem = generate_pca_instance(
        config.n_agents, config.m_per_agent, config.n, config.r,
        config.eigengap, config.instance_seed,
    )
    if config.cache:
        save_instance(problem, config.cache)
    return problem


def build_network(config: ExperimentConfig) -> NetworkSpec:
    kind, _, arg = config.topology.partition(":")
    if kind == "erdos":
        return build_topology("erdos_renyi", config.n_agents,
                              p=float(arg), seed=config.graph_seed)
    if kind == "explicit":
        edges = []
        for line in Path(arg).read_text().splitlines():
            text = line.split("#", 1)[0].split()
            if text:
                edges.append((int(text[0]), int(text[1])))
        return build_topology("explicit", config.n_agents, edges=edges)
    return build_topology(kind, config.n_agents)


def algo_config(config: ExperimentConfig) -> AlgoConfig:
    return AlgoConfig(
        alpha=config.alpha,
        beta=config.beta,
        t=config.t,
        schedule=SampleSchedule.parse(config.schedule),
        max_iters=config.max_iters,
        seed=config.seed,
        audit_every=config.audit_every,
        init=config.init,
        beta_decay=config.beta_decay,
    )


def make_engine(config: ExperimentConfig, problem: PcaProblem | None = None,
                net: NetworkSpec | None = None) -> EngineBase:
    problem = problem if problem is not None else build_problem(config)
    net = net if net is not None else build_network(config)
    oracle = make_oracle(problem, config.oracle)
    return build_engine(config.algorithm, problem, net, algo_config(config), oracle=oracle)


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    csv_path: Path
    rows_written: int
    summary: object
    final_row: MetricsRow | None


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    problem: PcaProblem | None = None,
    net: NetworkSpec | None = None,
    target_eps: float | None = None,
) -> RunResult:
    """Run one experiment, streaming metrics rows to the configured CSV."""
    config.validate()
    out_dir = Path(out_dir) if out_dir is not None else Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = Path(config.output)
    if not csv_path.is_absolute():
        csv_path = out_dir / csv_path

    engine = make_engine(config, problem=problem, net=net)
    t0 = time.monotonic()
    rows = 0
    last_row: MetricsRow | None = None

    def metrics_fn(eng: EngineBase) -> MetricsRow:
        wall = int(1000 * (time.monotonic() - t0)) if config.timing else 0
        try:
            return compute_metrics(
                eng.problem, eng.points(), eng.k, eng.total_samples, eng.comm_rounds, wall
            )
        except DegenerateMeanError:
            return sentinel_row(eng.k, eng.total_samples, eng.comm_rounds, wall)

    stop_when = None
    if target_eps is not None:
        stop_when = lambda row: (not math.isnan(row.grad_norm)) and row.grad_norm**2 <= target_eps

    with open(csv_path, "w") as fh:
        fh.write(f"# schema={SCHEMA_VERSION}\n")
        fh.write(CSV_HEADER + "\n")

        def sink(row: MetricsRow) -> None:
            nonlocal rows, last_row
            fh.write(row.to_csv() + "\n")
            rows += 1
            last_row = row

        summary = engine.run(
            max_iters=config.max_iters,
            metrics_fn=metrics_fn,
            sink=sink,
            log_every=config.log_every,
            stop_when=stop_when,
        )

    return RunResult(csv_path=csv_path, rows_written=rows, summary=summary, final_row=last_row)


def summary_mapping(summary) -> dict:
    return {
        "algorithm": summary.algorithm,
        "iterations": summary.iterations,
        "total_samples": int(summary.total_samples),
        "comm_rounds": int(summary.comm_rounds),
        "min_grad_norm": summary.min_grad_norm,
        "min_grad_norm_sq": summary.min_grad_norm_sq,
        "max_tracker_norm": summary.max_tracker_norm,
        "region_violations": summary.region_violations,
        "stopped_early": summary.stopped_early,
    }


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SWEEP_AXES = ("schedule", "beta", "topology", "seed")


def _sweep_run(args) -> dict:
    mapping, out_dir = args
    mapping = dict(mapping)
    record: dict = {"id": mapping.pop("_run_id")}
    try:
        config = ExperimentConfig.from_mapping(mapping)
        record["csv"] = config.output
        record["config"] = config.to_mapping()
        result = run_experiment(config, out_dir=out_dir)
        record["status"] = "ok"
        record["summary"] = summary_mapping(result.summary)
    except Exception as exc:  # partial failures recorded, sweep continues
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
    return record


def run_sweep(
    base: ExperimentConfig,
    axis: str,
    values: list,
    out_dir,
    jobs: int = 1,
    manifest_name: str = "manifest.jsonl",
):
    """Cross-product runs over one axis, all sharing a cached instance.

    Returns (manifest_path, records).  Failures of individual runs are
    recorded in the manifest with status "failed" and do not stop the sweep.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError([f"axis: must be one of {SWEEP_AXES}, got {axis!r}"])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    base.validate()
    if not base.cache:
        base = replace(base, cache=str(out_dir / "instance.bin"))
    build_problem(base)  # materialize the shared cache once

    tasks = []
    for value in values:
        run_id = f"{axis}={value}"
        mapping = base.to_mapping()
        mapping[axis] = value
        mapping["output"] = _safe_name(run_id) + ".csv"
        mapping["_run_id"] = run_id
        tasks.append((mapping, str(out_dir)))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_sweep_run, tasks))
    else:
        records = [_sweep_run(t) for t in tasks]

    manifest_path = out_dir / manifest_name
    write_manifest(manifest_path, records)
    return manifest_path, records


def _safe_name(run_id: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in run_id)


def write_manifest(path, records: list[dict]) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for record in records:
            clean = {k: v for k, v in record.items() if not k.startswith("_")}
            fh.write(json.dumps(clean, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Figure replication protocols
# ---------------------------------------------------------------------------


def figure_protocol(fig_id: str) -> list[tuple[str, ExperimentConfig]]:
    """Built-in run protocols replicating the benchmark figures.

    fig1: tracking vs baseline on the reference instance (ring of 4 agents,
          t=1, alpha=1, beta=0.1, batch schedule k+1, 1000 iterations).
    fig2: three geometric batch schedules (0.85, 0.9, 0.95), ring graph.
    fig5: constant 1 vs k+1 vs geometric 0.9 schedules, ring graph.
    """
    base = ExperimentConfig()  # defaults already match the reference instance
    if fig_id == "fig1":
        runs = [
            ("drsgt", {"algorithm": "drsgt", "schedule": "polynomial:1"}),
            ("drsgd", {"algorithm": "drsgd"}),
        ]
    elif fig_id == "fig2":
        runs = [
            (f"geometric_{q}", {"algorithm": "drsgt", "schedule": f"geometric:{q}"})
            for q in ("0.85", "0.9", "0.95")
        ]
    elif fig_id == "fig5":
        runs = [
            ("constant_1", {"algorithm": "drsgt", "schedule": "constant:1"}),
            ("polynomial_1", {"algorithm": "drsgt", "schedule": "polynomial:1"}),
            ("geometric_0.9", {"algorithm": "drsgt", "schedule": "geometric:0.9"}),
        ]
    else:
        raise ConfigError(
            [f"figure: unknown id {fig_id!r}; valid ids are fig1, fig2, fig5"]
        )
    out = []
    for run_id, overrides in runs:
        mapping = base.to_mapping()
        mapping.update(overrides)
        mapping["output"] = _safe_name(run_id) + ".csv"
        out.append((run_id, ExperimentConfig.from_mapping(mapping)))
    return out


def replicate_figure(fig_id: str, out_dir, overrides: dict | None = None):
    """Run a figure protocol; returns (manifest_path, records)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    protocol = figure_protocol(fig_id)

    cache = str(out_dir / "instance.bin")
    records = []
    for run_id, config in protocol:
        config.cache = cache
        if overrides:
            config.apply_overrides(overrides)
        record = {"id": run_id, "csv": config.output, "config": config.to_mapping()}
        try:
            result = run_experiment(config, out_dir=out_dir)
            record["status"] = "ok"
            record["summary"] = summary_mapping(result.summary)
        except Exception as exc:
            record["status"] = "failed"
            record["error"] = f"{type(exc).__name__}: {exc}"
        records.append(record)

    manifest_path = write_manifest(out_dir / f"{fig_id}.jsonl", records)
    return manifest_path, records
