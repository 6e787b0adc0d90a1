"""Experiment configuration, seeded orchestration and CSV output.

A config is a JSON object.  Either name a ``preset`` or give the environment
explicitly; explicit keys override the preset's values::

    {"preset": "setup1-easy", "algorithms": ["lagex", "uniform"], "seeds": 100}

    {"means": [1.0, 0.5, 0.2], "sigma2": 1.0, "delta": 0.05,
     "constraints": [{"coef": [1, 1, 0], "rhs": 0.6}],
     "algorithms": ["lats"], "seeds": 10, "solver": {"fw_budget": 200}}

A constraint ``{"coef": c, "rhs": b, "sense": "<="}`` means ``c . pi <= b``;
``">="`` flips it.  Seeds are ``base_seed + i`` for ``i < seeds``; the
``PEX_SEED_BASE`` environment variable overrides ``base_seed``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import BanditInstance, InstanceError, build_instance, homogenize
from .gamesolver import characteristic_time
from .metrics import summarize
from .polytope import polytope_from_constraints, simplex_polytope
from .samplers import ALGORITHMS, RunConfig, RunRecord, run

SEED_ENV = "PEX_SEED_BASE"

RESULT_HEADER = ("algorithm", "seed", "tau", "correct", "feasible", "cum_violation", "censored")
SUMMARY_HEADER = ("algorithm", "n_seeds", "median_tau", "std_tau", "mean_violation", "error_rate", "censored")
SWEEP_HEADER = ("mu", "T_constrained", "T_BAI")
TRACE_HEADER = ("t", "n_vertices", "coords")


def _le(coef, rhs):
    return {"coef": list(coef), "rhs": rhs, "sense": "<="}


def _ge(coef, rhs):
    return {"coef": list(coef), "rhs": rhs, "sense": ">="}


_SETUP1 = [_le([1, 1, 1, 0, 0, 0, 0], 0.5), _le([0, 0, 0, 1, 1, 0, 0], 0.5)]
_SETUP2 = [_le([1, 1, 0, 0, 0], 0.5), _le([0, 0, 1, 1, 0], 0.5)]
# genre membership reconstructed from the stated optimal policy
# [0.3, 0.3, 0, 0, 0.4, 0, ...]: action = arms {0, 3}, drama = {1}, family = {4}
_IMDB = [
    _le([1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0], 0.3),
    _ge([0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0], 0.3),
    _ge([0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0], 0.3),
]

PRESETS = {
    "setup1-hard": {"means": [1.5, 1.0, 0.5, 0.4, 0.3, 0.2, 0.1], "constraints": _SETUP1, "delta": 0.01},
    "setup1-easy": {"means": [1.5, 1.0, 1.3, 0.4, 0.3, 0.2, 0.1], "constraints": _SETUP1, "delta": 0.01},
    "setup2-hard": {"means": [1.0, 0.5, 0.4, 0.4, 0.5], "constraints": _SETUP2, "delta": 0.1},
    "setup2-easy": {"means": [1.0, 0.5, 0.4, 0.95, 0.8], "constraints": _SETUP2, "delta": 0.1},
    "imdb": {
        "means": [3.67, 2.97, 2.94, 3.52, 3.18, 2.02, 2.79, 2.96, 2.37, 2.53, 2.55, 2.54],
        "constraints": _IMDB,
        "delta": 0.1,
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    :param constraints: homogeneous d x K rows (``A pi <= 0``) as nested tuples
    :param solver: learner knobs passed to :class:`RunConfig`
    :param trace_stride: when positive, write a feasible-set trace for the first seed
    """

    means: tuple
    constraints: tuple
    algorithms: tuple
    seeds: int
    sigma2: float = 1.0
    cost_noise_sd: float = 0.1
    delta: float = 0.01
    r: float = 0.01
    base_seed: int = 0
    horizon: int = 1_000_000
    solver: RunConfig = field(default_factory=RunConfig)
    out: str = "results"
    name: str = ""
    trace_stride: int = 0

    def instance(self) -> BanditInstance:
        A = np.array(self.constraints, dtype=float).reshape(len(self.constraints), len(self.means))
        return build_instance(self.means, self.sigma2, A, self.cost_noise_sd, self.r, self.delta, self.name)

    def run_config(self, trace_stride: int = 0) -> RunConfig:
        return replace(self.solver, horizon=self.horizon, sigma2=self.sigma2, trace_stride=trace_stride)

    def seed_list(self) -> list[int]:
        return [self.base_seed + i for i in range(self.seeds)]


_TOP_KEYS = {
    "preset", "name", "means", "sigma2", "constraints", "cost_noise_sd", "delta", "r",
    "algorithms", "seeds", "base_seed", "horizon", "solver", "out", "trace_stride",
}
_SOLVER_KEYS = {f.name for f in fields(RunConfig)} - {"horizon", "sigma2", "trace_stride"}


def _number(raw, key, kind=float):
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"field '{key}' must be a number, got {val!r}")
    if kind is int:
        if float(val) != int(val):
            raise ConfigError(f"field '{key}' must be an integer, got {val!r}")
        return int(val)
    return float(val)


def _constraint_rows(items, K: int) -> tuple:
    if not isinstance(items, list):
        raise ConfigError("field 'constraints' must be a list")
    rows = []
    for j, c in enumerate(items):
        where = f"constraints[{j}]"
        if not isinstance(c, dict) or "coef" not in c or "rhs" not in c:
            raise ConfigError(f"field '{where}' must be an object with 'coef' and 'rhs'")
        coef = c["coef"]
        if not isinstance(coef, list) or len(coef) != K:
            raise ConfigError(f"field '{where}.coef' must be a list of {K} numbers")
        sense = c.get("sense", "<=")
        if sense not in ("<=", ">="):
            raise ConfigError(f"field '{where}.sense' must be '<=' or '>='")
        try:
            row = homogenize(np.asarray(coef, dtype=float), float(c["rhs"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field '{where}' is not numeric: {exc}") from None
        rows.append(tuple(float(x) for x in (row if sense == "<=" else -row)))
    return tuple(rows)


def config_from_dict(raw: dict, seed_base: Optional[int] = None) -> ExperimentConfig:
    """Validate a raw config mapping; presets expand before explicit keys apply."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown field '{unknown[0]}'")
    merged = {}
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(f"field 'preset': unknown preset {name!r}; available: {', '.join(PRESETS)}")
        merged.update(json.loads(json.dumps(PRESETS[name])))
        merged["name"] = name
    merged.update({k: v for k, v in raw.items() if k != "preset"})

    for key in ("means", "algorithms", "seeds"):
        if key not in merged:
            raise ConfigError(f"field '{key}' is required")
    means = merged["means"]
    if not isinstance(means, list) or len(means) < 2:
        raise ConfigError("field 'means' must be a list of at least 2 numbers")
    try:
        means = tuple(float(m) for m in means)
    except (TypeError, ValueError):
        raise ConfigError("field 'means' must contain numbers") from None
    K = len(means)

    algs = merged["algorithms"]
    if not isinstance(algs, list) or not algs:
        raise ConfigError("field 'algorithms' must be a non-empty list")
    for a in algs:
        if a not in ALGORITHMS:
            raise ConfigError(f"field 'algorithms': unknown algorithm {a!r}; available: {', '.join(ALGORITHMS)}")
    if len(set(algs)) != len(algs):
        raise ConfigError("field 'algorithms' has duplicates")

    kw = {}
    seeds = _number(merged, "seeds", int)
    if seeds < 1:
        raise ConfigError("field 'seeds' must be >= 1")
    for key in ("sigma2", "cost_noise_sd", "delta", "r"):
        if key in merged:
            kw[key] = _number(merged, key)
    for key in ("base_seed", "horizon", "trace_stride"):
        if key in merged:
            kw[key] = _number(merged, key, int)
    if "delta" in kw and not 0.0 < kw["delta"] < 1.0:
        raise ConfigError("field 'delta' must lie in (0, 1)")
    if kw.get("r", 0.0) < 0:
        raise ConfigError("field 'r' must be >= 0")
    if not kw.get("sigma2", 1.0) > 0:
        raise ConfigError("field 'sigma2' must be > 0")
    if kw.get("cost_noise_sd", 0.0) < 0:
        raise ConfigError("field 'cost_noise_sd' must be >= 0")
    if kw.get("horizon", K) < K:
        raise ConfigError(f"field 'horizon' must be >= K = {K}")
    if kw.get("trace_stride", 0) < 0:
        raise ConfigError("field 'trace_stride' must be >= 0")
    if seed_base is not None:
        kw["base_seed"] = int(seed_base)

    solver_raw = merged.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ConfigError("field 'solver' must be an object")
    bad = sorted(set(solver_raw) - _SOLVER_KEYS)
    if bad:
        raise ConfigError(f"unknown field 'solver.{bad[0]}'")
    try:
        solver = RunConfig(**solver_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'solver': {exc}") from None

    out = merged.get("out", "results")
    if not isinstance(out, str):
        raise ConfigError("field 'out' must be a string")
    cfg = ExperimentConfig(
        means=means,
        constraints=_constraint_rows(merged.get("constraints", []), K),
        algorithms=tuple(algs),
        seeds=seeds,
        solver=solver,
        out=out,
        name=str(merged.get("name", "")),
        **kw,
    )
    try:
        cfg.instance()
    except InstanceError as exc:
        raise ConfigError(f"field 'constraints': {exc}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file; ``PEX_SEED_BASE`` overrides ``base_seed``."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    env = os.environ.get(SEED_ENV)
    seed_base = None
    if env is not None and env.strip():
        try:
            seed_base = int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return config_from_dict(raw, seed_base=seed_base)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _run_one(args) -> RunRecord:
    cfg, alg, seed = args
    return run(alg, cfg.instance(), seed, cfg.run_config())


def run_records(config: ExperimentConfig, parallel: int = 1) -> list[RunRecord]:
    """All (algorithm, seed) runs, sorted by (algorithm, seed) whatever the worker order."""
    tasks = [(config, a, s) for a in config.algorithms for s in config.seed_list()]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        records = [_run_one(t) for t in tasks]
    return sorted(records, key=lambda rec: (rec.algorithm, rec.seed))


def results_csv(records: Sequence[RunRecord]) -> str:
    return _csv_text(
        RESULT_HEADER,
        ((r.algorithm, r.seed, r.tau, r.correct, r.feasible, r.cum_violation, r.censored) for r in records),
    )


def summary_csv(records: Sequence[RunRecord]) -> str:
    rows = []
    for alg in sorted({r.algorithm for r in records}):
        s = summarize([r for r in records if r.algorithm == alg])
        rows.append((s.algorithm, s.n_seeds, s.median_tau, s.std_tau, s.mean_violation, s.error_rate, s.censored))
    return _csv_text(SUMMARY_HEADER, rows)


def run_experiment(config: ExperimentConfig, out_dir=None, parallel: int = 1) -> dict:
    """Run every (algorithm, seed) pair and write ``results.csv`` and ``summary.csv``.

    With ``trace_stride > 0`` the first seed of each algorithm is rerun with the
    feasible-set trace on and written to ``trace_<algorithm>.csv``.

    :returns: mapping from output kind to path, plus ``records``
    """
    out = Path(config.out if out_dir is None else out_dir)
    records = run_records(config, parallel)
    paths = {
        "results": _write(out / "results.csv", results_csv(records)),
        "summary": _write(out / "summary.csv", summary_csv(records)),
    }
    if config.trace_stride > 0:
        inst = config.instance()
        for alg in config.algorithms:
            rec = run(alg, inst, config.base_seed, config.run_config(trace_stride=config.trace_stride))
            paths[f"trace_{alg}"] = emit_feasible_set_trace(rec, out / f"trace_{alg}.csv")
    paths["records"] = records
    return paths


def sweep_lowerbound(
    config: ExperimentConfig, arm: int, lo: float, hi: float, steps: int, path=None, budget: int = 300
) -> list[tuple[float, float, float]]:
    """Characteristic time with the constraints and on the bare simplex along a mean grid.

    :param arm: 0-based index of the mean that is varied
    :param steps: number of grid points including both ends
    """
    K = len(config.means)
    if not 0 <= arm < K:
        raise ValueError(f"arm index {arm} out of range for K = {K}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    inst = config.instance()
    poly = polytope_from_constraints(inst.constraints)
    simplex = simplex_polytope(K)
    rows = []
    for x in np.linspace(lo, hi, steps):
        mu = np.array(config.means, dtype=float)
        mu[arm] = x
        rows.append((
            float(x),
            characteristic_time(mu, poly, inst.r, inst.sigma2, budget=budget),
            characteristic_time(mu, simplex, inst.r, inst.sigma2, budget=budget),
        ))
    if path is not None:
        _write(Path(path), _csv_text(SWEEP_HEADER, rows))
    return rows


def trace_rows(record: RunRecord) -> list[tuple[int, int, str]]:
    """``(t, n_vertices, coords)`` with vertices joined by ``;`` and coordinates by spaces."""
    rows = []
    for t, V in record.trace:
        coords = ";".join(" ".join(_fmt(x) for x in v) for v in np.asarray(V))
        rows.append((int(t), int(len(V)), coords))
    return rows


def parse_trace_coords(coords: str, K: int) -> np.ndarray:
    if not coords:
        return np.zeros((0, K))
    return np.array([[float(x) for x in v.split(" ")] for v in coords.split(";")])


def emit_feasible_set_trace(record: RunRecord, path=None) -> str:
    """CSV of the estimated feasible set's vertices at each logged step."""
    if not record.trace:
        raise ValueError("record has no feasible-set trace; run with trace_stride > 0")
    text = _csv_text(TRACE_HEADER, trace_rows(record))
    if path is not None:
        return _write(Path(path), text)
    return text


def _print_presets(stream) -> None:
    for name, p in PRESETS.items():
        cons = "; ".join(
            f"{' + '.join(f'pi{i + 1}' for i, c in enumerate(c['coef']) if c)} {c['sense']} {c['rhs']}"
            for c in p["constraints"]
        )
        print(f"{name}: means={p['means']} delta={p['delta']} constraints: {cons}", file=stream)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="purex", description="Constrained pure-exploration experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run every (algorithm, seed) pair and write CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (default: the config's 'out')")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--seeds", type=int, default=None, help="override the seed count, e.g. 500")
    s = sub.add_parser("sweep-lb", help="characteristic times along a grid of one arm's mean")
    s.add_argument("--config", required=True)
    s.add_argument("--arm", type=int, required=True, help="0-based arm index")
    s.add_argument("--lo", type=float, required=True)
    s.add_argument("--hi", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--out", default=None, help="CSV path (default: <config out>/sweep.csv)")
    sub.add_parser("presets", help="list the embedded environments")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        _print_presets(sys.stdout)
        return 0
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            if args.seeds is not None:
                if args.seeds < 1:
                    raise ConfigError("--seeds must be >= 1")
                cfg = replace(cfg, seeds=args.seeds)
            if args.parallel < 1:
                raise ConfigError("--parallel must be >= 1")
            paths = run_experiment(cfg, args.out, args.parallel)
            print(f"wrote {paths['results']} and {paths['summary']}")
        else:
            out = Path(args.out) if args.out else Path(cfg.out) / "sweep.csv"
            sweep_lowerbound(cfg, args.arm, args.lo, args.hi, args.steps, path=out)
            print(f"wrote {out}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
