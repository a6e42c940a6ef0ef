"""Command-line entry point: ``distgen <command> [options]``.

Commands
--------
dsvm-sweep        distributed vs centralized SVM generalization gap over K
population-study  population risk and empirical-risk difference over K
fsgld             federated SGLD gap and its bound
rd-solve          rate-distortion value of a finite instance
jl-validate       Monte Carlo check of the compression distortion level
bounds            closed-form DSVM bounds, term by term

Every command reads an optional strict JSON config (unknown keys are
rejected), writes ``<command>.json`` and, where applicable,
``<command>.csv`` and SVG charts to ``--out``. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .bounds import (
    SvmBoundParams,
    centralized_bound,
    dsvm_expected_bound,
    dsvm_rate_term,
    dsvm_tail_bound,
    epsilon_terms,
    fsgld_bound,
    optimize_svm_bound,
)
from .compression import BoundedGaussianModel, CompressionParams, jl_tail_diagnostic, validate_distortion_level
from .datasets import Dataset, load_mnist_binary, standardize_apply, standardize_fit, synth_two_gaussians
from .distributed import (
    FsgldSchedule,
    SweepConfig,
    estimate_gradient_variance,
    estimate_limit_gap,
    run_fsgld,
    sort_rows,
    summarize,
    sweep,
)
from .exceptions import ConfigError, DataError, NumericalError
from .features import RandomFourierFeatures
from .learners import SgdParams
from .plotting import write_line_chart
from .ratedistortion import (
    AlgorithmRdInstance,
    ConditionalRdInstance,
    RdInstance,
    algorithm_rd,
    conditional_algorithm_rd,
    rd_at_distortion,
)
from .records import dumps_json, rows_to_csv, write_run_record
from .seeding import child_seed, make_rng

__all__ = [
    "main",
    "build_parser",
    "load_config",
    "parse_json_bytes",
    "DataSection",
    "SgdSection",
    "DsvmSweepConfig",
    "PopulationStudyConfig",
    "FsgldConfig",
    "RdSolveConfig",
    "JlValidateConfig",
    "BoundsConfig",
    "CONFIG_MODELS",
    "prepare_dsvm_data",
]

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Strict):
    """Where the DSVM data comes from and how it is featurized.

    ``rff_gamma`` and ``rff_components`` default per source: ``0.01`` and
    ``2000`` for MNIST, ``1.0`` and ``1000`` for the synthetic task.
    """

    source: Literal["mnist", "synthetic"] = "mnist"
    data_dir: Optional[str] = None
    pos_digit: int = Field(1, ge=0, le=9)
    neg_digit: int = Field(6, ge=0, le=9)
    synthetic_dim: int = Field(5, ge=1)
    synthetic_separation: float = 3.0
    synthetic_label_noise: float = Field(0.1, ge=0.0, lt=0.5)
    pool_size: int = Field(20_000, ge=2)
    test_size: int = Field(10_000, ge=2)
    rff_gamma: Optional[float] = Field(None, gt=0)
    rff_components: Optional[int] = Field(None, ge=1)
    standardize: bool = True


class SgdSection(_Strict):
    eta0: float = 0.01
    alpha: float = 1e-5
    batch_size: int = 1
    max_epochs: int = 200
    lr_decay_factor: float = 0.2
    no_improve_tol: float = 0.01
    no_improve_epochs: int = 10
    target_train_risk: float = 0.001
    improvement_rule: Literal["decrease", "increase"] = "decrease"

    def to_params(self, seed=0):
        return SgdParams(**self.model_dump(), seed=seed)


class DsvmSweepConfig(_Strict):
    data: DataSection = DataSection()
    sgd: SgdSection = SgdSection()
    K_values: List[int] = Field(default_factory=lambda: [1, 5, 10, 25, 50], min_length=1)
    n_values: List[int] = Field(default_factory=lambda: [100], min_length=1)
    repeats: int = Field(10, ge=1)
    theta: float = Field(0.0, ge=0.0)
    bound_theta: float = Field(0.2, gt=0.0)
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    sigma: float = Field(1.0, gt=0.0)
    centralized: bool = True
    rescale_hypotheses: bool = False
    master_seed: int = Field(0, ge=0, lt=2**64)


class PopulationStudyConfig(_Strict):
    data: DataSection = DataSection()
    sgd: SgdSection = SgdSection()
    K_values: List[int] = Field(default_factory=lambda: [1, 2, 5, 10, 25, 50, 100, 200], min_length=1)
    n: int = Field(100, ge=1)
    repeats: int = Field(10, ge=1)
    limit_replicas: int = Field(200, ge=2)
    centralized: bool = True
    master_seed: int = Field(0, ge=0, lt=2**64)


class FsgldConfig(_Strict):
    """Synthetic logistic-regression task for federated SGLD.

    ``variance`` selects the gradient variance fed to the bound: the
    spread across replicas (``"replicas"``) or the within-minibatch
    scatter of each run averaged over replicas (``"scatter"``).
    """

    dim: int = Field(10, ge=1)
    separation: float = 2.0
    label_noise: float = Field(0.05, ge=0.0, lt=0.5)
    pool_size: int = Field(20_000, ge=2)
    test_size: int = Field(10_000, ge=2)
    K_values: List[int] = Field(default_factory=lambda: [1, 4, 16], min_length=1)
    n: int = Field(50, ge=1)
    b: int = Field(10, ge=1)
    T: int = Field(200, ge=1)
    eta: float = Field(0.05, gt=0.0)
    beta: float = Field(100.0, gt=0.0)
    replicas: int = Field(20, ge=2)
    sigma: float = Field(0.5, gt=0.0)
    variance: Literal["replicas", "scatter"] = "replicas"
    aggregator: Literal["polyak", "last"] = "polyak"
    master_seed: int = Field(0, ge=0, lt=2**64)


class RdSolveConfig(_Strict):
    """A finite rate-distortion problem.

    ``kind="source"`` uses ``px``, ``distortion`` and ``target``;
    ``kind="algorithm"`` uses ``joint``, ``gen``, ``gen_hat`` and
    ``epsilon``; ``kind="conditional"`` uses ``joint``, ``gen_agg``,
    ``gen_hat`` and ``epsilon`` with a leading conditioning axis. An unset
    ``tol`` uses the solver's own default.
    """

    kind: Literal["source", "algorithm", "conditional"] = "source"
    px: Optional[List[float]] = None
    distortion: Optional[List[List[float]]] = None
    target: Optional[float] = None
    joint: Optional[list] = None
    gen: Optional[list] = None
    gen_agg: Optional[list] = None
    gen_hat: Optional[list] = None
    epsilon: Optional[float] = None
    tol: Optional[float] = Field(None, gt=0.0)


class JlPoint(_Strict):
    """A grid point; unset ``m, c1, c2, nu`` take the default choices for ``(n, K, theta, B)``."""

    n: int = Field(100, ge=1)
    K: int = Field(10, ge=1)
    theta: float = Field(0.2, gt=0.0)
    B: float = Field(1.0, gt=0.0)
    m: Optional[int] = Field(None, ge=1)
    c1: Optional[float] = Field(None, ge=1.0)
    c2: Optional[float] = Field(None, ge=1.0)
    nu: Optional[float] = Field(None, gt=0.0)

    def to_params(self, seed):
        base = CompressionParams.default(self.n, self.K, self.theta, self.B, seed)
        changes = {k: v for k, v in (("m", self.m), ("c1", self.c1), ("c2", self.c2), ("nu", self.nu))
                   if v is not None}
        return CompressionParams(**{**base.__dict__, **changes})


class TailCheck(_Strict):
    m: int = Field(100, ge=1)
    c: float = Field(1.3, gt=1.0)


class JlValidateConfig(_Strict):
    grid: List[JlPoint] = Field(default_factory=lambda: [JlPoint()], min_length=1)
    tail_checks: List[TailCheck] = Field(default_factory=lambda: [TailCheck()])
    dim: int = Field(50, ge=1)
    n_mc: int = Field(10_000, ge=100)
    n_matrices: int = Field(20, ge=2)
    tail_samples: int = Field(10_000, ge=2)
    master_seed: int = Field(0, ge=0, lt=2**64)


class BoundsConfig(_Strict):
    n: int = Field(100, ge=1)
    K: int = Field(10, ge=1)
    theta: float = Field(0.2, gt=0.0)
    B: float = Field(1.0, gt=0.0)
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    sigma: float = Field(1.0, gt=0.0)
    tight: bool = False
    optimize: bool = False


CONFIG_MODELS = {
    "dsvm-sweep": DsvmSweepConfig,
    "population-study": PopulationStudyConfig,
    "fsgld": FsgldConfig,
    "rd-solve": RdSolveConfig,
    "jl-validate": JlValidateConfig,
    "bounds": BoundsConfig,
}


def parse_json_bytes(raw):
    """Parse JSON bytes; failures raise :class:`ConfigError` carrying the byte offset."""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        err = ConfigError(f"config is not valid UTF-8 at byte {exc.start}")
        err.byte_offset = exc.start
        raise err from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        err = ConfigError(f"malformed JSON at byte {offset} (line {exc.lineno}, column {exc.colno}): {exc.msg}")
        err.byte_offset = offset
        raise err from None


def load_config(command, path=None, overrides=None):
    """Validate a config file (or the defaults) for ``command``.

    Raises
    ------
    ConfigError
        On malformed JSON, unknown keys or invalid values.
    """
    model = CONFIG_MODELS[command]
    data = {}
    if path is not None:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        data = parse_json_bytes(raw)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in (overrides or {}).items():
        if key == "data.source":
            data = {**data, "data": {**data.get("data", {}), "source": value}}
        else:
            data = {**data, key: value}
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid {command} config: {problems}") from None


def _featurize(pool, test, section, seed, default_gamma, default_components):
    if section.standardize:
        stats = standardize_fit(pool)
        pool, test = standardize_apply(pool, stats), standardize_apply(test, stats)
    gamma = section.rff_gamma if section.rff_gamma is not None else default_gamma
    p = section.rff_components if section.rff_components is not None else default_components
    rff = RandomFourierFeatures(gamma=gamma, n_components=p, random_state=child_seed(seed, "rff")).fit(pool.X)
    return Dataset(rff.transform(pool.X), pool.y), Dataset(rff.transform(test.X), test.y)


def prepare_dsvm_data(section, seed):
    """Load (or synthesize), standardize and random-feature-map the DSVM data.

    Returns
    -------
    pool, test : Dataset
        Feature-mapped training pool and held-out set.
    """
    if section.source == "synthetic":
        pool = synth_two_gaussians(section.synthetic_dim, section.pool_size, section.synthetic_separation,
                                   section.synthetic_label_noise, child_seed(seed, "synthetic-pool"))
        test = synth_two_gaussians(section.synthetic_dim, section.test_size, section.synthetic_separation,
                                   section.synthetic_label_noise, child_seed(seed, "synthetic-test"))
        return _featurize(pool, test, section, seed, 1.0, 1000)
    data_dir = section.data_dir or os.environ.get("DISTGEN_DATA_DIR")
    if not data_dir:
        raise DataError("no MNIST location: set DISTGEN_DATA_DIR or data.data_dir, or pass --synthetic")
    pool, test = load_mnist_binary(data_dir, section.pos_digit, section.neg_digit)
    return _featurize(pool, test, section, seed, 0.01, 2000)


def _cell_means(rows, experiment, column):
    """Per-K cell means; a cell with a single repeat uses that repeat."""
    out = {}
    for row in rows:
        if row["experiment"] == experiment and row["repeat"] == "mean":
            out[row["K"]] = row.get(column)
    for row in rows:
        if row["experiment"] == experiment and row["repeat"] == 0 and row["K"] not in out:
            out[row["K"]] = row.get(column)
    keys = sorted(out)
    return keys, [out[k] for k in keys]


def _dsvm_sweep(cfg, out, n_jobs, plots):
    pool, test = prepare_dsvm_data(cfg.data, cfg.master_seed)
    config = SweepConfig(
        K_values=list(cfg.K_values), n_values=list(cfg.n_values), repeats=cfg.repeats,
        master_seed=cfg.master_seed, theta=cfg.theta, bound_theta=cfg.bound_theta, delta=cfg.delta,
        sigma=cfg.sigma, rescale_hypotheses=cfg.rescale_hypotheses, centralized=cfg.centralized,
        sgd=cfg.sgd.to_params(),
    )
    rows = sweep(config, pool, test, n_jobs=n_jobs)
    B = float(np.max(np.linalg.norm(pool.X, axis=1)))
    if plots:
        for n in cfg.n_values:
            sub = [r for r in rows if r["n"] == n]
            series = []
            for label, exp, col in (("distributed gap", "distributed", "gen_gap"),
                                    ("centralized gap", "centralized", "gen_gap"),
                                    ("distributed bound", "distributed", "bound_expected"),
                                    ("centralized bound", "centralized", "bound_centralized")):
                ks, vals = _cell_means(sub, exp, col)
                if ks:
                    series.append((label, ks, vals))
            write_line_chart(out / f"dsvm-sweep_n{n}.svg", series, title=f"Generalization gap, n={n}",
                             xlabel="K", ylabel="gap / bound")
    return rows, {"feature_norm_bound": B, "n_pool": pool.n_samples, "n_test": test.n_samples}


def _population_study(cfg, out, n_jobs, plots):
    pool, test = prepare_dsvm_data(cfg.data, cfg.master_seed)
    config = SweepConfig(K_values=list(cfg.K_values), n_values=[cfg.n], repeats=cfg.repeats,
                         master_seed=cfg.master_seed, centralized=cfg.centralized, sgd=cfg.sgd.to_params())
    rows = sweep(config, pool, test, n_jobs=n_jobs)
    for row in rows:
        for col in ("bound_expected", "bound_tail", "bound_centralized"):
            row.pop(col, None)
    limit_seed = child_seed(cfg.master_seed, "limit")
    limit = estimate_limit_gap(pool, test, cfg.n, cfg.sgd.to_params(), R=cfg.limit_replicas, seed=limit_seed,
                               n_jobs=n_jobs)
    rows.append({"experiment": "limit", "K": None, "n": cfg.n, "repeat": "mean", "seed": limit_seed,
                 "delta_emp": limit.estimate})
    rows.append({"experiment": "limit", "K": None, "n": cfg.n, "repeat": "se", "seed": limit_seed,
                 "delta_emp": limit.se})
    rows = sort_rows(rows)
    if plots:
        ks, pop_d = _cell_means(rows, "distributed", "pop_risk")
        _, dl = _cell_means(rows, "distributed", "delta_emp")
        series = [("distributed population risk", ks, pop_d)]
        if cfg.centralized:
            kc, pop_c = _cell_means(rows, "centralized", "pop_risk")
            series.append(("centralized population risk", kc, pop_c))
        series += [("empirical risk difference", ks, dl), ("large-K limit", ks, [limit.estimate] * len(ks))]
        write_line_chart(out / "population-study.svg", series, title=f"Population risk and bias, n={cfg.n}",
                         xlabel="K", ylabel="risk", log_x=True)
    return rows, {"limit_estimate": limit.estimate, "limit_se": limit.se, "limit_replicas": limit.R}


def fsgld_task(cfg):
    pool = synth_two_gaussians(cfg.dim, cfg.pool_size, cfg.separation, cfg.label_noise,
                               child_seed(cfg.master_seed, "fsgld-pool"))
    test = synth_two_gaussians(cfg.dim, cfg.test_size, cfg.separation, cfg.label_noise,
                               child_seed(cfg.master_seed, "fsgld-test"))
    return pool, test


def _fsgld(cfg, out, n_jobs, plots):
    if cfg.n % cfg.b:
        raise ConfigError(f"n={cfg.n} is not divisible by b={cfg.b}")
    pool, test = fsgld_task(cfg)
    schedule = FsgldSchedule.constant(cfg.T, cfg.eta, cfg.beta)
    rows = []
    cells = {}
    for K in cfg.K_values:
        traces, reports = [], []
        for r in range(cfg.replicas):
            seed = child_seed(cfg.master_seed, f"fsgld:K={K}", r)
            trace, report = run_fsgld(pool, test, K, cfg.n, cfg.b, schedule, aggregator=cfg.aggregator, seed=seed)
            traces.append(trace)
            reports.append(report)
        if cfg.variance == "replicas":
            variance = estimate_gradient_variance(traces)
        else:
            variance = np.mean([tr.gradient_scatter for tr in traces], axis=0)
        bound = fsgld_bound(traces[0].with_variance(variance), cfg.sigma)
        for r, rep in enumerate(reports):
            rows.append({"experiment": "fsgld", "K": K, "n": cfg.n, "repeat": r, "seed": rep.seed,
                         "gen_gap": rep.gen_gap, "emp_risk_agg": rep.agg_emp_risk, "pop_risk": rep.pop_risk,
                         "bound_expected": bound})
        gaps = np.array([rep.gen_gap for rep in reports])
        cells[str(K)] = {
            "bound": bound,
            "bound_label": "single-client (Wang-form)" if K == 1 else "federated",
            "mean_gap": float(gaps.mean()),
            "gap_se": float(gaps.std(ddof=1) / np.sqrt(len(gaps))),
            "mean_gradient_variance": float(variance.mean()),
        }
    rows.extend(summarize(rows))
    rows = sort_rows(rows)
    if plots:
        ks = list(cfg.K_values)
        write_line_chart(out / "fsgld.svg", [
            ("measured gap", ks, [cells[str(k)]["mean_gap"] for k in ks]),
            ("bound", ks, [cells[str(k)]["bound"] for k in ks]),
        ], title="Federated SGLD", xlabel="K", ylabel="gap / bound", log_x=True)
    return rows, {"cells": cells}


def _arr(value, name):
    if value is None:
        raise ConfigError(f"rd-solve: missing field {name!r}")
    return np.asarray(value, dtype=np.float64)


def _rd_solve(cfg, out, n_jobs, plots):
    tol = {} if cfg.tol is None else {"tol": cfg.tol}
    try:
        if cfg.kind == "source":
            if cfg.target is None:
                raise ConfigError("rd-solve: missing field 'target'")
            rate = rd_at_distortion(RdInstance(_arr(cfg.px, "px"), _arr(cfg.distortion, "distortion")),
                                    cfg.target, **tol)
        elif cfg.kind == "algorithm":
            if cfg.epsilon is None:
                raise ConfigError("rd-solve: missing field 'epsilon'")
            inst = AlgorithmRdInstance(_arr(cfg.joint, "joint"), _arr(cfg.gen, "gen"),
                                       _arr(cfg.gen_hat, "gen_hat"), cfg.epsilon)
            rate = algorithm_rd(inst, **tol)
        else:
            if cfg.epsilon is None:
                raise ConfigError("rd-solve: missing field 'epsilon'")
            inst = ConditionalRdInstance(_arr(cfg.joint, "joint"), _arr(cfg.gen_agg, "gen_agg"),
                                         _arr(cfg.gen_hat, "gen_hat"), cfg.epsilon)
            rate = conditional_algorithm_rd(inst, **tol)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"rd-solve: {exc}") from None
    return None, {"rate_nats": rate}


JL_COLUMNS = ("kind", "m", "c1", "c2", "nu", "K", "theta", "B", "estimate", "std_err", "analytic", "passed")


def _jl_validate(cfg, out, n_jobs, plots):
    grid = [p.to_params(child_seed(cfg.master_seed, "jl-noise", i)) for i, p in enumerate(cfg.grid)]
    model = BoundedGaussianModel(d=cfg.dim, B=grid[0].B, seed=child_seed(cfg.master_seed, "jl-model"))
    report = validate_distortion_level(grid, model, cfg.n_mc, cfg.n_matrices, seed=cfg.master_seed)
    tails = []
    rng = make_rng(child_seed(cfg.master_seed, "jl-tail-data"))
    for k, tc in enumerate(cfg.tail_checks):
        X = model.sample_x(cfg.tail_samples, rng)
        tails.append(jl_tail_diagnostic(X, tc.m, tc.c, model.B, cfg.n_matrices,
                                        seed=child_seed(cfg.master_seed, "jl-tail", k)))
    rows = []
    for entry in report:
        rows.append({"kind": "distortion", **{k: entry[k] for k in ("m", "c1", "c2", "nu", "K", "theta", "B")},
                     "estimate": entry["D_A_mean"], "std_err": entry["D_A_se"], "analytic": entry["epsilon"],
                     "passed": entry["passed"]})
    for t in tails:
        rows.append({"kind": "feature_tail", "m": t["m"], "c1": t["c"], "B": t["B"],
                     "estimate": t["exact_given_x"], "std_err": t["exact_given_x_se"],
                     "analytic": t["analytic_bound"], "passed": t["passed"]})
    (out / "jl-validate.csv").write_text(rows_to_csv(rows, JL_COLUMNS), encoding="utf-8")
    return None, {"grid": report, "tail_checks": tails}


def _bounds(cfg, out, n_jobs, plots):
    params = SvmBoundParams.default(cfg.n, cfg.K, cfg.theta, cfg.B, cfg.delta, cfg.sigma)
    result = {
        "params": params.to_dict(),
        "epsilon_terms": epsilon_terms(params, cfg.tight).to_dict(),
        "rate": dsvm_rate_term(params),
        "expected": dsvm_expected_bound(params, cfg.tight),
        "tail": dsvm_tail_bound(params, cfg.tight),
        "centralized_expected": centralized_bound(cfg.n, cfg.K, cfg.theta, cfg.B, sigma=cfg.sigma, tight=cfg.tight),
        "centralized_tail": centralized_bound(cfg.n, cfg.K, cfg.theta, cfg.B, cfg.delta, cfg.sigma, cfg.tight),
    }
    if cfg.optimize:
        best, value = optimize_svm_bound(cfg.n, cfg.K, cfg.theta, cfg.B, sigma=cfg.sigma)
        result["optimized_expected"] = {"params": best.to_dict(), "value": value}
    return None, result


COMMANDS = {
    "dsvm-sweep": _dsvm_sweep,
    "population-study": _population_study,
    "fsgld": _fsgld,
    "rd-solve": _rd_solve,
    "jl-validate": _jl_validate,
    "bounds": _bounds,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="distgen", description="Distributed generalization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--synthetic", action="store_true", help="use the synthetic dataset instead of MNIST")
        p.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    return parser


def run(command, cfg, out, threads=1, plots=True):
    """Run a validated config and write its outputs; returns the run record."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows, results = COMMANDS[command](cfg, out, threads, plots)
    if rows is not None:
        (out / f"{command}.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    return write_run_record(out / f"{command}.json", command, cfg.model_dump(), results,
                            time.perf_counter() - start)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.seed is not None:
            if "master_seed" not in CONFIG_MODELS[args.command].model_fields:
                raise ConfigError(f"{args.command} takes no seed")
            overrides["master_seed"] = args.seed
        if args.synthetic:
            if "data" not in CONFIG_MODELS[args.command].model_fields:
                if args.command != "fsgld":
                    raise ConfigError(f"{args.command} has no dataset to replace")
            else:
                overrides["data.source"] = "synthetic"
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.command, args.config, overrides)
        record = run(args.command, cfg, args.out, args.threads, not args.no_plots)
    except ConfigError as exc:
        details = {"byte_offset": exc.byte_offset} if hasattr(exc, "byte_offset") else {}
        return _fail(EXIT_CONFIG, "config", str(exc), **details)
    except DataError as exc:
        return _fail(EXIT_DATA, "data", str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, "numeric", str(exc))
    sys.stdout.write(dumps_json({"command": args.command, "results": record["results"]}))
    return EXIT_OK


def _fail(code, kind, message, **details):
    sys.stderr.write(dumps_json({"error": kind, "message": message, **details}))
    return code


if __name__ == "__main__":
    sys.exit(main())
