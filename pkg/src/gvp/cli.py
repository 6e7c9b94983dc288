"""Command-line experiments.

``gvp <experiment> --config <file> [--threads N] [--check]``

Each run writes its tables into ``output.dir`` together with a
``manifest.json`` holding the config hash, package version, wall time and a
sha256 checksum per output file.  Outputs depend only on the config (and
``GVP_SEED``), never on ``--threads``: paths are drawn from per-path random
streams and chunk results are concatenated in stream order.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 failed check.
"""
from __future__ import annotations

import argparse
import enum
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from gvp import __version__
from gvp.errors import (
    ConfigError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    FactorizationError,
    QuadratureError,
)
from gvp.model import ProcessParams, validate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4


class Experiment(str, enum.Enum):
    SIMULATE = "simulate"
    COV = "cov"
    CLASSIFY = "classify"
    ESTIMATE = "estimate"
    MC_CONSISTENCY = "mc_consistency"
    MC_CAUCHY = "mc_cauchy"
    LIL_CHECK = "lil_check"
    ETA2 = "eta2"
    RATES = "rates"


NEEDS_THETA = {Experiment.ESTIMATE, Experiment.MC_CONSISTENCY, Experiment.MC_CAUCHY, Experiment.ETA2, Experiment.RATES}

# experiment-specific knobs accepted under "options"
OPTIONS = {
    Experiment.SIMULATE: {"method": "cholesky", "refinement": 16},
    Experiment.COV: {},
    Experiment.CLASSIFY: {"corr_times": None},
    Experiment.ESTIMATE: {"T": None},
    Experiment.MC_CONSISTENCY: {"T": None},
    Experiment.MC_CAUCHY: {"T": None, "ks_max_statistic": 0.1},
    Experiment.LIL_CHECK: {"max_ratio": 1.25},
    Experiment.ETA2: {"mc_T": 15.0, "mc_points": 1501},
    Experiment.RATES: {"T": [5.0, 10.0, 20.0], "tolerance": 0.05},
}


@dataclass(frozen=True)
class GridSpec:
    t_max: float
    points: int = 256
    spacing: str = "uniform"


@dataclass(frozen=True)
class MCSpec:
    n_paths: int = 1
    base_seed: int = 0


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "gvp_out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    params: ProcessParams
    grid: GridSpec
    mc: MCSpec = MCSpec()
    output: OutputSpec = OutputSpec()
    theta: float | None = None
    options: dict = field(default_factory=dict)

    def canonical(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["output"]["formats"] = list(self.output.formats)
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _check_keys(obj, allowed, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{where + '.' if where else ''}{extra[0]}: unknown key")


def _number(v, name: str, *, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if integer:
        if float(v) != int(v):
            raise ConfigError(f"{name}: expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{name}: must be finite")
    return float(v)


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Validate a JSON config document.

    ``experiment`` (the subcommand) fills in or must agree with the
    document's ``experiment`` field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _check_keys(doc, {"experiment", "params", "theta", "grid", "mc", "output", "options"}, "")

    name = doc.get("experiment", experiment)
    if name is None:
        raise ConfigError("experiment: missing")
    if experiment is not None and name != experiment:
        raise ConfigError(f"experiment: config says {name!r} but command is {experiment!r}")
    try:
        exp = Experiment(name)
    except ValueError:
        raise ConfigError(f"experiment: unknown value {name!r}") from None

    if "params" not in doc:
        raise ConfigError("params: missing")
    pd = doc["params"]
    _check_keys(pd, {"alpha", "beta", "gamma"}, "params")
    for k in ("alpha", "beta", "gamma"):
        if k not in pd:
            raise ConfigError(f"params.{k}: missing")
        _number(pd[k], f"params.{k}")
    try:
        params = validate(pd["alpha"], pd["beta"], pd["gamma"])
    except DomainError as exc:
        msg = str(exc)
        field_name = next((k for k in ("alpha", "beta", "gamma") if msg.startswith(k)), "alpha+beta+gamma")
        raise ConfigError(f"params.{field_name}: {msg}") from None

    theta = doc.get("theta")
    if theta is not None:
        theta = _number(theta, "theta")
        if theta <= 0:
            raise ConfigError("theta: must be positive")
    if exp in NEEDS_THETA and theta is None:
        raise ConfigError(f"theta: required for experiment {exp.value}")

    gd = doc.get("grid", {})
    _check_keys(gd, {"t_max", "points", "spacing"}, "grid")
    t_max = _number(gd.get("t_max", 1.0), "grid.t_max")
    if t_max <= 0:
        raise ConfigError("grid.t_max: must be positive")
    points = _number(gd.get("points", 256), "grid.points", integer=True)
    if points < 2:
        raise ConfigError("grid.points: must be at least 2")
    spacing = gd.get("spacing", "uniform")
    if spacing not in ("uniform", "geometric"):
        raise ConfigError(f"grid.spacing: unknown value {spacing!r}")

    md = doc.get("mc", {})
    _check_keys(md, {"n_paths", "base_seed"}, "mc")
    n_paths = _number(md.get("n_paths", 1), "mc.n_paths", integer=True)
    if n_paths < 1:
        raise ConfigError("mc.n_paths: must be at least 1")
    seed = _number(md.get("base_seed", 0), "mc.base_seed", integer=True)
    env = os.environ.get("GVP_SEED")
    if env not in (None, ""):
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"GVP_SEED: not an integer: {env!r}") from None
    if seed < 0:
        raise ConfigError("mc.base_seed: must be non-negative")

    od = doc.get("output", {})
    _check_keys(od, {"dir", "formats"}, "output")
    out_dir = od.get("dir", "gvp_out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir: expected a non-empty string")
    formats = od.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or not formats or any(f not in ("csv", "json") for f in formats):
        raise ConfigError("output.formats: expected a non-empty subset of ['csv', 'json']")

    opts = dict(OPTIONS[exp])
    given = doc.get("options", {})
    _check_keys(given, OPTIONS[exp], "options")
    opts.update(given)

    return ExperimentConfig(
        experiment=exp,
        params=params,
        grid=GridSpec(t_max=t_max, points=points, spacing=spacing),
        mc=MCSpec(n_paths=n_paths, base_seed=seed),
        output=OutputSpec(dir=out_dir, formats=tuple(sorted(set(formats)))),
        theta=theta,
        options=opts,
    )


# ---------------------------------------------------------------------------
# running


class CheckFailed(Exception):
    pass


@dataclass
class RunContext:
    config: ExperimentConfig
    out: Path
    threads: int
    check: bool
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def want(self, fmt: str) -> bool:
        return fmt in self.config.output.formats

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def write_json(self, name: str, obj) -> None:
        if self.want("json"):
            self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_rows(self, name: str, header: str, rows) -> None:
        if self.want("csv"):
            with open(self.path(name), "w") as fh:
                fh.write(header + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")

    def expect(self, ok: bool, what: str) -> None:
        self.summary.setdefault("checks", {})[what] = bool(ok)
        if not ok:
            self.failures.append(what)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def _grid(cfg: ExperimentConfig) -> np.ndarray:
    from gvp.simulate import geometric_grid, uniform_grid

    g = cfg.grid
    if g.spacing == "uniform":
        return uniform_grid(g.t_max, g.points)
    return geometric_grid(g.t_max, g.points)


CHUNK = 250


def _chunks(n: int, threads: int):
    # fixed size: BLAS results can depend on the block shape, so the split
    # must not depend on the thread count
    return [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]


def _simulate(ctx: RunContext, grid, method="cholesky", refinement=16):
    """All paths of the run, in stream order."""
    from gvp.simulate import PathBatch, simulate_paths

    cfg = ctx.config
    parts = _chunks(cfg.mc.n_paths, ctx.threads)

    def one(ab):
        a, b = ab
        return simulate_paths(cfg.params, grid, cfg.mc.base_seed, b - a, method, refinement=refinement, first=a)

    with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
        batches = list(pool.map(one, parts))
    values = np.concatenate([b.values for b in batches])
    return PathBatch(grid=batches[0].grid, values=values, seed=cfg.mc.base_seed, method=method, meta=dict(batches[0].meta))


def _estimates(ctx: RunContext, grid, Ts):
    from gvp.estimate import estimate_batch
    from gvp.limits import eta_second_moment
    from gvp.simulate import OUModel

    cfg = ctx.config
    m = OUModel(cfg.params, cfg.theta)
    batch = _simulate(ctx, grid)
    eta2 = eta_second_moment(cfg.params, cfg.theta).value
    parts = _chunks(len(batch), ctx.threads)

    def one(ab):
        from gvp.simulate import PathBatch

        a, b = ab
        sub = PathBatch(grid, batch.values[a:b], batch.seed, batch.method, {"first_stream": a})
        return estimate_batch(m, sub, Ts, eta2=eta2)

    with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
        res = list(pool.map(one, parts))
    return _merge(res), eta2


def _merge(res):
    from gvp.estimate import BatchEstimates

    cat = lambda name: np.concatenate([getattr(r, name) for r in res])  # noqa: E731
    return BatchEstimates(
        T=res[0].T,
        streams=cat("streams"),
        seed=res[0].seed,
        theta=res[0].theta,
        theta_hat=cat("theta_hat"),
        a_T=cat("a_T"),
        b_T=cat("b_T"),
        c_T=cat("c_T"),
        lhs=cat("lhs"),
        normalized=cat("normalized"),
    )


def _times(ctx: RunContext, grid, default):
    """Requested estimation times; defaults snap to the nearest grid point."""
    from gvp.simulate import _index_of

    Ts = ctx.config.options.get("T")
    if Ts is None:
        return sorted({float(grid[np.argmin(np.abs(grid - T))]) for T in default})
    try:
        return [float(grid[_index_of(grid, float(T))]) for T in np.atleast_1d(Ts)]
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"options.T: {exc}") from None


def _estimate_rows(est):
    for i, s in enumerate(est.streams):
        for k, T in enumerate(est.T):
            yield (int(s), T, est.theta_hat[i, k], est.a_T[i, k], est.b_T[i, k], est.c_T[i, k], est.normalized[i, k])


EST_HEADER = "seed,T,theta_hat,a_T,b_T,c_T,normalized_error"


def run_simulate(ctx: RunContext) -> None:
    from gvp.simulate import ou_from_x, write_paths

    cfg = ctx.config
    grid = _grid(cfg)
    opts = cfg.options
    batch = _simulate(ctx, grid, opts["method"], int(opts["refinement"]))
    z = ou_from_x(batch.values, grid, cfg.theta) if cfg.theta is not None else None

    def rows():
        for i in range(len(batch)):
            for j, t in enumerate(grid):
                yield (i, t, batch.values[i, j]) + ((z[i, j],) if z is not None else ())

    ctx.write_rows("paths.csv", "stream,t,x" + (",z" if z is not None else ""), rows())
    write_paths(ctx.path("paths.gvp"), batch, theta=cfg.theta)
    ctx.summary.update(n_paths=len(batch), points=int(grid.size))


def run_cov(ctx: RunContext) -> None:
    from gvp.covariance import grid_cov

    grid = _grid(ctx.config)
    cm = grid_cov(ctx.config.params, grid[1:])
    if ctx.want("csv"):
        cm.to_csv(ctx.path("cov.csv"))
    ctx.summary.update(points=int(cm.grid.size), assembly_tol=cm.assembly_tol)
    ctx.expect(bool(np.all(np.linalg.eigvalsh(cm.entries) > -1e-10 * cm.entries.max())), "positive_semidefinite")


def run_classify(ctx: RunContext) -> None:
    from gvp.dependence import classify, correlation_curve, increment_limit

    p = ctx.config.params
    rep = classify(p).to_dict()
    lim = increment_limit(p)
    rep["increment_limit"] = {"kind": lim.kind.value, "hurst": lim.hurst, "constant": lim.constant}
    ctx.write_json("classify.json", rep)
    ts = ctx.config.options.get("corr_times") or list(np.geomspace(1e2, 1e4, 9))
    curve = correlation_curve(p, np.asarray(ts, dtype=float))
    if ctx.want("csv"):
        curve.to_csv(ctx.path("correlation.csv"))
    ctx.summary.update(cov_class=rep["cov_class"], corr_class=rep["corr_class"])


def run_estimate(ctx: RunContext) -> None:
    grid = _grid(ctx.config)
    Ts = _times(ctx, grid, [grid[-1]])
    est, eta2 = _estimates(ctx, grid, Ts)
    ctx.write_rows("estimates.csv", EST_HEADER, _estimate_rows(est))
    resid = np.abs(est.lhs - (est.a_T * est.b_T + est.c_T)) / np.abs(est.lhs)
    ctx.summary.update(eta2=eta2, max_identity_residual=float(resid.max()), median_b_T=float(np.median(est.b_T[:, -1])))
    ctx.expect(float(resid.max()) < 1e-3, "decomposition_identity")


def run_mc_consistency(ctx: RunContext) -> None:
    from gvp.estimate import quantile_table

    grid = _grid(ctx.config)
    t_max = grid[-1]
    Ts = _times(ctx, grid, [t_max / 3, 2 * t_max / 3, t_max])
    est, _ = _estimates(ctx, grid, Ts)
    rows = quantile_table(est.theta_hat, est.T, ctx.config.theta)
    ctx.write_rows("consistency.csv", "T,q,theta_hat,abs_error", rows)
    med = [float(np.median(np.abs(est.theta_hat[:, k] - ctx.config.theta))) for k in range(len(Ts))]
    ctx.summary.update(T=[float(t) for t in est.T], median_abs_error=med)
    ctx.expect(all(b < a for a, b in zip(med, med[1:])), "median_error_decreasing")


def run_mc_cauchy(ctx: RunContext) -> None:
    grid = _grid(ctx.config)
    Ts = _times(ctx, grid, [grid[-1]])
    est, eta2 = _estimates(ctx, grid, Ts)
    ctx.write_rows("estimates.csv", EST_HEADER, _estimate_rows(est))
    ks = {}
    for k, T in enumerate(est.T):
        r = stats.kstest(est.normalized[:, k], "cauchy")
        ks[repr(float(T))] = {"statistic": float(r.statistic), "pvalue": float(r.pvalue)}
    last = ks[repr(float(est.T[-1]))]
    ctx.write_json("ks.json", {"eta2": eta2, "ks": ks, "n_paths": len(est.streams), **last})
    ctx.summary.update(ks_statistic=last["statistic"], ks_pvalue=last["pvalue"])
    ctx.expect(last["statistic"] <= float(ctx.config.options["ks_max_statistic"]), "ks_statistic")


def run_lil_check(ctx: RunContext) -> None:
    from gvp.limits import growth_envelope

    grid = _grid(ctx.config)
    batch = _simulate(ctx, grid)
    env = growth_envelope(batch, ctx.config.params)
    rows = ((i, s, t) for i, (s, t) in enumerate(zip(env.statistic, env.tail)))
    ctx.write_rows("lil.csv", "stream,statistic,tail", rows)
    q95 = env.quantile(0.95)
    ratio = q95 / env.sigma
    ctx.write_json("lil.json", {"sigma": env.sigma, "tail_q95": q95, "ratio": ratio})
    ctx.summary.update(tail_q95_over_sigma=ratio)
    ctx.expect(ratio <= float(ctx.config.options["max_ratio"]), "tail_quantile")


def run_eta2(ctx: RunContext) -> None:
    from gvp.limits import eta_second_moment

    cfg = ctx.config
    p, th = cfg.params, cfg.theta
    h = eta_second_moment(p, th, "hypergeometric_1d")
    b = eta_second_moment(p, th, "brute_2d")
    out = {"hypergeometric_1d": h.value, "brute_2d": b.value, "relative_difference": abs(h.value - b.value) / h.value}
    ctx.expect(out["relative_difference"] < 1e-6, "hypergeometric_vs_brute")
    if cfg.mc.n_paths > 1:
        mc = eta_second_moment(
            p, th, "monte_carlo", n_paths=cfg.mc.n_paths, T=float(cfg.options["mc_T"]),
            points=int(cfg.options["mc_points"]), seed=cfg.mc.base_seed,
        )
        out.update(monte_carlo=mc.value, monte_carlo_stderr=mc.est_error)
        ctx.expect(abs(mc.value - h.value) <= 3 * mc.est_error, "monte_carlo_within_3_stderr")
    ctx.write_json("eta2.json", out)
    ctx.summary.update(out)


def run_rates(ctx: RunContext) -> None:
    from gvp.limits import first_expectation_ratio, h_ratio_convergence

    cfg = ctx.config
    Ts = np.asarray(cfg.options["T"], dtype=float)
    tol = float(cfg.options["tolerance"])
    for name, fn in (("h_ratio", h_ratio_convergence), ("first_expectation", first_expectation_ratio)):
        series = fn(cfg.params, cfg.theta, Ts)
        if ctx.want("csv"):
            series.to_csv(ctx.path(f"{name}.csv"))
        err = abs(series.ratio[-1] / series.limit - 1.0)
        ctx.summary[f"{name}_relative_error"] = float(err)
        ctx.expect(err < tol, f"{name}_within_tolerance")


RUNNERS = {
    Experiment.SIMULATE: run_simulate,
    Experiment.COV: run_cov,
    Experiment.CLASSIFY: run_classify,
    Experiment.ESTIMATE: run_estimate,
    Experiment.MC_CONSISTENCY: run_mc_consistency,
    Experiment.MC_CAUCHY: run_mc_cauchy,
    Experiment.LIL_CHECK: run_lil_check,
    Experiment.ETA2: run_eta2,
    Experiment.RATES: run_rates,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def run(config: ExperimentConfig, *, threads: int | None = None, check: bool = False) -> dict:
    """Run one experiment and return its manifest.

    Raises :class:`CheckFailed` (after writing all outputs) when ``check`` is
    set and an acceptance check fails.
    """
    out = Path(config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(config=config, out=out, threads=max(1, threads or os.cpu_count() or 1), check=check)
    start = time.perf_counter()
    RUNNERS[config.experiment](ctx)
    ctx.write_json("summary.json", ctx.summary)
    manifest = {
        "experiment": config.experiment.value,
        "config_hash": config.digest(),
        "config": config.canonical(),
        "version": __version__,
        "wall_time": time.perf_counter() - start,
        "files": {name: _sha256(out / name) for name in sorted(set(ctx.files))},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if check and ctx.failures:
        raise CheckFailed(", ".join(ctx.failures))
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gvp", description="Gaussian Volterra process experiments.")
    ap.add_argument("experiment", choices=[e.value for e in Experiment])
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    ap.add_argument("--check", action="store_true", help="exit with status 4 if an acceptance check fails")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.experiment)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        manifest = run(cfg, threads=args.threads, check=args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, FactorizationError, ConvergenceError, DegenerateError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    print(json.dumps({"output": cfg.output.dir, "files": manifest["files"]}, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
