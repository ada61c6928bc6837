"""Command-line interface: simulate, fit, bench, and cdf subcommands.

A JSON config file may supply defaults per subcommand; command-line flags
win over file values.  Every artifact gets a JSON sidecar embedding the
fully resolved configuration and seeds.  Exit codes: 0 success, 2 config
error, 3 data error, 4 numeric failure, 5 non-convergence.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from dataclasses import asdict, dataclass

import click
import numpy as np

from .exponent import ModelSpec
from .inference import benchmark, fit_dependence
from .likelihood import (
    LikelihoodError,
    MaximaDataset,
    derive_hitting_scenarios,
    select_tuples,
)
from .qmc_cdf import QmcConfig, QmcPreset, mvn_cdf, mvt_cdf, table_preset
from .simulate import labels_to_partition, simulate_extremal_skew_t, simulate_extremal_t
from .spatial import CorrelationConfig, PositiveDefiniteError, SiteSet, sites_from_csv, uniform_sites

__all__ = ["main", "RunConfig", "run"]

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_NOCONV = 5

_FMT = "%.17g"  # round-trip fidelity for doubles


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one CLI invocation, written to sidecars."""

    command: str
    family: str
    sites_csv: str | None
    d: int | None
    sites_seed: int | None
    r: float
    eta: float
    nu: float
    slant: tuple
    tau: float
    objective: str | None
    j: int | None
    tuple_target: int | None
    u: float | None
    preset: str
    epsilon: float
    seed: int
    replicates: int | None
    n_blocks: int | None
    threads: int
    output: str
    data_path: str | None = None
    dates_path: str | None = None
    labels_path: str | None = None
    nu_grid: tuple = ()

    def __post_init__(self):
        if self.objective == "cl" and (self.j is None or self.j < 2):
            raise ValueError("composite objective requires j >= 2")


class DataError(ValueError):
    pass


def _threads(flag: int | None) -> int:
    env = os.environ.get("EXTREMALST_THREADS")
    if flag is not None:
        return flag
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise click.UsageError(f"EXTREMALST_THREADS={env!r} is not an integer") from exc
    return os.cpu_count() or 1


def _sites(sites_csv, d, sites_seed) -> SiteSet:
    if sites_csv:
        try:
            return sites_from_csv(sites_csv)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read sites from {sites_csv}: {exc}") from exc
    if d is None:
        raise click.UsageError("give either --sites-csv or --d")
    return uniform_sites(d, sites_seed if sites_seed is not None else 0)


def _model(family, r, eta, nu, slant, tau) -> ModelSpec:
    return ModelSpec(family=family, corr=CorrelationConfig(r=r, eta=eta),
                     slant_coeffs=tuple(slant), tau=tau, nu=nu)


def _preset(name: str, epsilon: float, j, seed: int) -> QmcPreset:
    if name == "custom":
        cfg = QmcConfig(epsilon=epsilon, n_min=50, n_max=500, seed=seed)
        return QmcPreset(exponent_cfg=cfg,
                         partial_cfg=QmcConfig(epsilon=epsilon, n_min=50, n_max=500,
                                               seed=seed, log_scale=True))
    kind = j if name == "by-j" else name
    return table_preset(kind, epsilon=epsilon, seed=seed)


def _write_matrix(path: str, mat: np.ndarray, header: list[str]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.atleast_2d(mat):
            w.writerow([_FMT % v for v in row])


def _read_matrix(path: str) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path} has no data rows")
    try:
        return np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise DataError(f"non-numeric value in {path}: {exc}") from exc


def _sidecar(path: str, config: RunConfig, extra: dict):
    payload = {"config": asdict(config)}
    payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def run(config: RunConfig) -> int:
    """Dispatch one resolved configuration; returns the process exit code."""
    try:
        if config.command == "simulate":
            return _run_simulate(config)
        if config.command == "fit":
            return _run_fit(config)
        if config.command == "bench":
            return _run_bench(config)
        raise click.UsageError(f"unknown command {config.command!r}")
    except (click.UsageError, ValueError) as exc:
        if isinstance(exc, DataError):
            click.echo(f"data error: {exc}", err=True)
            return EXIT_DATA
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (PositiveDefiniteError, LikelihoodError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        return EXIT_NUMERIC


def _run_simulate(config: RunConfig) -> int:
    sites = _sites(config.sites_csv, config.d, config.sites_seed)
    model = _model(config.family, config.r, config.eta, config.nu,
                   config.slant, config.tau)
    simulate = (simulate_extremal_t if model.family == "extremal-t"
                else simulate_extremal_skew_t)
    out = simulate(sites, model, config.n_blocks, config.seed)
    header = [f"site_{k}" for k in range(sites.d)]
    _write_matrix(config.output + "_Z.csv", out.Z, header)
    _write_matrix(config.output + "_H.csv", out.H, header)
    _sidecar(config.output + ".json", config,
             {"sites": sites.coords.tolist(), "n_blocks": config.n_blocks})
    return 0


def _run_fit(config: RunConfig) -> int:
    sites = _sites(config.sites_csv, config.d, config.sites_seed)
    Z = _read_matrix(config.data_path)
    if Z.shape[1] != sites.d:
        raise DataError("data column count does not match the site count")
    scenarios = None
    if config.dates_path:
        dates = _read_matrix(config.dates_path)
        if dates.shape != Z.shape:
            raise DataError("dates shape does not match the data shape")
        scenarios = tuple(derive_hitting_scenarios(row) for row in dates)
    elif config.labels_path:
        labels = _read_matrix(config.labels_path)
        if labels.shape != Z.shape:
            raise DataError("labels shape does not match the data shape")
        scenarios = tuple(labels_to_partition(row.astype(int)) for row in labels)
    try:
        data = MaximaDataset(sites=sites, Z=Z, scenarios=scenarios)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    model = _model(config.family, config.r, config.eta, config.nu,
                   config.slant, config.tau)
    preset = _preset(config.preset, config.epsilon, config.j, config.seed)
    selection = None
    if config.objective == "cl":
        selection = (select_tuples(sites, config.j, target_count=config.tuple_target)
                     if config.tuple_target else
                     select_tuples(sites, config.j, u=config.u))
    fit = fit_dependence(data, model, objective=config.objective, cfg=preset,
                         j=config.j, selection=selection,
                         use_scenarios=scenarios is not None and config.objective == "cl",
                         nu=list(config.nu_grid) if config.nu_grid else None,
                         seed=config.seed)
    _sidecar(config.output, config, {
        "estimates": fit.estimates,
        "loglik": fit.loglik,
        "evaluations": fit.evaluations,
        "wall_time": fit.wall_time,
        "converged": fit.converged,
        "nu_grid_table": fit.nu_grid_table,
    })
    return 0 if fit.converged else EXIT_NOCONV


def _run_bench(config: RunConfig) -> int:
    sites = _sites(config.sites_csv, config.d, config.sites_seed)
    model = _model(config.family, config.r, config.eta, config.nu,
                   config.slant, config.tau)
    preset = _preset(config.preset, config.epsilon, config.j, config.seed)
    selection = None
    if config.objective == "cl":
        selection = select_tuples(sites, config.j,
                                  target_count=config.tuple_target or 50)
    res = benchmark(sites, model, config.n_blocks, config.replicates,
                    objective=config.objective, cfg=preset, j=config.j,
                    selection=selection, processes=config.threads,
                    seed=config.seed)
    with open(config.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "d", "eta", "r", "nu", "j", "approx_type",
                    "parameter", "bias", "sd", "rmse", "mean_time_s"])
        for name, st in sorted(res["stats"].items()):
            w.writerow([
                config.family, sites.d, _FMT % config.eta, _FMT % config.r,
                _FMT % config.nu, config.j if config.j is not None else "",
                config.objective, name, _FMT % st.bias, _FMT % st.sd,
                _FMT % st.rmse, _FMT % st.mean_time,
            ])
    _sidecar(config.output + ".json", config, {
        "converged": res["converged"].tolist(),
        "times": res["times"].tolist(),
        "estimates": {k: v.tolist() for k, v in res["estimates"].items()},
    })
    return 0 if bool(res["converged"].all()) else EXIT_NOCONV


def _load_defaults(ctx, param, value):
    if value:
        try:
            with open(value) as fh:
                ctx.default_map = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config file {value}: {exc}")
    return value


_common = [
    click.option("--family", type=click.Choice(["extremal-t", "extremal-skew-t"]),
                 default="extremal-t", show_default=True),
    click.option("--sites-csv", type=str, default=None,
                 help="CSV of site_id,x,y; overrides --d."),
    click.option("--d", type=int, default=None, help="Number of uniform random sites."),
    click.option("--sites-seed", type=int, default=0, show_default=True),
    click.option("--r", type=float, default=3.0, show_default=True,
                 help="Correlation range."),
    click.option("--eta", type=float, default=1.0, show_default=True,
                 help="Correlation smoothness in (0, 2]."),
    click.option("--nu", type=float, default=1.0, show_default=True,
                 help="Degrees of freedom."),
    click.option("--slant", type=float, multiple=True,
                 help="Slant coefficients (2 or 3 values; repeat the flag)."),
    click.option("--tau", type=float, default=0.0, show_default=True,
                 help="Extension parameter."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--threads", type=int, default=None,
                 help="Worker count; EXTREMALST_THREADS overrides the default."),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group()
@click.option("--config", type=str, default=None, callback=_load_defaults,
              expose_value=False, is_eager=True,
              help="JSON file of per-subcommand defaults; flags win.")
def main():
    """Exact simulation and likelihood inference for extremal-t and
    extremal skew-t max-stable processes."""


def _dispatch(command, **kw) -> int:
    try:
        config = _build_config(command, **kw)
    except (click.UsageError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    return run(config)


def _build_config(command, **kw) -> RunConfig:
    cfg = RunConfig(
        command=command,
        family=kw["family"],
        sites_csv=kw.get("sites_csv"),
        d=kw.get("d"),
        sites_seed=kw.get("sites_seed"),
        r=kw["r"], eta=kw["eta"], nu=kw["nu"],
        slant=tuple(kw.get("slant") or ()), tau=kw["tau"],
        objective=kw.get("objective"),
        j=kw.get("j"),
        tuple_target=kw.get("tuple_target"),
        u=kw.get("u"),
        preset=kw.get("preset", "type-I"),
        epsilon=kw.get("epsilon", 1e-3),
        seed=kw["seed"],
        replicates=kw.get("replicates"),
        n_blocks=kw.get("n_blocks"),
        threads=_threads(kw.get("threads")),
        output=kw["output"],
        data_path=kw.get("data"),
        dates_path=kw.get("dates"),
        labels_path=kw.get("labels"),
        nu_grid=tuple(kw.get("nu_grid") or ()),
    )
    return cfg


@main.command("simulate")
@_with_common
@click.option("--n-blocks", "-N", type=int, required=True, help="Replicate count.")
@click.option("--output", "-o", type=str, required=True,
              help="Output prefix; writes _Z.csv, _H.csv, .json.")
def simulate_cmd(**kw):
    """Simulate exact replicates and their hitting labels."""
    sys.exit(_dispatch("simulate", **kw))


@main.command("fit")
@_with_common
@click.option("--data", type=str, required=True, help="Wide CSV of maxima (row=block).")
@click.option("--dates", type=str, default=None,
              help="CSV of event dates matching --data; derives scenarios.")
@click.option("--labels", type=str, default=None,
              help="CSV of hitting labels matching --data (e.g. simulate's _H.csv).")
@click.option("--objective", type=click.Choice(["st", "full", "cl"]), default="full",
              show_default=True)
@click.option("--j", type=int, default=None, help="Composite tuple size.")
@click.option("--tuple-target", type=int, default=None)
@click.option("--u", type=float, default=None, help="Tuple diameter threshold.")
@click.option("--preset", type=click.Choice(["type-I", "type-II", "by-j", "custom"]),
              default="type-I", show_default=True)
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
@click.option("--nu-grid", type=float, multiple=True,
              help="Grid of nu values to search (repeat the flag).")
@click.option("--output", "-o", type=str, required=True, help="FitResult JSON path.")
def fit_cmd(**kw):
    """Fit dependence parameters to unit-Fréchet maxima."""
    sys.exit(_dispatch("fit", **kw))


@main.command("bench")
@_with_common
@click.option("--n-blocks", "-N", type=int, required=True)
@click.option("--replicates", type=int, required=True)
@click.option("--objective", type=click.Choice(["st", "full", "cl"]), default="st",
              show_default=True)
@click.option("--j", type=int, default=None)
@click.option("--tuple-target", type=int, default=None)
@click.option("--preset", type=click.Choice(["type-I", "type-II", "by-j", "custom"]),
              default="type-II", show_default=True)
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
@click.option("--output", "-o", type=str, required=True, help="BenchStats CSV path.")
def bench_cmd(**kw):
    """Simulate-and-refit benchmark grid at configured scale."""
    sys.exit(_dispatch("bench", **kw))


@main.command("cdf")
@click.option("--upper", type=str, required=True, help="Comma-separated limits.")
@click.option("--rho", type=float, default=0.0, show_default=True,
              help="Exchangeable correlation.")
@click.option("--nu", type=float, default=None, help="If set, t cdf; else normal.")
@click.option("--noncentrality", type=str, default=None,
              help="Comma-separated shifts (t only).")
@click.option("--epsilon", type=float, default=1e-3, show_default=True)
@click.option("--n-max", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cdf_cmd(upper, rho, nu, noncentrality, epsilon, n_max, seed):
    """Debug access to the QMC distribution-function engine."""
    try:
        lim = np.array([float(v) for v in upper.split(",")])
        d = lim.size
        corr = np.full((d, d), rho)
        np.fill_diagonal(corr, 1.0)
        cfg = QmcConfig(epsilon=epsilon, n_min=min(50, n_max), n_max=n_max, seed=seed)
        if nu is None:
            res = mvn_cdf(lim, corr, cfg)
        else:
            delta = (np.array([float(v) for v in noncentrality.split(",")])
                     if noncentrality else np.zeros(d))
            res = mvt_cdf(lim, corr, delta, nu, cfg)
    except (ValueError, PositiveDefiniteError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(json.dumps({
        "value": res.value, "log_value": res.log_value,
        "err_estimate": res.err_estimate, "points_used": res.points_used,
        "converged": res.converged,
    }))
    sys.exit(0 if res.converged else EXIT_NOCONV)


if __name__ == "__main__":
    main()
