"""``sepp-green`` command line: ingest, simulate, fit, predict, backtest, kernel-export.

Every subcommand reads a YAML run config (``-c``), applies ``--set
section.key=value`` overrides and the shortcut flags, writes the fully
resolved config to ``<output_dir>/resolved_config.yaml`` and then its
artifacts next to it. Exit status: 0 on success, 2 for missing inputs or
invalid configuration, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .baselines import KdeKernel, PhmKernel, kde_intensity
from .config import ConfigError, RunConfig
from .ddgf import EmptyWindowError, default_r_targets, estimate_phi, solve_kernel
from .em import em_fit, em_kernel
from .evaluate import UndefinedHitRate, backtest
from .gridding import GridSpec, rasterize
from .hawkes_sim import SimSpec, SupercriticalError, simulate, write_sidecar
from .ingest import CatalogError, ColumnMapping, EventCatalog, filter_catalog, parse_catalog, read_canonical, write_canonical
from .kernels import LINEAR, TriggerKernel, kernel_diagnostics
from .methods import build
from .predict import PredictConfig, intensity_map
from .spectral import SpectralError
from .svg import line_chart

log = logging.getLogger("sepp_green")

EXIT_INPUT = 2
EXIT_NUMERIC = 3


class InputError(Exception):
    pass


# -- helpers -------------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _grid(cfg: RunConfig, nt: int) -> GridSpec:
    return GridSpec.for_disc(cfg.data.radius_km, cfg.grid.dx_km, cfg.grid.dt_days, nt)


def _mapping(cfg: RunConfig) -> ColumnMapping:
    d = cfg.data
    return ColumnMapping(d.date_column, d.latitude_column, d.longitude_column, d.kind_column, d.date_format)


def _ingest_raw(cfg: RunConfig) -> tuple[EventCatalog, int]:
    d = cfg.data
    center = (d.center_lat, d.center_lon)
    raw, skipped = parse_catalog(_require(d.path, "data.path"), _mapping(cfg), center=center)
    if d.kinds:
        raw = raw.of_kind(*d.kinds)
    return filter_catalog(raw, center, d.radius_km, d.start_date, d.end_date), skipped


def _require(path: str | None, what: str) -> str:
    if not path:
        raise InputError(f"{what} is not set")
    if not Path(path).is_file():
        raise InputError(f"{what}: no such file {path}")
    return path


def _dataset(cfg: RunConfig) -> EventCatalog:
    if cfg.data.format == "raw":
        return _ingest_raw(cfg)[0]
    return read_canonical(_require(cfg.data.path, "data.path"))


def _days(catalog: EventCatalog, dt: float) -> int:
    return int(math.floor(catalog.t.max() / dt)) + 1 if len(catalog) else 0


def _tabulate(kernel, cfg: RunConfig, n_lags: int) -> TriggerKernel:
    """Sample a closed-form kernel onto the same lag x radius table a fitted one uses."""
    dx = cfg.grid.dx_km
    r = default_r_targets(dx, 2 * cfg.data.radius_km * math.sqrt(2))
    lags = np.arange(n_lags + 1) * cfg.grid.dt_days
    g = kernel.evaluate(lags[:, None], r[None, :])
    return TriggerKernel(g, lags, r, cfg.grid.dt_days, dx, interpolation=LINEAR, method=kernel.method)


def _load_kernel(cfg: RunConfig):
    m = cfg.method
    if m == "phm":
        return PhmKernel(replace(cfg.phm, dx=cfg.grid.dx_km))
    if m == "kde":
        return KdeKernel(cfg.kde, cfg.grid.dx_km)
    return TriggerKernel.from_csv(_require(cfg.kernel_path, "kernel_path"))


# -- subcommands ---------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> None:
    cat, skipped = _ingest_raw(cfg)
    out = _out(cfg)
    with open(out / "catalog.csv", "w") as fh:
        write_canonical(cat, fh)
    log.info("ingested %d events (%d rows skipped)", len(cat), skipped)


def cmd_simulate(cfg: RunConfig) -> None:
    s = cfg.simulation
    mu = s.expected_events * (1 - s.branching) / (math.pi * s.radius_km ** 2 * s.per_days)
    spec = SimSpec(mu=mu, branching=s.branching, omega=s.omega, sigma=s.sigma, radius_km=s.radius_km,
                   horizon=s.horizon, seed=s.seed, epoch=s.epoch)
    cat = simulate(spec, (cfg.data.center_lat, cfg.data.center_lon))
    out = _out(cfg)
    with open(out / "catalog.csv", "w") as fh:
        write_canonical(cat, fh)
    with open(out / "simulation.json", "w") as fh:
        write_sidecar(spec, fh)
    log.info("simulated %d events", len(cat))


def cmd_fit(cfg: RunConfig) -> None:
    cat = _dataset(cfg)
    if len(cat) == 0:
        raise InputError("catalog has no events")
    nt = _days(cat, cfg.grid.dt_days)
    grid = _grid(cfg, nt)
    out = _out(cfg)
    if cfg.method == "ddgf":
        op = estimate_phi(rasterize(cat, grid), cfg.ddgf.nt_lag, cfg.ddgf.weighting)
        with open(out / "phi.csv", "w") as fh:
            op.to_csv(fh)
        r_max = cfg.ddgf.r_max or math.hypot(grid.nx * grid.dx, grid.ny * grid.dx)
        kernel = solve_kernel(op, cfg.ddgf, default_r_targets(grid.dx, r_max, cfg.ddgf.r_step))
    elif cfg.method == "em":
        model = em_fit(cat, math.pi * grid.radius_km ** 2, nt * grid.dt,
                       replace(cfg.em, dt=grid.dt, dx=grid.dx))
        with open(out / "em_model.json", "w") as fh:
            fh.write(model.to_json())
        kernel = em_kernel(model)
    elif cfg.method == "phm":
        kernel = _tabulate(_load_kernel(cfg), cfg, int(cfg.phm.t_cut or 400))
    else:
        raise InputError("method kde has no trigger kernel to fit")
    with open(out / "kernel.csv", "w") as fh:
        kernel.to_csv(fh)


def cmd_predict(cfg: RunConfig) -> None:
    cat = _dataset(cfg)
    kernel = _load_kernel(cfg)
    days = cat.day_index(cfg.grid.dt_days)
    target = cfg.predict.target_day
    if target is None:
        target = int(days.max()) + 1 if len(cat) else 0
    history = cat.window(0, target * cfg.grid.dt_days)
    grid = _grid(cfg, max(target, 1))
    if cfg.method == "kde":
        imap = kde_intensity(history, grid, cfg.kde, target)
    else:
        try:
            imap = intensity_map(kernel, history, target, grid,
                                 PredictConfig(r_cut=cfg.protocol.r_cut, negative=cfg.predict.negative))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    out = _out(cfg)
    with open(out / "intensity.csv", "w") as fh:
        imap.to_csv(fh)
    with open(out / "ranking.csv", "w") as fh:
        imap.rank_csv(fh)


def cmd_backtest(cfg: RunConfig) -> None:
    cat = _dataset(cfg)
    if len(cat) == 0:
        raise InputError("dataset has no events")
    grid = _grid(cfg, cfg.protocol.training_days)
    methods = {m: build(m, r_cut=cfg.protocol.r_cut, ddgf=cfg.ddgf, em=cfg.em, phm=cfg.phm, kde=cfg.kde,
                        negative=cfg.predict.negative) for m in cfg.methods}
    report = backtest(cat, methods, cfg.protocol, grid, workers=cfg.workers,
                      on_sample=lambda s: log.info("sample %d/%d done", s + 1, cfg.protocol.samples))
    out = _out(cfg)
    (out / "report.json").write_text(report.to_json())
    with open(out / "table.csv", "w") as fh:
        report.table_csv(fh, label=",".join(cfg.data.kinds) or "all")
    with open(out / "curves.csv", "w") as fh:
        report.curves_csv(fh)
    pct = 100 * report.fractions
    hits = {m: report.mean_curve(m)[0] for m in report.methods}
    pais = {m: report.mean_curve(m)[1] for m in report.methods}
    with open(out / "hit_rate.svg", "w") as fh:
        line_chart(fh, pct, hits, title="Mean hit rate", xlabel="area (%)", ylabel="hit rate")
    with open(out / "pai.svg", "w") as fh:
        line_chart(fh, pct, pais, title="Mean PAI", xlabel="area (%)", ylabel="PAI")
    for m in report.methods:
        h, p = report.summary(m)
        print(f"{m}: hit {h:.1f}%  PAI {p:.2f}")


def cmd_kernel_export(cfg: RunConfig) -> None:
    kernel = TriggerKernel.from_csv(_require(cfg.kernel_path, "kernel_path"))
    ke = cfg.kernel_export
    diag = kernel_diagnostics(kernel, (ke.fit_lo, ke.fit_hi))
    lags, g0 = kernel.at_origin()
    out = _out(cfg)
    with open(out / "g_r0.csv", "w") as fh:
        fh.write("lag_days,g_value\n")
        for t, g in zip(lags, g0):
            fh.write(f"{float(t)!r},{float(g)!r}\n")
    fit = None if diag.fit is None else {"a": diag.fit.a, "b": diag.fit.b, "r2": diag.fit.r2,
                                         "n_points": diag.fit.n_points, "degenerate": diag.fit.degenerate}
    payload = {"method": kernel.method, "fit_range": [ke.fit_lo, ke.fit_hi], "peaks": diag.peaks, "fit": fit}
    (out / "tail_fit.json").write_text(json.dumps(payload, indent=2) + "\n")
    with open(out / "g_r0.svg", "w") as fh:
        line_chart(fh, lags, {kernel.method or "g": g0}, title="g(t, r=0)", xlabel="lag (days)", ylabel="g")


COMMANDS = {
    "ingest": cmd_ingest,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "backtest": cmd_backtest,
    "kernel-export": cmd_kernel_export,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepp-green", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("-c", "--config", help="YAML run config (defaults apply when omitted)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set protocol.samples=20")
    p.add_argument("-o", "--output-dir", help="shortcut for output_dir")
    p.add_argument("-i", "--input", help="shortcut for data.path")
    p.add_argument("-k", "--kernel", help="shortcut for kernel_path")
    p.add_argument("-m", "--method", help="shortcut for method")
    p.add_argument("--day", type=int, help="shortcut for predict.target_day")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    for flag, key in ((args.output_dir, "output_dir"), (args.input, "data.path"),
                      (args.kernel, "kernel_path"), (args.method, "method"), (args.day, "predict.target_day")):
        if flag is not None:
            overrides.append(f"{key}={json.dumps(flag)}")
    try:
        cfg = cfgmod.load(args.config, overrides)
        (_out(cfg) / "resolved_config.yaml").write_text(cfgmod.dump(cfg))
        COMMANDS[args.command](cfg)
    except (ConfigError, InputError, CatalogError, FileNotFoundError, UndefinedHitRate,
            SupercriticalError) as exc:
        print(f"sepp-green {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SpectralError, EmptyWindowError, FloatingPointError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sepp-green {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
