"""Experiment runner CLI: asset generation, reconstruction, and sweeps.

Subcommands: `mask`, `phantom`, `recon`, `bench`. Configuration comes from
an optional JSON file (with a `version` field) plus command-line flags;
flags win. All numeric outputs are seeded and deterministic, so repeated
runs with one config produce identical results except wall-clock columns.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.
"""

import csv
import json
import os
import sys
import time

import click
import numpy as np

from kdac import dac, filterbank, metrics, phantom_io, sampling, solvers
from kdac.grid import fft2

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

CONFIG_VERSION = 1

CSV_COLUMNS = ["input", "mask_kind", "ratio", "seed", "bank", "solver",
               "sigma", "psnr_db", "ssim", "hfen", "wall_ms"]

BANKS = ("none", "horivert", "gaussian")
SOLVERS = ("zero_fill", "fista_l1", "fcsa")

_RECON_KEYS = {
    "version", "input", "mask_kind", "ratio", "seed", "bank", "solver",
    "sigma", "out", "mu", "alpha", "beta", "outer_iters", "max_outer", "tol",
}
_BENCH_KEYS = {
    "version", "input", "mask_kinds", "ratios", "banks", "sigmas", "solver",
    "seed", "out", "continue_on_error", "export_pngs",
    "mu", "alpha", "beta", "outer_iters", "max_outer", "tol",
}


class ConfigError(click.ClickException):
    exit_code = EXIT_CONFIG


def _fail_io(msg):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_IO)


def _load_config(path, allowed):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        _fail_io(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config {path}: version must be {CONFIG_VERSION}")
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
    return cfg


def _merge(file_cfg, defaults, **flags):
    merged = dict(defaults)
    merged.update({k: v for k, v in file_cfg.items() if k != "version"})
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _threads():
    raw = os.environ.get("KDAC_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"KDAC_THREADS must be an integer, got {raw!r}")


def _load_input(spec_str):
    if spec_str == "phantom":
        return phantom_io.make_phantom(256), "phantom"
    try:
        grid, kind = phantom_io.read_grid(spec_str)
    except OSError as exc:
        _fail_io(f"cannot read input {spec_str}: {exc}")
    except phantom_io.GridFormatError as exc:
        raise ConfigError(str(exc))
    if kind != phantom_io.KIND_IMAGE:
        raise ConfigError(f"input {spec_str} is not a complex image grid")
    return grid, os.path.basename(spec_str)


def _build_bank(name, n):
    if name == "horivert":
        return filterbank.build_horivert(n)
    if name == "gaussian":
        return filterbank.build_gaussian(n)
    raise ConfigError(f"unknown bank {name!r}")


def _solver_fn(name):
    return {"zero_fill": solvers.zero_fill_solver,
            "fista_l1": solvers.fista_l1,
            "fcsa": solvers.fcsa}[name]


def _fmt(x):
    if x == float("inf"):
        return "inf"
    return f"{x:.10g}"


def _append_csv(path, row):
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(CSV_COLUMNS)
        w.writerow(row)


def _run_cell(ref, input_name, mask_kind, ratio, seed, bank_name, solver_name,
              sigma, overrides, loop, out_dir, export_pngs, tag):
    """One reconstruction cell: returns the CSV row; writes artifacts."""
    n = ref.shape[0]
    mask = sampling.generate_mask(mask_kind, ratio, n, seed)
    meas = sampling.undersample(ref, mask)
    if sigma > 0:
        meas = sampling.add_noise(meas, sigma, seed + 1)

    solver = _solver_fn(solver_name)
    t0 = time.perf_counter()
    if bank_name == "none":
        if solver_name == "zero_fill":
            recon = solvers.zero_fill_solver(meas)
        else:
            recon, _ = solver(meas, solvers.SolverConfig(**overrides))
    else:
        bank = _build_bank(bank_name, n)
        configs = dac.default_subspace_configs(bank, **overrides)
        report = dac.dac_reconstruct(meas, bank, solver, configs,
                                     max_outer=loop["max_outer"], tol=loop["tol"],
                                     max_workers=_threads())
        recon = report.image
    wall_ms = int(round((time.perf_counter() - t0) * 1000))

    triple = metrics.metric_triple(ref, recon)
    written = []
    try:
        base = os.path.join(out_dir, tag)
        phantom_io.write_grid(base + ".kdc", recon, phantom_io.KIND_IMAGE)
        written.append(base + ".kdc")
        if export_pngs:
            phantom_io.export_png(recon, base + ".png", mode="magnitude")
            written.append(base + ".png")
            phantom_io.export_png(np.abs(recon - ref), base + "_residual.png",
                                  mode="error", window=(0.0, 0.08))
            written.append(base + "_residual.png")
            krre = metrics.krre_map(fft2(ref), fft2(recon))
            phantom_io.export_png(krre, base + "_krre.png", mode="spectrum")
            written.append(base + "_krre.png")
    except Exception:
        for p in written:
            if os.path.exists(p):
                os.remove(p)
        raise
    return [input_name, mask_kind, _fmt(ratio), str(seed), bank_name, solver_name,
            _fmt(sigma), _fmt(triple.psnr), _fmt(triple.ssim), _fmt(triple.hfen),
            str(wall_ms)]


@click.group()
def main():
    """Divide-and-conquer CS-MRI experiment runner."""


@main.command("mask")
@click.option("--kind", type=click.Choice(sampling.MASK_KINDS), required=True)
@click.option("--ratio", type=float, required=True)
@click.option("--n", type=int, default=256, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_mask(kind, ratio, n, seed, out):
    """Generate an undersampling mask as GridFile + PNG."""
    try:
        m = sampling.generate_mask(kind, ratio, n, seed)
    except ValueError as exc:
        raise ConfigError(str(exc))
    os.makedirs(out, exist_ok=True)
    base = os.path.join(out, f"mask_{kind}_{_fmt(ratio)}_{n}_{seed}")
    try:
        phantom_io.write_grid(base + ".kdc", m.bits, phantom_io.KIND_MASK)
        phantom_io.export_png(m.bits, base + ".png")
    except OSError as exc:
        _fail_io(str(exc))
    click.echo(f"kind={kind} n={n} seed={seed} target_ratio={_fmt(ratio)} "
               f"achieved_ratio={m.achieved_ratio:.6f} -> {base}.kdc")


@main.command("phantom")
@click.option("--n", type=int, default=256, show_default=True)
@click.option("--out", type=click.Path(), default=".", show_default=True)
def cmd_phantom(n, out):
    """Generate the built-in test phantom as GridFile + PNG."""
    try:
        img = phantom_io.make_phantom(n)
    except ValueError as exc:
        raise ConfigError(str(exc))
    os.makedirs(out, exist_ok=True)
    base = os.path.join(out, f"phantom_{n}")
    try:
        phantom_io.write_grid(base + ".kdc", img, phantom_io.KIND_IMAGE)
        phantom_io.export_png(img, base + ".png")
    except OSError as exc:
        _fail_io(str(exc))
    click.echo(f"phantom n={n} -> {base}.kdc")


@main.command("recon")
@click.option("--config", "config_path", type=click.Path(exists=False), default=None)
@click.option("--input", "input_spec", default=None, help="'phantom' or a GridFile path")
@click.option("--mask-kind", type=click.Choice(sampling.MASK_KINDS), default=None)
@click.option("--ratio", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--bank", type=click.Choice(BANKS), default=None)
@click.option("--solver", type=click.Choice(SOLVERS), default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
def cmd_recon(config_path, input_spec, mask_kind, ratio, seed, bank, solver, sigma, out):
    """Run one direct or DAC reconstruction and append a metrics CSV row."""
    file_cfg = _load_config(config_path, _RECON_KEYS)
    cfg = _merge(file_cfg, dict(
        input="phantom", mask_kind="radial", ratio=0.3, seed=7, bank="none",
        solver="fcsa", sigma=0.0, out=".", max_outer=10, tol=1e-6,
    ), input=input_spec, mask_kind=mask_kind, ratio=ratio, seed=seed,
        bank=bank, solver=solver, sigma=sigma, out=out)
    _validate_common(cfg)
    ref, input_name = _load_input(cfg["input"])
    os.makedirs(cfg["out"], exist_ok=True)
    overrides = {k: cfg[k] for k in ("mu", "alpha", "beta", "outer_iters") if k in cfg}
    tag = f"recon_{input_name}_{cfg['mask_kind']}_{_fmt(cfg['ratio'])}_{cfg['bank']}_{cfg['solver']}"
    try:
        row = _run_cell(ref, input_name, cfg["mask_kind"], cfg["ratio"], cfg["seed"],
                        cfg["bank"], cfg["solver"], cfg["sigma"], overrides,
                        {"max_outer": cfg["max_outer"], "tol": cfg["tol"]},
                        cfg["out"], export_pngs=True, tag=tag)
    except solvers.SolverDivergence as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    except OSError as exc:
        _fail_io(str(exc))
    _append_csv(os.path.join(cfg["out"], "metrics.csv"), row)
    click.echo(",".join(row))


def _validate_common(cfg):
    if not 0.0 < cfg["ratio"] <= 1.0:
        raise ConfigError(f"ratio must be in (0, 1], got {cfg['ratio']}")
    if cfg["sigma"] < 0:
        raise ConfigError(f"sigma must be >= 0, got {cfg['sigma']}")
    if cfg["bank"] not in BANKS:
        raise ConfigError(f"bank must be one of {BANKS}, got {cfg['bank']!r}")
    if cfg["solver"] not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}, got {cfg['solver']!r}")


@main.command("bench")
@click.option("--config", "config_path", type=click.Path(exists=False), default=None)
@click.option("--input", "input_spec", default=None)
@click.option("--mask-kinds", default=None, help="comma-separated mask kinds")
@click.option("--ratios", default=None, help="comma-separated ratios")
@click.option("--banks", default=None, help="comma-separated banks")
@click.option("--sigmas", default=None, help="comma-separated noise sigmas")
@click.option("--solver", type=click.Choice(SOLVERS), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--continue-on-error", is_flag=True, default=None)
@click.option("--export-pngs", is_flag=True, default=None)
def cmd_bench(config_path, input_spec, mask_kinds, ratios, banks, sigmas, solver,
              seed, out, continue_on_error, export_pngs):
    """Sweep masks x ratios x banks x sigmas; one CSV row per cell."""
    file_cfg = _load_config(config_path, _BENCH_KEYS)
    cfg = _merge(file_cfg, dict(
        input="phantom", mask_kinds=["cartesian", "random2d", "radial"],
        ratios=[0.3], banks=["none", "horivert"], sigmas=[0.0], solver="fcsa",
        seed=7, out=".", continue_on_error=False, export_pngs=False,
        max_outer=10, tol=1e-6,
    ), input=input_spec,
        mask_kinds=mask_kinds.split(",") if mask_kinds else None,
        ratios=[float(r) for r in ratios.split(",")] if ratios else None,
        banks=banks.split(",") if banks else None,
        sigmas=[float(s) for s in sigmas.split(",")] if sigmas else None,
        solver=solver, seed=seed, out=out,
        continue_on_error=continue_on_error, export_pngs=export_pngs)
    for key in ("mask_kinds", "ratios", "banks", "sigmas"):
        if not cfg[key]:
            raise ConfigError(f"{key} must be a non-empty list")
    for kind in cfg["mask_kinds"]:
        if kind not in sampling.MASK_KINDS:
            raise ConfigError(f"unknown mask kind {kind!r}")
    for b in cfg["banks"]:
        if b not in BANKS:
            raise ConfigError(f"unknown bank {b!r}")
    ref, input_name = _load_input(cfg["input"])
    os.makedirs(cfg["out"], exist_ok=True)
    overrides = {k: cfg[k] for k in ("mu", "alpha", "beta", "outer_iters") if k in cfg}
    csv_path = os.path.join(cfg["out"], "bench.csv")
    failures = 0
    for kind in cfg["mask_kinds"]:
        for ratio in cfg["ratios"]:
            if not 0.0 < ratio <= 1.0:
                raise ConfigError(f"ratio must be in (0, 1], got {ratio}")
            for bank in cfg["banks"]:
                for sigma in cfg["sigmas"]:
                    tag = f"bench_{input_name}_{kind}_{_fmt(ratio)}_{bank}_{_fmt(sigma)}"
                    try:
                        row = _run_cell(ref, input_name, kind, ratio, cfg["seed"],
                                        bank, cfg["solver"], sigma, overrides,
                                        {"max_outer": cfg["max_outer"], "tol": cfg["tol"]},
                                        cfg["out"], cfg["export_pngs"], tag)
                    except solvers.SolverDivergence as exc:
                        failures += 1
                        click.echo(f"cell {tag} failed: {exc}", err=True)
                        if not cfg["continue_on_error"]:
                            sys.exit(EXIT_NUMERIC)
                        continue
                    except OSError as exc:
                        _fail_io(str(exc))
                    _append_csv(csv_path, row)
                    click.echo(",".join(row))
    if failures:
        sys.exit(EXIT_NUMERIC)


if __name__ == "__main__":
    main()
