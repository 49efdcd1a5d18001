"""Command-line surface: validation, estimation, bands, views, reports.

Exit codes: 0 on success, 2 on data-contract errors, 64 on usage errors.
All randomness enters through explicit ``--seed`` flags; outputs are
byte-reproducible given identical inputs and seed, and are written via
temp-file renames so failed commands leave no partial files behind.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import sys
from pathlib import Path

import click

from . import __version__
from ._rng import RNG_NAME, WeightFamily
from .estimators import (EstimatorKind, MemorisationProfile, estimate_profile,
                         read_profile_csv, write_profile_csv)
from .heatmap import profile_heatmap_svg, series_svg
from .inference import (SE_FLOOR, aggregate_bands, apply_bands, bands_to_json,
                        multiplier_bootstrap)
from .panel import Panel, PanelError, load_panel
from .synth import SynthConfig, monte_carlo, resolve_workers
from .views import (Series, SeriesKind, SeriesPoint, instantaneous,
                    persistent_average, profile_correlation, residual,
                    write_series_csv)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64


def _write_outputs(outputs: dict[Path, bytes]) -> None:
    """Two-phase write: stage everything, then rename into place.

    If anything fails, staged temp files and files renamed by this call
    are removed, so an aborted command leaves no partial outputs.
    """
    staged: list[tuple[Path, Path]] = []
    renamed: list[Path] = []
    try:
        for path, data in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
            renamed.append(path)
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        for path in renamed:
            path.unlink(missing_ok=True)
        raise


def _profile_bytes(profile: MemorisationProfile) -> bytes:
    buf = io.StringIO()
    write_profile_csv(profile, buf)
    return buf.getvalue().encode("utf-8")


def _series_bytes(series: Series) -> bytes:
    buf = io.StringIO()
    write_series_csv(series, buf)
    return buf.getvalue().encode("utf-8")


def _load_panel_cli(path: str) -> Panel:
    return load_panel(path)


@click.group(name="memprof")
@click.version_option(version=__version__, prog_name="memprof")
def cli() -> None:
    """Memorisation profiles from checkpoint panels."""


@cli.command("validate")
@click.option("--panel", "panel_path", required=True, help="PanelFile CSV to check.")
def cmd_validate(panel_path: str) -> None:
    """Validate a panel file and print its shape."""
    panel = _load_panel_cli(panel_path)
    click.echo(
        f"{panel.n_instances} instances, {panel.n_checkpoints} checkpoints, "
        f"{len(panel.treatment_grid)} groups + validation"
    )


@cli.command("estimate")
@click.option("--panel", "panel_path", required=True)
@click.option("--kind", type=click.Choice(["diff", "did"]), required=True)
@click.option("--out", "out_path", required=True, help="Profile CSV destination.")
def cmd_estimate(panel_path: str, kind: str, out_path: str) -> None:
    """Estimate a full memorisation profile."""
    panel = _load_panel_cli(panel_path)
    profile = estimate_profile(panel, EstimatorKind(kind))
    _write_outputs({Path(out_path): _profile_bytes(profile)})
    click.echo(f"wrote {len(profile.cells)} cells to {out_path}")


def _band_options(fn):
    fn = click.option("--boot", type=int, default=1000, show_default=True,
                      help="Bootstrap draws B.")(fn)
    fn = click.option("--alpha", type=float, default=0.05, show_default=True)(fn)
    fn = click.option("--seed", type=int, required=True)(fn)
    fn = click.option("--weights", type=click.Choice(["rademacher", "mammen"]),
                      default="rademacher", show_default=True)(fn)
    fn = click.option("--se-method", type=click.Choice(["iqr", "sd"]),
                      default="iqr", show_default=True)(fn)
    fn = click.option("--pointwise", is_flag=True,
                      help="Pointwise normal critical value instead of sup-t.")(fn)
    return fn


def _check_band_params(boot: int, alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise click.UsageError(f"--alpha must lie in (0, 1), got {alpha}")
    if boot < 200:
        raise click.UsageError(f"--boot must be at least 200, got {boot}")
    if boot * alpha < 5:
        raise click.UsageError(f"--boot {boot} too small for --alpha {alpha}: need boot * alpha >= 5")


@cli.command("bands")
@click.option("--panel", "panel_path", required=True)
@click.option("--profile", "profile_path", required=True, help="Profile CSV estimated from this panel.")
@click.option("--kind", type=click.Choice(["diff", "did"]), default="did", show_default=True,
              help="Estimator that produced the profile (the CSV does not carry it).")
@_band_options
@click.option("--out", "out_path", required=True, help="Bands JSON destination.")
@click.option("--masked-out", "masked_path", default=None,
              help="Masked profile CSV destination [default: <out>.masked.csv].")
def cmd_bands(panel_path: str, profile_path: str, kind: str, boot: int, alpha: float,
              seed: int, weights: str, se_method: str, pointwise: bool,
              out_path: str, masked_path: str | None) -> None:
    """Simultaneous confidence bands for an estimated profile."""
    _check_band_params(boot, alpha)
    panel = _load_panel_cli(panel_path)
    profile = read_profile_csv(profile_path, kind=kind)
    bands = multiplier_bootstrap(panel, profile, boot, alpha, seed,
                                 weight_family=WeightFamily(weights),
                                 se_method=se_method, simultaneous=not pointwise)
    masked = apply_bands(profile, bands)
    out = Path(out_path)
    masked_out = Path(masked_path) if masked_path else out.with_name(out.stem + ".masked.csv")
    _write_outputs({
        out: bands_to_json(bands).encode("utf-8"),
        masked_out: _profile_bytes(masked),
    })
    n_sig = sum(1 for cell in masked.cells if cell.significant)
    click.echo(f"crit = {bands.crit:.4f}; {n_sig}/{len(masked.cells)} cells significant")


@cli.command("aggregate")
@click.option("--profile", "profile_path", required=True)
@click.option("--mode", type=click.Choice(["instantaneous", "persistent", "residual"]), required=True)
@click.option("--at", "at_step", type=int, default=None,
              help="Residual checkpoint T [default: last checkpoint in the profile].")
@click.option("--out", "out_path", required=True, help="Series CSV destination.")
def cmd_aggregate(profile_path: str, mode: str, at_step: int | None, out_path: str) -> None:
    """Aggregate a profile into a series view."""
    profile = read_profile_csv(profile_path)
    if mode == "instantaneous":
        series = instantaneous(profile)
    elif mode == "persistent":
        series = persistent_average(profile)
    else:
        t = at_step if at_step is not None else max(profile.checkpoint_steps)
        series = residual(profile, t)
    _write_outputs({Path(out_path): _series_bytes(series)})
    click.echo(f"wrote {len(series.points)} points to {out_path}")


@cli.command("correlate")
@click.argument("profile_a")
@click.argument("profile_b")
@click.option("--significant-only", is_flag=True,
              help="Restrict to cells significant in both profiles.")
def cmd_correlate(profile_a: str, profile_b: str, significant_only: bool) -> None:
    """Pearson correlation between two profiles over paired cells."""
    p1 = read_profile_csv(profile_a)
    p2 = read_profile_csv(profile_b)
    click.echo(repr(profile_correlation(p1, p2, significant_only=significant_only)))


@cli.command("simulate")
@click.option("--config", "config_path", required=True,
              help="JSON: {synth: SynthConfig, estimator, replications, with_bands, alpha, boot}.")
@click.option("--out", "out_path", default=None, help="Optional JSON report destination.")
@click.option("--workers", type=int, default=None,
              help="Replication workers [default: MEMPROF_THREADS or 1].")
def cmd_simulate(config_path: str, out_path: str | None, workers: int | None) -> None:
    """Monte Carlo check of an estimator against a synthetic regime."""
    payload = json.loads(Path(config_path).read_text(encoding="utf-8"))
    config = SynthConfig.from_json_dict(payload["synth"])
    report = monte_carlo(
        config,
        kind=EstimatorKind(payload.get("estimator", "did")),
        replications=int(payload.get("replications", 1000)),
        with_bands=bool(payload.get("with_bands", False)),
        alpha=float(payload.get("alpha", 0.05)),
        boot_draws=int(payload.get("boot", 1000)),
        workers=resolve_workers(workers),
    )
    click.echo(report.summary())
    if out_path:
        payload = json.dumps(report.to_json_dict(), indent=2) + "\n"
        _write_outputs({Path(out_path): payload.encode("utf-8")})


def _masked_series_with_aggregate_bands(panel: Panel, profile: MemorisationProfile,
                                        boot: int, alpha: float, seed: int,
                                        weights: WeightFamily, se_method: str) -> Series:
    """Persistent-average series with bands recomputed on the aggregate."""
    base = persistent_average(profile)
    groups = []
    for point in base.points:
        members = [(g, c) for (g, c) in profile.keys() if c - g == point.index]
        groups.append(members)
    se, crit = aggregate_bands(panel, profile, groups, boot, alpha, seed,
                               weight_family=weights, se_method=se_method)
    points = [
        SeriesPoint(index=p.index, value=p.value, se=float(s),
                    significant=bool(s > SE_FLOOR and abs(p.value) > crit * s),
                    n_cells=p.n_cells)
        for p, s in zip(base.points, se)
    ]
    return Series(kind=SeriesKind.PERSISTENT_AVG, points=points)


@cli.command("report")
@click.option("--panel", "panel_path", required=True)
@click.option("--kind", type=click.Choice(["diff", "did"]), default="did", show_default=True)
@_band_options
@click.option("--epoch-boundary", type=int, default=None,
              help="Checkpoint step to mark with a dashed vertical rule.")
@click.option("--out-dir", "out_dir", required=True)
def cmd_report(panel_path: str, kind: str, boot: int, alpha: float, seed: int,
               weights: str, se_method: str, pointwise: bool,
               epoch_boundary: int | None, out_dir: str) -> None:
    """Full report bundle: profile, bands, series, heatmap, manifest."""
    _check_band_params(boot, alpha)
    family = WeightFamily(weights)
    panel = _load_panel_cli(panel_path)
    profile = estimate_profile(panel, EstimatorKind(kind))
    bands = multiplier_bootstrap(panel, profile, boot, alpha, seed,
                                 weight_family=family, se_method=se_method,
                                 simultaneous=not pointwise)
    masked = apply_bands(profile, bands)

    inst = instantaneous(masked)
    persist = _masked_series_with_aggregate_bands(
        panel, profile, boot, alpha, seed, family, se_method)
    resid = residual(masked, int(panel.checkpoints[-1]))

    outputs: dict[str, bytes] = {
        "profile.csv": _profile_bytes(profile),
        "bands.json": bands_to_json(bands).encode("utf-8"),
        "profile_masked.csv": _profile_bytes(masked),
        "series_instantaneous.csv": _series_bytes(inst),
        "series_persistent.csv": _series_bytes(persist),
        "series_residual.csv": _series_bytes(resid),
        "heatmap.svg": profile_heatmap_svg(
            masked, epoch_boundary=epoch_boundary,
            title=f"memorisation profile ({kind})").encode("utf-8"),
        "series_instantaneous.svg": series_svg(inst, "instantaneous memorisation").encode("utf-8"),
        "series_persistent.svg": series_svg(persist, "average persistent memorisation").encode("utf-8"),
        "series_residual.svg": series_svg(resid, "residual memorisation").encode("utf-8"),
    }

    parameters = {
        "kind": kind, "boot": boot, "alpha": alpha, "seed": seed,
        "weight_family": family.value, "se_method": se_method,
        "simultaneous": not pointwise, "epoch_boundary": epoch_boundary,
    }
    panel_sha = hashlib.sha256(Path(panel_path).read_bytes()).hexdigest()
    config_blob = json.dumps({"parameters": parameters, "panel_sha256": panel_sha},
                             sort_keys=True).encode("utf-8")
    manifest = {
        "command": "report",
        "package": "memprof",
        "version": __version__,
        "rng": RNG_NAME,
        "parameters": parameters,
        "inputs": {"panel": {"path": panel_path, "sha256": panel_sha}},
        "config_hash": hashlib.sha256(config_blob).hexdigest(),
        "outputs": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(outputs.items())},
    }
    outputs["manifest.json"] = (json.dumps(manifest, indent=2) + "\n").encode("utf-8")

    root = Path(out_dir)
    _write_outputs({root / name: data for name, data in outputs.items()})
    n_sig = sum(1 for cell in masked.cells if cell.significant)
    click.echo(f"report written to {out_dir}: {len(profile.cells)} cells, {n_sig} significant")


def main(argv: list[str] | None = None) -> int:
    """Console entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 130
    except (PanelError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        message = str(exc) or type(exc).__name__
        click.echo(f"error: {message}", err=True)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
