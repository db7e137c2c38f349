"""Command-line entry point: ``qdmsim {analytic,simulate,veto,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
The default output directory comes from ``$QDMSIM_OUT`` when ``--out`` is
not given, else from the config's ``output_dir``.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError, RunConfig
from .io import (
    ANALYTIC_SCHEMA,
    VETO_SCHEMA,
    read_spectrum_csv,
    write_json,
    write_record,
    write_spectrum_csv,
)
from .network import SignalKind, analytic_report, signal_transfer
from .synth import AcquisitionError, estimate_psd, synthesize
from .veto import classify_peaks, predict_peaks

log = logging.getLogger("qdmsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
ENV_OUT = "QDMSIM_OUT"


def resolve_config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = cfgmod.load(args.config)
    else:
        cfg = cfgmod.preset(args.preset or "fig3")
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.theta_deg is not None:
        try:
            cfg = cfg.with_theta(math.radians(args.theta_deg))
        except ValueError as exc:
            raise ConfigError(f"--theta-deg: {exc}") from None
    return cfg


def output_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or os.environ.get(ENV_OUT) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_analytic(args, cfg: RunConfig, out: Path) -> None:
    a = cfg.analytic
    report = analytic_report(cfg.qdm, list(cfg.signals), a.signal_x, a.signal_p, a.signal_x_theta)
    d = report.to_dict()
    write_json(d, out / "analytic_report.json", ANALYTIC_SCHEMA)
    rows = [
        ("single_mode_bound", report.single_mode_bound),
        ("arthurs_kelly_product", report.arthurs_kelly_product),
        ("qdm_product", report.qdm_product),
        ("threshold_r", report.threshold_r),
        ("var_bhd_a", report.var_bhd_a),
        ("var_bhd_b", report.var_bhd_b),
    ]
    print(f"r_a={cfg.qdm.r_a:.4f} r_b={cfg.qdm.r_b:.4f} theta={math.degrees(cfg.qdm.theta):.2f} deg")
    for name, value in rows:
        print(f"{name:>22}  {value:.4f}")
    print(f"{'regime':>22}  {report.bound_label}")


def _simulate(cfg: RunConfig):
    rec_a, rec_b = synthesize(cfg.qdm, list(cfg.signals), cfg.acquisition)
    return rec_a, rec_b, estimate_psd(rec_a), estimate_psd(rec_b)


def cmd_simulate(args, cfg: RunConfig, out: Path) -> None:
    rec_a, rec_b, spec_a, spec_b = _simulate(cfg)
    write_spectrum_csv(spec_a, out / "spectrum_a.csv")
    write_spectrum_csv(spec_b, out / "spectrum_b.csv")
    if not args.no_records:
        write_record(rec_a, out / "record_a")
        write_record(rec_b, out / "record_b")
    (out / "run_config.yaml").write_text(cfg.dump())
    for spec in (spec_a, spec_b):
        floor = float(np.median(spec.power_db_rel_vacuum))
        print(f"detector {spec.metadata['detector']}: median floor {floor:+.2f} dB rel. vacuum, {spec.n_averages} averages")


def cmd_veto(args, cfg: RunConfig, out: Path) -> None:
    if args.spectra:
        spec_a, spec_b = (read_spectrum_csv(p) for p in args.spectra)
        theta = cfg.qdm.theta
        if args.theta_deg is None and "readout_angle" in spec_b.metadata:
            theta = float(spec_b.metadata["readout_angle"])
    else:
        _, _, spec_a, spec_b = _simulate(cfg)
        theta = cfg.qdm.theta
    report = classify_peaks(spec_a, spec_b, theta, cfg.detection)
    write_json(report.to_dict(), out / "veto_report.json", VETO_SCHEMA)
    print(report.table())


def cmd_sweep(args, cfg: RunConfig, out: Path) -> None:
    sw = cfg.sweep
    if args.theta_range:
        start, stop, steps = args.theta_range
        try:
            sw = cfgmod.SweepParams(math.radians(start), math.radians(stop), int(steps))
        except ValueError as exc:
            raise ConfigError(f"--theta-range: {exc}") from None
    science = [s for s in cfg.signals if s.kind == SignalKind.SCIENCE]
    parasitic = [s for s in cfg.signals if s.kind == SignalKind.PARASITIC]
    lines = ["theta_deg,science_power_fraction,science_snr_db,parasitic_residual_db,parasitic_significance"]
    for theta in np.linspace(sw.theta_start, sw.theta_stop, sw.steps):
        run = cfg.with_theta(float(min(theta, math.pi - 1e-15)))
        frac = snr = math.nan
        if science:
            total = sum(s.amplitude**2 for s in science)
            frac = sum(sum(g**2 for g in signal_transfer(run.qdm, s)) for s in science) / total
            pk = predict_peaks(run.qdm, science, run.acquisition)
            snr = 10 * math.log10(sum((p.power_a - p.floor_a) / p.floor_a + (p.power_b - p.floor_b) / p.floor_b for p in pk))
        resid = sig = math.nan
        if parasitic:
            worst = min(predict_peaks(run.qdm, parasitic, run.acquisition), key=lambda p: abs(p.significance))
            resid, sig = worst.residual_db, worst.significance
        lines.append(f"{math.degrees(theta):.4f},{frac:.6f},{snr:.6f},{resid:.6f},{sig:.6f}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "veto": cmd_veto,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML/JSON run config")
    common.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="built-in config (default: fig3)")
    common.add_argument("--seed", type=int, help="override acquisition seed")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default: ${ENV_OUT} or config output_dir)")
    common.add_argument("--theta-deg", type=float, metavar="X", help="override theta in degrees")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="qdmsim", description="Quantum-dense metrology simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analytic", parents=[common], help="evaluate uncertainty bounds")
    p = sub.add_parser("simulate", parents=[common], help="synthesize detector records and spectra")
    p.add_argument("--no-records", action="store_true", help="skip raw record export")
    p = sub.add_parser("veto", parents=[common], help="classify spectral peaks")
    p.add_argument("--spectra", nargs=2, metavar=("A_CSV", "B_CSV"), help="analyse existing spectra instead of simulating")
    p = sub.add_parser("sweep", parents=[common], help="theta trade-off table")
    p.add_argument("--theta-range", nargs=3, type=float, metavar=("START", "STOP", "STEPS"), help="degrees")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        out = output_dir(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        COMMANDS[args.command](args, cfg, out)
    except (ConfigError, AcquisitionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 3
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
