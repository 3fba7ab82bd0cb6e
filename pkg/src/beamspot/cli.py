"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 configuration or usage error,
3 I/O error. ``--threads`` falls back to the ``BEAMSPOT_THREADS`` environment
variable, then to 1.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, UserSection, load_config
from .engine import (
    directivity_distortion3,
    directivity_signal,
    distortion3_psd_multi,
    enumerate_im_directions,
    expected_im_count,
    received_psd_general,
    signal_psd_multi,
)
from .errors import BeamspotError
from .gridsweep import (
    LAYERS,
    peak_report,
    sweep,
    uniformity_metric,
    write_bspt,
    write_csv,
    write_sidecar,
)
from .montecarlo import compare_psd, estimate_psd, expected_welch, simulate_received

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3

# floor for dB columns so exact zeros stay finite
_DB_FLOOR = 1e-300


class UsageError(BeamspotError):
    pass


def _db(values) -> np.ndarray:
    return 10 * np.log10(np.maximum(np.asarray(values, dtype=float), _DB_FLOOR))


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _point(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected x,y in metres, got {text!r}")
    return vals[0], vals[1]


def resolve_threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("BEAMSPOT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"BEAMSPOT_THREADS: not an integer: {env!r}") from None
    return 1


def _write_rows(path, header, rows) -> None:
    out = open(path, "w", newline="") if path else None
    try:
        writer = csv.writer(out or sys.stdout)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if out:
            out.close()


# --- subcommands ---------------------------------------------------------------------------


def cmd_directivity(cfg: ScenarioConfig, args) -> int:
    if len(cfg.arrays) != 1:
        raise UsageError(f"directivity is per array; the config declares {len(cfg.arrays)} arrays")
    updates = {}
    if args.n is not None:
        updates["arrays"] = [cfg.arrays[0].model_copy(update={"num_antennas": args.n})]
    if args.users is not None:
        updates["users"] = [UserSection(angle_deg=a) for a in args.users]
        updates["cell"] = None
    if updates:
        cfg = cfg.model_copy(update=updates)
    scenario = cfg.scenario()
    theta_deg = np.arange(0.0, 180.0 + args.step_deg / 2, args.step_deg)
    theta = np.deg2rad(theta_deg)
    sig = directivity_signal(scenario, theta)
    dis = directivity_distortion3(scenario, theta)
    _write_rows(
        args.out,
        ["theta_deg", "signal", "signal_db", "distortion3", "distortion3_db"],
        zip(theta_deg, sig, _db(sig), dis, _db(dis)),
    )
    if args.out:
        print(f"distortion uniformity over theta: {np.std(_db(dis)):.3f} dB -> {args.out}")
    return EXIT_OK


def cmd_focusing(cfg: ScenarioConfig, args) -> int:
    scenario = cfg.scenario()
    cell = cfg.cell_spec()
    radius = cfg.cell.mask_radius_m if cfg.cell is not None else None
    fmap = sweep(scenario, cell, threads=resolve_threads(args.threads), mask_radius_m=radius)
    prefix = Path(args.out)
    if prefix.parent and not prefix.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {prefix.parent}")
    paths = {ext: prefix.with_name(prefix.name + ext) for ext in (".bspt", ".csv", ".json")}
    write_bspt(fmap, paths[".bspt"])
    write_csv(fmap, paths[".csv"])
    write_sidecar(fmap, paths[".json"])
    for name in LAYERS:
        print(f"{name}: uniformity {uniformity_metric(fmap.layer(name), fmap.mask):.4f} dB")
    users = [u.location.position for u in scenario.users]
    arrays = [a.position for a in scenario.arrays]
    for p in peak_report(fmap, users, "signal", array_positions=arrays, exclusion_radius=args.peak_exclusion_m)[:5]:
        print(f"signal peak ({p.position[0]:.2f}, {p.position[1]:.2f}) m  {p.value:.3f}  nearest UE {p.nearest_user_distance:.2f} m")
    for path in paths.values():
        print(f"wrote {path}")
    return EXIT_OK


def cmd_psd(cfg: ScenarioConfig, args) -> int:
    scenario = cfg.scenario()
    observer = args.observer
    if observer is None:
        if cfg.montecarlo is None:
            raise UsageError("give --observer x,y or montecarlo.observer_m in the config")
        observer = tuple(cfg.montecarlo.observer_m)
    links = scenario.observer_links(observer)
    sig = signal_psd_multi(scenario, links)
    dis = distortion3_psd_multi(scenario, links)
    freq = sig.freq_hz
    cols = [freq, sig.values.real, _db(sig.values.real), dis.values.real, _db(dis.values.real)]
    header = ["freq_hz", "signal", "signal_db", "distortion3", "distortion3_db"]
    if args.full:
        total = received_psd_general(scenario, links).values.real
        cols += [total, _db(total)]
        header += ["total", "total_db"]
    _write_rows(args.out, header, zip(*cols))
    return EXIT_OK


def cmd_validate(cfg: ScenarioConfig, args) -> int:
    if cfg.montecarlo is None:
        raise UsageError("validate needs a [montecarlo] section")
    mc = cfg.montecarlo
    scenario = cfg.scenario()
    samples = args.samples if args.samples is not None else mc.num_samples
    seed = args.seed if args.seed is not None else mc.seed
    welch = cfg.welch_config()
    observer = tuple(mc.observer_m)
    analytic = received_psd_general(scenario, scenario.observer_links(observer))
    series = simulate_received(scenario, observer, samples, seed)
    estimate = estimate_psd(series, welch)
    checks = compare_psd(
        estimate, expected_welch(analytic, welch), scenario.pulse.bandwidth, scenario.pulse.rolloff,
        mc.in_band_tol, mc.shoulder_tol,
    )
    regions = {}
    for region in ("in", "shoulder"):
        sel = [c for c in checks if c.region == region]
        regions[region] = {
            "bins": len(sel),
            "max_rel_error": max(c.rel_error for c in sel),
            "tolerance": sel[0].tolerance,
            "failed_bins": [c.freq_hz for c in sel if not c.passed],
        }
    passed = all(c.passed for c in checks)
    report = {
        "passed": passed,
        "seed": seed,
        "num_samples": samples,
        "num_segments": estimate.num_segments,
        "observer_m": list(observer),
        "regions": regions,
        "bins": [
            {
                "freq_hz": c.freq_hz,
                "region": c.region,
                "analytic": c.analytic,
                "empirical": c.empirical,
                "stderr": c.stderr,
                "rel_error": c.rel_error,
                "passed": c.passed,
            }
            for c in checks
        ],
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK if passed else EXIT_VALIDATION


def cmd_im_directions(cfg: ScenarioConfig, args) -> int:
    if args.users is not None:
        dl = args.spacing_wavelengths
        phis = [2 * np.pi * dl * np.cos(np.deg2rad(a)) for a in args.users]
        powers = None
    else:
        if len(cfg.arrays) != 1:
            raise UsageError("IM directions are per array; give --users or a single-array config")
        scenario = cfg.scenario()
        arr = scenario.arrays[0]
        dl = arr.spacing / scenario.carrier.wavelength
        phis = scenario.weights.phi[0]
        powers = scenario.users.powers
    dirs = enumerate_im_directions(phis, powers, dl)
    expected = expected_im_count(len(phis))
    print(f"{'phi_rad':>10}  {'theta_deg':>10}  {'weight':>8}  triples")
    for d in dirs:
        theta = f"{np.rad2deg(d.theta):10.3f}" if d.visible else f"{'invisible':>10}"
        triples = " ".join(f"({a},{b},{c})" for a, b, c in sorted(d.triples))
        print(f"{d.phi:10.5f}  {theta}  {d.weight:8.3f}  {triples}")
    print(f"{len(dirs)} directions; generic count for K={len(phis)} is {expected}")
    if len(dirs) > expected:
        return EXIT_VALIDATION
    if len(dirs) < expected:
        print("fewer than the generic count: some user phases coincide or combine degenerately")
        if args.strict:
            return EXIT_VALIDATION
    return EXIT_OK


# --- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamspot", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker cap (default: $BEAMSPOT_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("directivity", parents=[common], help="signal and third-order distortion directivity of one array")
    p.add_argument("config")
    p.add_argument("--users", type=_float_list, help="user angles in degrees from the array axis, e.g. 135,60")
    p.add_argument("--n", type=int, help="override the number of antennas")
    p.add_argument("--step-deg", type=float, default=0.1, help="theta grid step (degrees)")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_directivity)

    p = sub.add_parser("focusing", parents=[common], help="spatial focusing maps over the cell")
    p.add_argument("config")
    p.add_argument("--out", required=True, help="output prefix; writes .bspt, .csv and .json")
    p.add_argument("--peak-exclusion-m", type=float, default=20.0, help="ignore peaks this close to an array")
    p.set_defaults(func=cmd_focusing)

    p = sub.add_parser("psd", parents=[common], help="analytic PSD at one observer")
    p.add_argument("config")
    p.add_argument("--observer", type=_point, help="x,y in metres (default: montecarlo.observer_m)")
    p.add_argument("--full", action="store_true", help="also emit the all-pairs engine total")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("validate", parents=[common], help="Monte Carlo check of the analytic PSD")
    p.add_argument("config")
    p.add_argument("--samples", type=int, help="override montecarlo.num_samples")
    p.add_argument("--seed", type=int, help="override montecarlo.seed")
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("im-directions", parents=[common], help="third-order intermodulation beam directions")
    p.add_argument("config", nargs="?")
    p.add_argument("--users", type=_float_list, help="user angles in degrees (no config needed)")
    p.add_argument("--spacing-wavelengths", type=float, default=0.5, help="antenna spacing used with --users")
    p.add_argument("--strict", action="store_true", help="fail when fewer than the generic count appear")
    p.set_defaults(func=cmd_im_directions)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "im-directions" and args.config is None:
            if args.users is None:
                raise UsageError("give a config or --users")
            cfg = None
        else:
            cfg = load_config(args.config)
        return args.func(cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BeamspotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
