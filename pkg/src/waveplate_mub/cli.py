"""Command-line interface: ``waveplate-mub {scan,solve,budget,simulate,replay}``.

Angles in flags and outputs are degrees; uncertainties and miscalibration
offsets are radians. Every command that writes to ``--out`` also writes a
``manifest.json`` holding the full parameter set and SHA-256 checksums of
the outputs; ``replay`` re-runs a manifest and verifies the checksums.

Exit codes: 0 success (including infeasible answers), 1 replay mismatch,
2 usage error, 3 numerical failure.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .budget import (
    mub_budget,
    qwp_hwp_mub_budget,
    single_plate_mub_budget,
    state_estimation_coefficients,
)
from .exceptions import ConvergenceError, InfeasiblePhaseError, SingularDesignError
from .mub import (
    DEFAULT_STARTS,
    frame_potential,
    scan_phase_window,
    solve_complete_mub,
    two_mub_angles,
    two_mub_feasible,
)
from .settings import PAULI_QH_ANGLES, parse_setting
from .tomography import EXACT, SAMPLED, TomographyConfig, parse_state, sweep, first_order_coefficient

SEED_ENV = "WAVEPLATE_MUB_SEED"
EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _num(x):
    return float(f"{float(x):.12g}")


def _fmt(x):
    return f"{float(x):.12g}"


def _json_bytes(obj):
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _csv_bytes(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode("utf-8")


def _triple_json(t):
    return {"angles_deg": [_num(a) for a in t.angles], "residual": _num(t.residual)}


# -- runners: params dict -> (summary dict, {filename: bytes}) ----------------------

def run_scan(p):
    scan = scan_phase_window(p["lo"], p["hi"], p["step"], p["starts"], p["seed"])
    windows = [[_num(a), _num(b)] for a, b in scan.windows]
    summary = {"windows_deg": windows, "feasible_window_deg": windows[0] if windows else None}
    files = {
        "scan.csv": _csv_bytes(["phase_deg", "frame_potential"], scan.grid),
        "scan.json": _json_bytes({**summary, "grid_points": len(scan.grid)}),
    }
    return summary, files


def run_solve(p):
    phase = p["phase"]
    families = solve_complete_mub(phase, p["starts"], p["seed"])
    pot = frame_potential(phase, p["starts"], p["seed"])
    summary = {
        "phase_deg": _num(phase),
        "status": "feasible" if families else "infeasible",
        "frame_potential": _num(pot),
        "families": [
            {"base": _triple_json(f.base), "images": [_triple_json(m) for m in f.images]}
            for f in families
        ],
        "two_mub": None,
    }
    if two_mub_feasible(phase):
        pair = two_mub_angles(phase)
        summary["two_mub"] = {
            "angles_deg": [_num(pair.theta1), _num(pair.theta2)],
            "defect": _num(pair.defect),
        }
    return summary, {"solutions.json": _json_bytes(summary)}


def run_budget(p):
    spec = p["setting"]
    unc_axis, unc_phase = p["d_axis"], p["d_phase"]
    summary = {"setting": spec, "status": "ok", "state": p["state"]}
    try:
        setting = parse_setting(spec, rng_seed=p["seed"])
    except InfeasiblePhaseError as exc:
        summary.update(status="infeasible", message=str(exc))
        return summary, {"budget.json": _json_bytes(summary)}

    if p["state"]:
        state = parse_state(p["state"])
        budget = state_estimation_coefficients(state, setting)
        pw = float(p["state"].partition(":")[2] or 1.0)
        summary["coefficients_over_p2"] = (
            {k: _num(v / pw**2) for k, v in budget.coefficients.items()} if pw > 0 else None
        )
    elif setting.kind == "single_plate":
        budget = single_plate_mub_budget(setting.plates[0].phase, check=False)
    elif p["averaged"]:
        budget = qwp_hwp_mub_budget(PAULI_QH_ANGLES, averaged=True)
    else:
        budget = mub_budget(setting)

    unc = {k: (unc_phase if k.startswith("phase") else unc_axis) for k in budget.coefficients}
    summary.update(
        kind=setting.kind,
        angles_deg=[[_num(pl.axis) for pl in (b if isinstance(b, tuple) else (b,))] for b in setting.plates],
        coefficients={k: _num(v) for k, v in budget.coefficients.items()},
        uncertainty_rad=unc,
        total=_num(budget.total(unc)),
    )
    return summary, {"budget.json": _json_bytes(summary)}


def _parse_sweep(text):
    try:
        lo, hi, n = text.split(":")
        return tuple(float(x) for x in np.linspace(float(lo), float(hi), int(n)))
    except ValueError:
        raise UsageError(f"--sweep must be lo:hi:n, got {text!r}") from None


def run_simulate(p):
    qubits = p["qubits"]
    setting = parse_setting(p["setting"], rng_seed=p["seed"])
    settings = (setting,) * qubits
    state_spec = p["state"] or ("singlet" if qubits == 2 else "H:0.92")
    state = parse_state(state_spec)
    if state.shape != (2**qubits, 2**qubits):
        raise UsageError(f"state {state_spec!r} is not a {qubits}-qubit state")
    offsets = _parse_sweep(p["sweep"])
    config = TomographyConfig(
        settings,
        photons_per_basis=p["photons"],
        trials=p["trials"],
        rng_seed=p["seed"],
        statistics=EXACT if p["exact"] else SAMPLED,
        project=not p["no_project"],
    )
    params = setting.angle_parameters if p["plate"] == "all" else (p["plate"],)
    for prm in params:
        if prm not in setting.parameters:
            raise UsageError(f"--plate {prm!r} not in {setting.parameters}")
    photons = range(qubits) if p["photon"] == "all" else (int(p["photon"]) - 1,)

    rows, fits = [], []
    for q in photons:
        for prm in params:
            fo = first_order_coefficient(state, settings, q, prm)
            res = sweep(config, state, q, prm, offsets, first_order=fo)
            for off, mean, std, unproj in res.rows():
                rows.append([q + 1, prm, off, mean, std, unproj, fo * off * off])
            fits.append({
                "photon": q + 1,
                "parameter": prm,
                "coefficient": _num(res.coefficient),
                "coefficient_std": _num(res.coefficient_std),
                "unprojected_coefficient": _num(res.unprojected_coefficient),
                "first_order": _num(fo),
            })
    summary = {
        "qubits": qubits,
        "setting": p["setting"],
        "state": state_spec,
        "statistics": config.statistics,
        "fits": fits,
        "total_coefficient": _num(sum(f["coefficient"] for f in fits)),
    }
    if p["expect"]:
        report = []
        for item in p["expect"]:
            prm, _, target = item.partition("=")
            got = [f["coefficient"] for f in fits if f["parameter"] == prm]
            if not got:
                raise UsageError(f"--expect names unswept parameter {prm!r}")
            mean, target = float(np.mean(got)), float(target)
            if abs(mean - target) > p["expect_tol"] * abs(target):
                report.append(f"{prm}: fitted {mean:.4f} vs expected {target:.4f} "
                              f"({100 * (mean / target - 1):+.1f}%)")
        summary["discrepancies"] = report
    header = ["photon", "parameter", "offset_rad", "hs_error_mean", "hs_error_std",
              "hs_error_unprojected", "first_order_prediction"]
    return summary, {"curves.csv": _csv_bytes(header, rows), "fit.json": _json_bytes(summary)}


RUNNERS = {"scan": run_scan, "solve": run_solve, "budget": run_budget, "simulate": run_simulate}


# -- manifest ------------------------------------------------------------------------

def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def write_outputs(command, params, files, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in files.items():
        (out_dir / name).write_bytes(data)
    manifest = {
        "command": command,
        "parameters": params,
        "tool": "waveplate_mub",
        "version": __version__,
        "outputs": {name: _sha256(data) for name, data in sorted(files.items())},
    }
    (out_dir / "manifest.json").write_bytes(_json_bytes(manifest))
    return manifest


def replay(manifest_path, out_dir=None):
    """Re-run a manifest; returns the list of outputs whose checksum changed."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    command, params = manifest["command"], manifest["parameters"]
    _, files = RUNNERS[command](params)
    if out_dir is not None:
        write_outputs(command, params, files, out_dir)
    got = {name: _sha256(data) for name, data in files.items()}
    return sorted(n for n, h in manifest["outputs"].items() if got.get(n) != h)


# -- argument parsing ------------------------------------------------------------------

def _default_seed():
    raw = os.environ.get(SEED_ENV)
    return int(raw) if raw else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="waveplate-mub",
        description="MUB realized by one wave plate: solver, error budgets, tomography simulation. "
                    "Angles are degrees; uncertainties and offsets are radians.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    seed_help = f"RNG seed (default: ${SEED_ENV} or 0)"

    s = sub.add_parser("scan", help="frame potential over a phase grid and the feasible windows")
    s.add_argument("--lo", type=float, default=0.0, help="first phase, deg")
    s.add_argument("--hi", type=float, default=360.0, help="last phase, deg")
    s.add_argument("--step", type=float, default=0.5, help="grid step, deg")
    s.add_argument("--starts", type=int, default=DEFAULT_STARTS)
    s.add_argument("--seed", type=int, default=None, help=seed_help)
    s.add_argument("--out", type=Path)

    s = sub.add_parser("solve", help="plate angles realizing a complete MUB at one phase")
    s.add_argument("--phase", type=float, required=True, help="retardation, deg")
    s.add_argument("--starts", type=int, default=DEFAULT_STARTS)
    s.add_argument("--seed", type=int, default=None, help=seed_help)
    s.add_argument("--out", type=Path)

    s = sub.add_parser("budget", help="first-order systematic-error coefficients")
    s.add_argument("--setting", default="twp", help="twp | qwp-hwp | single:<phase deg>")
    s.add_argument("--d-axis", type=float, default=0.0, help="axis uncertainty, rad")
    s.add_argument("--d-phase", type=float, default=0.0, help="phase uncertainty, rad")
    s.add_argument("--state", default=None, help="per-state budget, e.g. H:0.92 (H V D A R L)")
    s.add_argument("--averaged", action="store_true",
                   help="qwp-hwp: average the HWP phase term over HWP angles")
    s.add_argument("--seed", type=int, default=None, help=seed_help)
    s.add_argument("--out", type=Path)

    s = sub.add_parser("simulate", help="tomography sweeps against plate miscalibration")
    s.add_argument("--qubits", type=int, choices=(1, 2), default=1)
    s.add_argument("--setting", default="twp", help="twp | qwp-hwp | single:<phase deg>")
    s.add_argument("--plate", default="all", help="parameter to offset (axis, q, h, phase, ...) or all")
    s.add_argument("--photon", default="all", choices=("1", "2", "all"))
    s.add_argument("--state", default=None, help="H:0.92 style, or singlet[:p] (default for 2 qubits)")
    s.add_argument("--sweep", default="-0.02:0.02:11", help="offsets lo:hi:n, rad")
    s.add_argument("--photons", type=int, default=None,
                   help="photons per basis setting (default 1e6 for 1 qubit, 1e5 for 2)")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=None, help=seed_help)
    s.add_argument("--exact", action="store_true", help="infinite statistics instead of sampling")
    s.add_argument("--no-project", action="store_true", help="skip the positivity projection")
    s.add_argument("--expect", action="append", default=[], metavar="PARAM=COEFF",
                   help="report fitted coefficients off by more than --expect-tol")
    s.add_argument("--expect-tol", type=float, default=0.15)
    s.add_argument("--out", type=Path)

    s = sub.add_parser("replay", help="re-run a manifest and verify output checksums")
    s.add_argument("manifest", type=Path)
    s.add_argument("--out", type=Path)
    return parser


def _params(args):
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("command", "out")}
    if params.get("seed") is None:
        params["seed"] = _default_seed()
    if args.command == "simulate" and params["photons"] is None:
        params["photons"] = 10**6 if params["qubits"] == 1 else 10**5
    return params


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            bad = replay(args.manifest, args.out)
            if bad:
                print(f"checksum mismatch: {', '.join(bad)}", file=sys.stderr)
                return EXIT_MISMATCH
            print("replay ok")
            return EXIT_OK
        params = _params(args)
        summary, files = RUNNERS[args.command](params)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, SingularDesignError):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        parser.error(str(exc))
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out is not None:
        write_outputs(args.command, params, files, args.out)
    sys.stdout.write(_json_bytes(summary).decode("utf-8"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
