"""Measurement settings: which plates realize the three bases.

A setting is either ``single_plate`` (one plate of any phase, turned to three
angles) or ``qwp_hwp`` (a HWP followed by a QWP, three angle pairs). The
same physical plates serve all three bases, so a miscalibration offset on a
plate parameter shifts that parameter in every basis.

Offsets and uncertainties are keyed by parameter name, in radians:

* single_plate: ``axis``, ``phase``
* qwp_hwp: ``q``, ``h``, ``phase_q``, ``phase_h``
"""

from dataclasses import dataclass

import numpy as np

from ._config import TOL
from .bloch import (
    WavePlate,
    _rotate,
    _rotate_d_axis,
    _rotate_d_phase,
    _single_bloch_jac_rad,
    _single_bloch_rad,
)
from .exceptions import InfeasiblePhaseError, NotMubError
from .mub import TWP_ANGLE, solve_complete_mub

SINGLE_PLATE = "single_plate"
QWP_HWP = "qwp_hwp"
PARAMETERS = {
    SINGLE_PLATE: ("axis", "phase"),
    QWP_HWP: ("q", "h", "phase_q", "phase_h"),
}
ANGLE_PARAMETERS = {SINGLE_PLATE: ("axis",), QWP_HWP: ("q", "h")}
PAULI_QH_ANGLES = ((45.0, 22.5), (0.0, 22.5), (0.0, 0.0))

_EZ = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class MeasurementSetting:
    """Plates per basis. For ``qwp_hwp`` each entry is a (QWP, HWP) tuple."""

    kind: str
    plates: tuple
    name: str = ""

    def __post_init__(self):
        if self.kind not in PARAMETERS:
            raise ValueError(f"unknown setting kind {self.kind!r}")

    @property
    def parameters(self):
        return PARAMETERS[self.kind]

    @property
    def angle_parameters(self):
        return ANGLE_PARAMETERS[self.kind]

    @property
    def bases(self):
        return self.bloch_vectors()

    def _check_offsets(self, offsets):
        offsets = dict(offsets or {})
        unknown = set(offsets) - set(self.parameters)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for {self.kind}")
        return {p: float(offsets.get(p, 0.0)) for p in self.parameters}

    def bloch_vectors(self, offsets=None):
        """Realized Bloch vectors (rows), with plate parameters shifted by ``offsets``."""
        o = self._check_offsets(offsets)
        if self.kind == SINGLE_PLATE:
            theta = np.radians([p.axis for p in self.plates]) + o["axis"]
            delta = np.radians([p.phase for p in self.plates]) + o["phase"]
            return _single_bloch_rad(theta, delta)
        rows = []
        for qwp, hwp in self.plates:
            w = _rotate(_EZ, np.radians(hwp.axis) + o["h"], np.radians(hwp.phase) + o["phase_h"])
            rows.append(_rotate(w, np.radians(qwp.axis) + o["q"], np.radians(qwp.phase) + o["phase_q"]))
        return np.array(rows)

    def jacobians(self):
        """Analytic derivatives of the Bloch rows w.r.t. each parameter (radians)."""
        if self.kind == SINGLE_PLATE:
            theta = np.radians([p.axis for p in self.plates])
            delta = np.radians([p.phase for p in self.plates])
            d_theta, d_delta = _single_bloch_jac_rad(theta, delta)
            return {"axis": d_theta, "phase": d_delta}
        out = {p: [] for p in self.parameters}
        for qwp, hwp in self.plates:
            tq, dq = np.radians(qwp.axis), np.radians(qwp.phase)
            th, dh = np.radians(hwp.axis), np.radians(hwp.phase)
            w = _rotate(_EZ, th, dh)
            out["q"].append(_rotate_d_axis(w, tq, dq))
            out["phase_q"].append(_rotate_d_phase(w, tq, dq))
            out["h"].append(_rotate(_rotate_d_axis(_EZ, th, dh), tq, dq))
            out["phase_h"].append(_rotate(_rotate_d_phase(_EZ, th, dh), tq, dq))
        return {p: np.array(v) for p, v in out.items()}

    def is_complete_mub(self, tol=TOL.triple_residual):
        r = self.bloch_vectors()
        return r.shape == (3, 3) and np.max(np.abs(r @ r.T - np.eye(3))) <= tol

    def require_complete_mub(self):
        if not self.is_complete_mub():
            raise NotMubError(f"setting {self.name or self.kind} is not a complete set of MUB")
        return self


def single_plate_setting(phase, angles, name=""):
    plates = tuple(WavePlate(phase, a) for a in angles)
    return MeasurementSetting(SINGLE_PLATE, plates, name or f"single:{phase:g}")


def qwp_hwp_setting(angle_pairs=PAULI_QH_ANGLES, name="qwp-hwp"):
    plates = tuple((WavePlate(90.0, q), WavePlate(180.0, h)) for q, h in angle_pairs)
    return MeasurementSetting(QWP_HWP, plates, name)


def twp_setting():
    """Third-wave plate at 0, t0 and t0 + 90 deg, t0 = arccos(-1/3)/4."""
    return single_plate_setting(120.0, (0.0, TWP_ANGLE, TWP_ANGLE + 90.0), name="twp")


def solved_single_plate_setting(phase, starts=100, rng_seed=0):
    """Single-plate setting from the first solution family at ``phase``."""
    families = solve_complete_mub(phase, starts, rng_seed)
    if not families:
        raise InfeasiblePhaseError(f"phase {phase} deg admits no complete set of MUB")
    return single_plate_setting(phase, families[0].base.angles)


def parse_setting(spec, starts=100, rng_seed=0):
    """``twp``, ``qwp-hwp`` or ``single:<phase>``."""
    spec = spec.strip().lower()
    if spec == "twp":
        return twp_setting()
    if spec in ("qwp-hwp", "qwp_hwp", "pauli"):
        return qwp_hwp_setting()
    if spec.startswith("single:"):
        return solved_single_plate_setting(float(spec.split(":", 1)[1]), starts, rng_seed)
    raise ValueError(f"unknown setting {spec!r}; use twp, qwp-hwp or single:<phase>")
