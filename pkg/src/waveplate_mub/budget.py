"""First-order systematic-error budgets.

A budget is a quadratic form ``sum_k c_k (d_k)^2`` in the plate parameter
uncertainties ``d_k`` (radians). Coefficients come from the analytic
Jacobians in :mod:`waveplate_mub.settings`.
"""

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .bloch import _single_bloch_jac_rad, density_to_bloch
from .exceptions import InfeasiblePhaseError, NotMubError
from .mub import complete_mub_feasible
from .settings import qwp_hwp_setting


@dataclass(frozen=True)
class ErrorBudget:
    coefficients: MappingProxyType

    def __init__(self, coefficients):
        coeffs = {k: float(v) for k, v in dict(coefficients).items()}
        if any(v < -1e-12 for v in coeffs.values()):
            raise ValueError(f"negative budget coefficient in {coeffs}")
        object.__setattr__(self, "coefficients", MappingProxyType(coeffs))

    def __getitem__(self, name):
        return self.coefficients[name]

    def total(self, uncertainty):
        """Evaluate the quadratic form; missing parameters count as exact."""
        u = dict(uncertainty)
        unknown = set(u) - set(self.coefficients)
        if unknown:
            raise ValueError(f"unknown uncertainty parameters {sorted(unknown)}")
        if any(v < 0 for v in u.values()):
            raise ValueError("uncertainties must be nonnegative")
        return float(sum(c * u.get(k, 0.0) ** 2 for k, c in self.coefficients.items()))

    def scaled(self, factor):
        return ErrorBudget({k: factor * v for k, v in self.coefficients.items()})

    def to_dict(self):
        return dict(self.coefficients)


def single_plate_derivative_norms(axis, phase):
    """Squared norms of dr/ddelta and dr/dtheta for one plate (degrees in)."""
    d_theta, d_delta = _single_bloch_jac_rad(np.radians(axis), np.radians(phase))
    return float(d_delta @ d_delta), float(d_theta @ d_theta)


def mub_budget(setting):
    """Sum over the three bases of ``|dr/dxi|^2`` for each parameter xi."""
    setting.require_complete_mub()
    return ErrorBudget({p: np.sum(j * j) for p, j in setting.jacobians().items()})


def single_plate_mub_budget(phase, check=True):
    """Budget of any complete MUB realized by one plate of this phase.

    The coefficients do not depend on which solution triple is used.
    """
    if check and not complete_mub_feasible(phase):
        raise InfeasiblePhaseError(f"phase {phase} deg admits no complete set of MUB")
    d = np.radians(phase)
    return ErrorBudget({
        "phase": 1.0 / np.sin(d) ** 2,
        "axis": 48.0 * np.sin(d / 2) ** 2 - 4.0,
    })


def qwp_hwp_mub_budget(angle_pairs, averaged=False):
    """Budget of a QWP-HWP complete MUB.

    With ``averaged=True`` the HWP phase coefficient is replaced by its mean
    3/2 over uniformly distributed HWP angles.
    """
    setting = qwp_hwp_setting(angle_pairs)
    if not setting.is_complete_mub():
        raise NotMubError(f"angle pairs {list(angle_pairs)} do not realize a complete MUB")
    budget = mub_budget(setting).to_dict()
    if averaged:
        budget["phase_h"] = 1.5
    return ErrorBudget(budget)


def state_estimation_coefficients(state, setting):
    """Per-parameter coefficients of tr(rho_hat - rho)^2 for a qubit state.

    Linear inversion with the nominal (orthonormal) bases turns a shift of
    the realized Bloch rows ``dR`` into an estimate error ``dR s``, so each
    coefficient is ``|dR/dxi s|^2 / 2``.
    """
    state = np.asarray(state)
    if state.shape != (2, 2):
        raise ValueError("state_estimation_coefficients needs a single-qubit state")
    setting.require_complete_mub()
    s = density_to_bloch(state)
    return ErrorBudget({p: 0.5 * np.sum((j @ s) ** 2) for p, j in setting.jacobians().items()})


def state_estimation_budget(state, setting, uncertainty):
    return state_estimation_coefficients(state, setting).total(uncertainty)


def werner_two_qubit_error(p, eps1_sq, eps2_sq):
    """Systematic error p^2 (eps1^2 + eps2^2) / 4 of a two-qubit Werner state."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner weight p must be in [0, 1], got {p}")
    if eps1_sq < 0 or eps2_sq < 0:
        raise ValueError("squared errors must be nonnegative")
    return 0.25 * p * p * (eps1_sq + eps2_sq)
