"""Polarization algebra for single wave plates and QWP-HWP stacks.

Public functions take angles in degrees. The ``_rad`` kernels work in
radians, broadcast over numpy arrays and are what the rest of the package
builds on.

The polarizing beam splitter measures sigma_z, i.e. Bloch vector (0, 0, 1).
A plate with retardation ``delta`` and optic axis ``theta`` rotates Bloch
vectors by ``delta`` about ``n(theta) = (sin 2theta, 0, cos 2theta)``.
"""

from dataclasses import dataclass

import numpy as np

from ._config import TOL

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def reduce_axis(deg):
    """Optic-axis angle modulo 180 degrees, in [0, 180)."""
    return _reduce(deg, 180.0)


def reduce_phase(deg):
    """Retardation modulo 360 degrees, in [0, 360)."""
    return _reduce(deg, 360.0)


def _reduce(deg, period):
    # np.mod(-1e-17, 180) == 180.0, so fold the upper edge back to 0
    out = np.mod(deg, period)
    out = np.where(out >= period, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WavePlate:
    """A birefringent plate: retardation ``phase`` and optic ``axis`` (degrees)."""

    phase: float
    axis: float

    def __post_init__(self):
        object.__setattr__(self, "phase", reduce_phase(float(self.phase)))
        object.__setattr__(self, "axis", reduce_axis(float(self.axis)))

    def unitary(self):
        return waveplate_unitary(self.axis, self.phase)


# -- radian kernels -----------------------------------------------------------

def _single_bloch_rad(theta, delta):
    theta, delta = np.broadcast_arrays(np.asarray(theta, float), np.asarray(delta, float))
    s = np.sin(delta / 2) ** 2
    return np.stack(
        [
            s * np.sin(4 * theta),
            -np.sin(delta) * np.sin(2 * theta),
            1 - 2 * s * np.sin(2 * theta) ** 2,
        ],
        axis=-1,
    )


def _single_bloch_jac_rad(theta, delta):
    """Return (dr/dtheta, dr/ddelta) for the single-plate Bloch vector."""
    theta, delta = np.broadcast_arrays(np.asarray(theta, float), np.asarray(delta, float))
    s = np.sin(delta / 2) ** 2
    d_theta = np.stack(
        [
            4 * s * np.cos(4 * theta),
            -2 * np.sin(delta) * np.cos(2 * theta),
            -4 * s * np.sin(4 * theta),
        ],
        axis=-1,
    )
    d_delta = np.stack(
        [
            0.5 * np.sin(delta) * np.sin(4 * theta),
            -np.cos(delta) * np.sin(2 * theta),
            -np.sin(delta) * np.sin(2 * theta) ** 2,
        ],
        axis=-1,
    )
    return d_theta, d_delta


def _axis_vector(theta):
    return np.array([np.sin(2 * theta), 0.0, np.cos(2 * theta)])


def _rotate(v, theta, delta):
    """Rotate Bloch vector ``v`` by a plate (theta, delta), radians."""
    n = _axis_vector(theta)
    return v * np.cos(delta) + np.cross(n, v) * np.sin(delta) + n * (n @ v) * (1 - np.cos(delta))


def _rotate_d_axis(v, theta, delta):
    n = _axis_vector(theta)
    dn = 2.0 * np.array([np.cos(2 * theta), 0.0, -np.sin(2 * theta)])
    return np.cross(dn, v) * np.sin(delta) + (dn * (n @ v) + n * (dn @ v)) * (1 - np.cos(delta))


def _rotate_d_phase(v, theta, delta):
    return np.cross(_axis_vector(theta), _rotate(v, theta, delta))


# -- public API (degrees) -------------------------------------------------------

def waveplate_unitary(axis, phase):
    """Jones matrix of a plate with optic axis ``axis`` and retardation ``phase``.

    The global phase is kept as is (no determinant normalization), so
    compare conjugated observables rather than raw matrices.
    """
    th, d = np.radians(axis), np.radians(phase)
    c2, s2 = np.cos(th) ** 2, np.sin(th) ** 2
    e = np.exp(1j * d)
    off = 0.5 * (1 - e) * np.sin(2 * th)
    return np.array([[c2 + e * s2, off], [off, s2 + e * c2]])


def bloch_of_unitary(u):
    """Bloch vector of ``u sigma_z u^dagger``."""
    op = u @ SIGMA_Z @ u.conj().T
    return np.real([np.trace(op @ p) for p in PAULIS]) / 2


def bloch_from_single_waveplate(axis, phase):
    """Bloch vector measured by one plate in front of the PBS."""
    return _single_bloch_rad(np.radians(axis), np.radians(phase))


def bloch_from_qwp_hwp(q, h):
    """Bloch vector measured by a QWP at ``q`` after a HWP at ``h``."""
    q, h = np.broadcast_arrays(np.radians(q), np.radians(h))
    a = 4 * h - 2 * q
    return np.stack([np.sin(2 * q) * np.cos(a), np.sin(a), np.cos(2 * q) * np.cos(a)], axis=-1)


def projectors_from_bloch(r):
    """The two rank-1 projectors ``(I +- r.sigma)/2`` of a unit Bloch vector."""
    r = np.asarray(r, float)
    if r.shape != (3,) or abs(np.linalg.norm(r) - 1) > TOL.algebraic * 10:
        raise ValueError(f"projectors need a unit Bloch vector, got {r!r}")
    rs = sum(c * p for c, p in zip(r, PAULIS))
    eye = np.eye(2, dtype=complex)
    return (eye + rs) / 2, (eye - rs) / 2


def bloch_to_density(r):
    r = np.asarray(r, float)
    return (np.eye(2, dtype=complex) + sum(c * p for c, p in zip(r, PAULIS))) / 2


def density_to_bloch(rho):
    rho = np.asarray(rho)
    return np.real([np.trace(rho @ p) for p in PAULIS])


def hs_error(a, b):
    """Squared Hilbert-Schmidt distance tr[(a - b)^2]."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.real(np.sum(diff * diff.conj())))


def check_density(rho, tol=TOL):
    """Raise ValueError unless ``rho`` is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol.algebraic:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol.algebraic:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -tol.psd:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho
