"""Simulated MUB tomography of one or two polarization qubits.

Pipeline per point: Born-rule probabilities under the realized (possibly
miscalibrated) bases, optional counting statistics, linear inversion with
the nominal bases, projection onto density matrices, then the
Hilbert-Schmidt error against the true state.

Two-qubit records use the 9 product settings ``(i, j)`` in row-major order
(photon-1 basis ``i``) with outcomes ordered ``++, +-, -+, --``.

Random streams: trial ``t`` at sweep point ``k`` draws from
``SeedSequence(rng_seed, spawn_key=(k, t))``, so any single trial can be
reproduced in isolation.
"""

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ._config import TOL
from .bloch import PAULIS, bloch_to_density, hs_error, projectors_from_bloch
from .budget import mub_budget, state_estimation_coefficients
from .exceptions import SingularDesignError

EXACT = "exact"
SAMPLED = "sampled"

_EYE2 = np.eye(2, dtype=complex)
_NAMED_BLOCH = {
    "H": (0.0, 0.0, 1.0),
    "V": (0.0, 0.0, -1.0),
    "D": (1.0, 0.0, 0.0),
    "A": (-1.0, 0.0, 0.0),
    "R": (0.0, 1.0, 0.0),
    "L": (0.0, -1.0, 0.0),
}


# -- states -----------------------------------------------------------------------

def werner_qubit(name, p):
    """``p |phi><phi| + (1 - p) I/2`` for a named polarization H, V, D, A, R, L."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    try:
        r = np.array(_NAMED_BLOCH[name.upper()])
    except KeyError:
        raise ValueError(f"unknown state {name!r}; use one of {', '.join(_NAMED_BLOCH)}") from None
    return bloch_to_density(p * r)


def singlet(p=1.0):
    """Werner state ``p |Psi-><Psi-| + (1 - p) I/4``, ``|Psi-> = (|HV> - |VH>)/sqrt2``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    psi = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2)
    return p * np.outer(psi, psi).astype(complex) + (1 - p) * np.eye(4) / 4


def parse_state(spec):
    """``H:0.92`` style names; ``singlet`` or ``singlet:p`` for two qubits."""
    name, _, p = spec.partition(":")
    p = float(p) if p else 1.0
    if name.lower() == "singlet":
        return singlet(p)
    return werner_qubit(name, p)


# -- records ----------------------------------------------------------------------

@dataclass(frozen=True)
class CountRecord:
    """Per-setting outcome table: probabilities (exact) or integer counts."""

    values: np.ndarray
    exact: bool
    shots: int = 0

    @property
    def frequencies(self):
        if self.exact:
            return self.values
        return self.values / self.values.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class ReconstructionResult:
    estimate: np.ndarray
    pre_projection: np.ndarray
    hs_error_vs_truth: float
    projected: bool
    hs_error_unprojected: float = float("nan")


@dataclass(frozen=True)
class TomographyConfig:
    """One tomography run.

    ``settings`` holds one MeasurementSetting per qubit and ``miscalibration``
    one offset mapping per qubit (radians, keyed by parameter name).
    """

    settings: tuple
    miscalibration: tuple = ()
    photons_per_basis: int = 10**6
    trials: int = 100
    rng_seed: int = 0
    statistics: str = EXACT
    project: bool = True

    def __post_init__(self):
        if self.statistics not in (EXACT, SAMPLED):
            raise ValueError(f"statistics must be {EXACT!r} or {SAMPLED!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.statistics == SAMPLED and self.photons_per_basis < 1:
            raise ValueError("photons_per_basis must be >= 1 for sampled statistics")
        mis = tuple(dict(m) for m in self.miscalibration) or tuple({} for _ in self.settings)
        if len(mis) != len(self.settings):
            raise ValueError("need one miscalibration mapping per qubit")
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "miscalibration", mis)

    @property
    def qubits(self):
        return len(self.settings)

    def with_offset(self, qubit, parameter, offset):
        mis = [dict(m) for m in self.miscalibration]
        mis[qubit][parameter] = offset
        return TomographyConfig(
            self.settings, tuple(mis), self.photons_per_basis, self.trials,
            self.rng_seed, self.statistics, self.project,
        )


# -- forward model ------------------------------------------------------------------

def _as_bases(bases):
    """Normalize to a tuple of per-qubit (3, 3) Bloch arrays."""
    if isinstance(bases, np.ndarray) and bases.ndim == 2:
        return (bases,)
    return tuple(np.asarray(b, float) for b in bases)


def realized_bases(settings, miscalibration=None):
    """Per-qubit Bloch rows at nominal + offset plate parameters."""
    if not isinstance(settings, (tuple, list)):
        return settings.bloch_vectors(miscalibration)
    mis = miscalibration or [None] * len(settings)
    return tuple(s.bloch_vectors(m) for s, m in zip(settings, mis))


def _product_projectors(bases):
    per_qubit = [[projectors_from_bloch(r) for r in b] for b in _as_bases(bases)]
    ops = []
    for choice in itertools.product(*per_qubit):
        for outcome in itertools.product(*choice):
            ops.append(reduce(np.kron, outcome))
    n_out = 2 ** len(per_qubit)
    return np.array(ops).reshape(-1, n_out, 2 ** len(per_qubit), 2 ** len(per_qubit))


def outcome_probabilities(state, bases):
    """Exact Born-rule outcome table of ``state`` under product MUB settings."""
    ops = _product_projectors(bases)
    state = np.asarray(state)
    if state.shape != ops.shape[2:]:
        raise ValueError(f"state shape {state.shape} does not match bases {ops.shape[2:]}")
    probs = np.real(np.einsum("soij,ji->so", ops, state))
    return CountRecord(np.clip(probs, 0.0, None), exact=True)


def sample_counts(record, photons_per_basis, rng):
    """Binomial (two outcomes) or multinomial counts per setting.

    ``rng`` is a numpy Generator or an integer seed.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    probs = record.frequencies / record.frequencies.sum(axis=1, keepdims=True)
    if probs.shape[1] == 2:
        first = rng.binomial(photons_per_basis, probs[:, 0])
        counts = np.stack([first, photons_per_basis - first], axis=1)
    else:
        counts = np.array([rng.multinomial(photons_per_basis, p) for p in probs])
    return CountRecord(counts.astype(np.int64), exact=False, shots=photons_per_basis)


# -- inversion ------------------------------------------------------------------------

def _pauli_strings(n):
    return [reduce(np.kron, ps) for ps in itertools.product((_EYE2, *PAULIS), repeat=n)]


def _design_matrix(bases):
    """Rows: outcomes; columns: tr(Pi_m P_k) over Pauli strings P_k."""
    rows = []
    per_qubit = _as_bases(bases)
    for choice in itertools.product(*per_qubit):
        for signs in itertools.product((1.0, -1.0), repeat=len(per_qubit)):
            vecs = [np.concatenate([[1.0], s * r]) for s, r in zip(signs, choice)]
            rows.append(reduce(np.kron, vecs))
    return np.array(rows)


def linear_inversion(record, nominal_bases):
    """Unit-trace Hermitian matrix reproducing the frequencies under the nominal bases.

    Solved in least squares over all outcomes; exact when the data are
    consistent. The result may have negative eigenvalues.
    """
    per_qubit = _as_bases(nominal_bases)
    n = len(per_qubit)
    d = 2 ** n
    a = _design_matrix(per_qubit)
    f = np.asarray(record.frequencies, float).reshape(-1)
    if a.shape[0] != f.size:
        raise ValueError(f"record has {f.size} outcomes, bases give {a.shape[0]}")
    a_free = a[:, 1:]
    if np.linalg.matrix_rank(a_free) < a_free.shape[1]:
        raise SingularDesignError("nominal bases do not span the operator space")
    coeffs, *_ = np.linalg.lstsq(a_free, d * f - a[:, 0], rcond=None)
    paulis = _pauli_strings(n)
    out = paulis[0] + sum(c * p for c, p in zip(coeffs, paulis[1:]))
    out = out / d
    return 0.5 * (out + out.conj().T)


def _simplex_projection(w):
    """Euclidean projection of ``w`` onto {x >= 0, sum x = 1}."""
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, w.size + 1)
    rho = k[u - (css - 1) / k > 0][-1]
    tau = (css[rho - 1] - 1) / rho
    return np.maximum(w - tau, 0.0)


def project_to_physical(h):
    """Closest density matrix to a unit-trace Hermitian ``h`` in Hilbert-Schmidt norm."""
    h = 0.5 * (np.asarray(h) + np.asarray(h).conj().T)
    w, v = np.linalg.eigh(h)
    if w.min() >= 0 and abs(w.sum() - 1) <= TOL.algebraic:
        return h
    return (v * _simplex_projection(w)) @ v.conj().T


def reconstruct(record, nominal_bases, truth=None, project=True):
    pre = linear_inversion(record, nominal_bases)
    negative = np.linalg.eigvalsh(pre).min() < 0
    est = project_to_physical(pre) if project else pre
    err = hs_error(est, truth) if truth is not None else float("nan")
    err_pre = hs_error(pre, truth) if truth is not None else float("nan")
    return ReconstructionResult(est, pre, err, bool(project and negative), err_pre)


# -- experiments ------------------------------------------------------------------------

def trial_rng(rng_seed, point_index, trial_index):
    return np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(point_index, trial_index)))


def run_point(config, state, point_index=0):
    """All trials of one configuration. Returns the per-trial ReconstructionResults."""
    nominal = realized_bases(list(config.settings))
    real = realized_bases(list(config.settings), list(config.miscalibration))
    exact = outcome_probabilities(state, real)
    if config.statistics == EXACT:
        return [reconstruct(exact, nominal, state, config.project)]
    return [
        reconstruct(
            sample_counts(exact, config.photons_per_basis, trial_rng(config.rng_seed, point_index, t)),
            nominal, state, config.project,
        )
        for t in range(config.trials)
    ]


@dataclass(frozen=True)
class MonteCarloSummary:
    mean: float
    std: float
    errors: tuple


def monte_carlo(config, state, point_index=0):
    """Mean and sample standard deviation of the HS error over ``config.trials``."""
    if config.statistics != SAMPLED:
        raise ValueError("monte_carlo needs sampled statistics")
    errs = np.array([r.hs_error_vs_truth for r in run_point(config, state, point_index)])
    std = float(errs.std(ddof=1)) if errs.size > 1 else 0.0
    return MonteCarloSummary(float(errs.mean()), std, tuple(map(float, errs)))


def fit_through_origin(offsets, errors):
    """Least-squares ``c`` in ``error = c * offset^2``."""
    x2 = np.asarray(offsets, float) ** 2
    y = np.asarray(errors, float)
    denom = x2 @ x2
    if denom == 0:
        return float("nan")  # no nonzero offsets, nothing to fit
    return float(x2 @ y / denom)


@dataclass(frozen=True)
class SweepResult:
    """HS error against one plate-parameter offset on one qubit."""

    qubit: int
    parameter: str
    offsets: tuple
    mean: tuple
    std: tuple
    unprojected: tuple
    coefficient: float
    coefficient_std: float
    unprojected_coefficient: float
    first_order: float = float("nan")

    @property
    def gap(self):
        """Relative drop of the projected coefficient below first order."""
        return 1.0 - self.coefficient / self.first_order

    def rows(self):
        return list(zip(self.offsets, self.mean, self.std, self.unprojected))


def default_offsets(n=11, span=0.02):
    return tuple(float(x) for x in np.linspace(-span, span, n))


def sweep(config, state, qubit, parameter, offsets=None, first_order=float("nan")):
    """Sweep one plate parameter on one qubit; all other offsets from ``config``."""
    offsets = default_offsets() if offsets is None else tuple(map(float, offsets))
    per_point = [
        run_point(config.with_offset(qubit, parameter, o), state, point_index=k)
        for k, o in enumerate(offsets)
    ]
    errs = np.array([[r.hs_error_vs_truth for r in pt] for pt in per_point])  # (points, trials)
    unproj = np.array([[r.hs_error_unprojected for r in pt] for pt in per_point])
    per_trial = [fit_through_origin(offsets, errs[:, t]) for t in range(errs.shape[1])]
    return SweepResult(
        qubit=qubit,
        parameter=parameter,
        offsets=offsets,
        mean=tuple(map(float, errs.mean(axis=1))),
        std=tuple(map(float, errs.std(axis=1, ddof=1) if errs.shape[1] > 1 else np.zeros(len(offsets)))),
        unprojected=tuple(map(float, unproj.mean(axis=1))),
        coefficient=float(np.mean(per_trial)),
        coefficient_std=float(np.std(per_trial, ddof=1)) if len(per_trial) > 1 else 0.0,
        unprojected_coefficient=fit_through_origin(offsets, unproj.mean(axis=1)),
        first_order=first_order,
    )


def systematic_error_curve(state, setting, parameter, offsets, project=True):
    """Exact-statistics single-qubit HS error at each offset of ``parameter``."""
    config = TomographyConfig((setting,), statistics=EXACT, project=project)
    result = sweep(config, state, 0, parameter, offsets)
    return list(zip(result.offsets, result.mean))


def first_order_coefficient(state, settings, qubit, parameter):
    """First-order error coefficient for one plate parameter.

    Single qubit: the state-estimation coefficient. Two qubits: the Werner
    form ``p^2 eps^2 / 4`` with ``p`` read off the singlet weight; only
    meaningful for Werner-singlet states.
    """
    settings = tuple(settings)
    if len(settings) == 1:
        return state_estimation_coefficients(state, settings[0])[parameter]
    eps_sq = mub_budget(settings[qubit])[parameter]
    p = (4 * np.real(singlet(1.0).ravel().conj() @ np.asarray(state).ravel()) - 1) / 3
    return 0.25 * p * p * eps_sq


@dataclass(frozen=True)
class ExperimentSummary:
    sweeps: tuple = field(default=())

    def coefficient(self, qubit, parameter):
        for s in self.sweeps:
            if s.qubit == qubit and s.parameter == parameter:
                return s.coefficient
        raise KeyError((qubit, parameter))

    @property
    def total(self):
        """Sum of fitted coefficients over all swept plates and qubits."""
        return float(sum(s.coefficient for s in self.sweeps))

    def per_qubit_mean(self, parameter):
        return float(np.mean([s.coefficient for s in self.sweeps if s.parameter == parameter]))

    def discrepancies(self, expected, rel_tol=0.15):
        """Lines for every parameter whose per-qubit mean misses ``expected`` by > rel_tol."""
        lines = []
        for param, target in expected.items():
            got = self.per_qubit_mean(param)
            if abs(got - target) > rel_tol * abs(target):
                lines.append(
                    f"{param}: fitted {got:.4f} vs expected {target:.4f} "
                    f"({100 * (got / target - 1):+.1f}%, tolerance {100 * rel_tol:.0f}%)"
                )
        return lines


def two_qubit_experiment(config, state=None, offsets=None, parameters=None):
    """Sweep every angle parameter of both photons' settings.

    Defaults to the singlet. Each sweep offsets one plate on one photon.
    """
    if config.qubits != 2:
        raise ValueError("two_qubit_experiment needs two settings")
    state = singlet() if state is None else state
    sweeps = []
    for q, setting in enumerate(config.settings):
        for param in parameters or setting.angle_parameters:
            fo = first_order_coefficient(state, config.settings, q, param)
            sweeps.append(sweep(config, state, q, param, offsets, first_order=fo))
    return ExperimentSummary(tuple(sweeps))
