"""Mutually unbiased bases realizable by a single wave plate.

Two bases are unbiased when their Bloch vectors are orthogonal. One plate
of phase ``delta`` turned to angles ``theta_i`` gives Bloch vectors
``r(theta_i)``; this module finds the angles (and the phases) for which
two or three of those are pairwise orthogonal.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._config import TOL
from ._lsq import levenberg_marquardt, newton_polish
from .bloch import _single_bloch_jac_rad, _single_bloch_rad, reduce_axis, reduce_phase
from .exceptions import ConvergenceError, InfeasiblePhaseError

DEFAULT_STARTS = 100
TWO_MUB_WINDOW = (45.0, 315.0)
TWP_ANGLE = float(np.degrees(np.arccos(-1.0 / 3.0) / 4.0))  # ~27.37 deg

_PAIRS = ((0, 1), (1, 2), (0, 2))


def _snap(angles):
    angles = np.asarray(reduce_axis(np.asarray(angles, float)), float)
    # optimizer output like 179.9999999999 is the same axis as 0
    return np.where(180.0 - angles < 1e-7, 0.0, angles)


@dataclass(frozen=True)
class MubPair:
    phase: float
    theta1: float
    theta2: float
    defect: float


@dataclass(frozen=True)
class MubTriple:
    """Three plate angles (ascending, degrees in [0, 180)) at one phase."""

    phase: float
    theta1: float
    theta2: float
    theta3: float
    residual: float

    @classmethod
    def from_angles(cls, phase, angles):
        t = np.sort(_snap(angles))
        r = _single_bloch_rad(np.radians(t), np.radians(phase))
        dots = [r[i] @ r[j] for i, j in _PAIRS]
        return cls(reduce_phase(phase), *map(float, t), float(np.max(np.abs(dots))))

    @property
    def angles(self):
        return (self.theta1, self.theta2, self.theta3)

    def bloch_vectors(self):
        """Rows are the Bloch vectors of the three bases."""
        return _single_bloch_rad(np.radians(self.angles), np.radians(self.phase))

    def gram(self):
        r = self.bloch_vectors()
        return r @ r.T


@dataclass(frozen=True)
class SolutionFamily:
    """A solution triple and its three images under the angle symmetries."""

    base: MubTriple
    images: tuple

    @property
    def members(self):
        return (self.base, *self.images)


@dataclass(frozen=True)
class PhaseScan:
    grid: tuple  # ((phase_deg, potential), ...)
    windows: tuple = field(default=())  # ((lo_deg, hi_deg), ...)

    @property
    def feasible_window(self):
        return self.windows[0] if self.windows else None


# -- two bases ------------------------------------------------------------------

def unbiasedness_defect(phase, theta_a, theta_b):
    """Dot product of the Bloch vectors at two plate angles; 0 means unbiased."""
    d = np.radians(phase)
    ra = _single_bloch_rad(np.radians(theta_a), d)
    rb = _single_bloch_rad(np.radians(theta_b), d)
    return np.sum(ra * rb, axis=-1)


def two_mub_feasible(phase):
    lo, hi = TWO_MUB_WINDOW
    return lo <= reduce_phase(phase) <= hi


def two_mub_angles(phase):
    """Closed-form symmetric pair theta2 = -theta1, both at 45 deg from (0, 0, 1)."""
    if not two_mub_feasible(phase):
        raise InfeasiblePhaseError(
            f"phase {phase} deg cannot realize two MUB; it must lie in "
            f"[{TWO_MUB_WINDOW[0]:g}, {TWO_MUB_WINDOW[1]:g}] deg modulo 360"
        )
    arg = np.sqrt(2 - np.sqrt(2)) / 2 / np.sin(np.radians(phase) / 2)
    theta1 = 0.5 * np.degrees(np.arcsin(np.clip(arg, -1.0, 1.0)))
    defect = float(unbiasedness_defect(phase, theta1, -theta1))
    return MubPair(reduce_phase(phase), reduce_axis(theta1), reduce_axis(-theta1), defect)


# -- three bases ----------------------------------------------------------------

def _dot_residuals(x, delta):
    """Pairwise dot products of r(x_i) and their Jacobian, batched over rows."""
    d = delta[:, None]
    r = _single_bloch_rad(x, d)
    dr, _ = _single_bloch_jac_rad(x, d)
    n = x.shape[0]
    f = np.empty((n, 3))
    jac = np.zeros((n, 3, 3))
    for k, (i, j) in enumerate(_PAIRS):
        f[:, k] = np.einsum("nc,nc->n", r[:, i], r[:, j])
        jac[:, k, i] = np.einsum("nc,nc->n", dr[:, i], r[:, j])
        jac[:, k, j] = np.einsum("nc,nc->n", r[:, i], dr[:, j])
    return f, jac


def _starts(starts, rng_seed):
    if starts < 1:
        raise ValueError("starts must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    return rng.uniform(0.0, np.pi, size=(starts, 3))


def _multistart(phases_deg, starts, rng_seed):
    """Run every start at every phase. Returns angles (P, S, 3) rad and costs (P, S)."""
    phases = np.atleast_1d(np.asarray(phases_deg, float))
    x0 = _starts(starts, rng_seed)
    p, s = phases.size, x0.shape[0]
    x = np.broadcast_to(x0, (p, s, 3)).reshape(-1, 3)
    delta = np.repeat(np.radians(phases), s)
    x, cost = levenberg_marquardt(_dot_residuals, x, args=(delta,))
    return x.reshape(p, s, 3), cost.reshape(p, s)


def frame_potential(phase, starts=DEFAULT_STARTS, rng_seed=0):
    """Minimum over plate angles of the summed squared pairwise dot products."""
    _, cost = _multistart([phase], starts, rng_seed)
    return float(cost.min())


def complete_mub_feasible(phase, starts=DEFAULT_STARTS, rng_seed=0, tol=TOL):
    return frame_potential(phase, starts, rng_seed) <= tol.zero_potential


def symmetry_images(angles):
    """The angle maps 90-t, 90+t and 180-t that preserve all dot products."""
    t = np.asarray(angles, float)
    return [_snap(90.0 - t), _snap(90.0 + t), _snap(180.0 - t)]


def _same_set(a, b, tol_deg):
    a, b = np.asarray(a), np.asarray(b)
    for perm in itertools.permutations(range(3)):
        diff = (a - b[list(perm)] + 90.0) % 180.0 - 90.0
        if np.max(np.abs(diff)) <= tol_deg:
            return True
    return False


def _family(phase, angles):
    orbit = [np.sort(_snap(angles))] + [np.sort(im) for im in symmetry_images(angles)]
    base = min(orbit, key=tuple)
    images = [np.sort(im) for im in symmetry_images(base)]
    return SolutionFamily(
        MubTriple.from_angles(phase, base),
        tuple(MubTriple.from_angles(phase, im) for im in images),
    )


def solve_complete_mub(phase, starts=DEFAULT_STARTS, rng_seed=0, tol=TOL):
    """All solution families (orbits under the angle symmetries) at ``phase``.

    Returns an empty list when the frame potential does not vanish.
    """
    x, cost = _multistart([phase], starts, rng_seed)
    x, cost = x[0], cost[0]
    if cost.min() > tol.zero_potential:
        return []

    cand = x[cost <= tol.zero_potential]
    delta = np.full(len(cand), np.radians(phase))
    cand, f = newton_polish(_dot_residuals, cand, args=(delta,))
    good = np.max(np.abs(f), axis=1) <= tol.triple_residual
    if not good.any():
        raise ConvergenceError(
            f"frame potential vanishes at {phase} deg but no triple reached "
            f"residual {tol.triple_residual:g}"
        )

    families = []
    for angles in np.degrees(cand[good]):
        fam = _family(phase, angles)
        if any(_same_set(fam.base.angles, m.angles, tol.dedup_deg)
               for known in families for m in known.members):
            continue
        families.append(fam)
    families.sort(key=lambda fam: fam.base.angles)
    return families


def scan_phase_window(lo, hi, step, starts=DEFAULT_STARTS, rng_seed=0, tol=TOL):
    """Frame potential on a phase grid plus bisection-refined feasible windows."""
    if not lo < hi or step <= 0:
        raise ValueError("need lo < hi and step > 0")
    grid = np.arange(lo, hi + step / 2, step)
    _, cost = _multistart(grid, starts, rng_seed)
    potential = cost.min(axis=1)
    feasible = potential <= tol.zero_potential

    def refine(a, b):
        # a infeasible, b feasible (either order on the axis)
        while abs(b - a) > tol.window_resolution_deg:
            mid = 0.5 * (a + b)
            if complete_mub_feasible(mid, starts, rng_seed, tol):
                b = mid
            else:
                a = mid
        return 0.5 * (a + b)

    windows = []
    i = 0
    while i < grid.size:
        if not feasible[i]:
            i += 1
            continue
        j = i
        while j + 1 < grid.size and feasible[j + 1]:
            j += 1
        left = grid[i] if i == 0 else refine(grid[i - 1], grid[i])
        right = grid[j] if j == grid.size - 1 else refine(grid[j + 1], grid[j])
        windows.append((float(left), float(right)))
        i = j + 1
    return PhaseScan(tuple(zip(map(float, grid), map(float, potential))), tuple(windows))


# -- analytic intersection solutions ----------------------------------------------

def real_polynomial_roots(coeffs, tol=1e-10, imag_tol=1e-8):
    """Real roots of a polynomial (highest degree first) via its companion matrix.

    Each root is Newton-polished until ``|p(x)| <= tol``.
    """
    c = np.asarray(coeffs, float)
    c = c / c[0]
    n = c.size - 1
    companion = np.zeros((n, n))
    companion[0, :] = -c[1:]
    companion[1:, :-1] = np.eye(n - 1)
    eig = np.linalg.eigvals(companion)
    dc = np.polyder(c)
    roots = []
    for z in eig[np.abs(eig.imag) <= imag_tol].real:
        for _ in range(50):
            val = np.polyval(c, z)
            if abs(val) <= tol * 1e-3:
                break
            z -= val / np.polyval(dc, z)
        if abs(np.polyval(coeffs, z)) > tol:
            raise ConvergenceError(f"root {z} did not reach residual {tol:g}")
        roots.append(float(z))
    return sorted(roots)


def quartic_roots():
    """Real roots of 3x^4 + 4x + 2 = 0 (cosines of the intersection phases)."""
    return real_polynomial_roots([3.0, 0.0, 0.0, 4.0, 2.0])


def intersection_solutions():
    """Closed-form triples at the phases where solution branches cross."""
    out = [MubTriple.from_angles(120.0, [0.0, TWP_ANGLE, TWP_ANGLE + 90.0])]
    for x in reversed(quartic_roots()):
        phase = np.degrees(np.arccos(x))
        y = np.sqrt(x * x / (2 * (1 - x * x)))
        t1 = 0.5 * np.degrees(np.arcsin(y))
        candidates = [
            MubTriple.from_angles(phase, [t1, 45.0, 90.0 - t1]),
            MubTriple.from_angles(phase, [t1, 90.0 - t1, 135.0]),
        ]
        out.append(min(candidates, key=lambda m: m.residual))
    return out
