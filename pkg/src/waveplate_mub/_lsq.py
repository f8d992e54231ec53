"""Batched Levenberg-Marquardt for many small least-squares problems at once.

Every row of ``x`` is an independent problem; ``fun(x, *args)`` must return
``(residuals, jacobian)`` with shapes ``(n, m)`` and ``(n, m, k)``. Rows
that converge or stall drop out of the active set, so the cost is dominated
by the slowest starts.
"""

import numpy as np


def levenberg_marquardt(fun, x, args=(), max_iter=500, lam0=1e-3,
                        ftol=1e-28, stall_rtol=1e-10, stall_floor=1e-8):
    x = np.array(x, dtype=float)
    n, k = x.shape
    args = tuple(np.asarray(a) for a in args)
    f, jac = fun(x, *args)
    cost = np.einsum("ij,ij->i", f, f)
    lam = np.full(n, lam0)
    eye = np.eye(k)
    active = np.flatnonzero(cost > ftol)

    for _ in range(max_iter):
        if active.size == 0:
            break
        fa, ja, ca, la = f[active], jac[active], cost[active], lam[active]
        jt = np.swapaxes(ja, 1, 2)
        a = jt @ ja + la[:, None, None] * eye
        g = np.einsum("nkm,nm->nk", jt, fa)
        xn = x[active] - np.linalg.solve(a, g[..., None])[..., 0]
        fn, jn = fun(xn, *(arg[active] for arg in args))
        cn = np.einsum("ij,ij->i", fn, fn)

        ok = cn < ca
        idx = active[ok]
        x[idx], f[idx], jac[idx], cost[idx] = xn[ok], fn[ok], jn[ok], cn[ok]
        lam[active] = np.clip(np.where(ok, la * 0.3, la * 10.0), 1e-10, 1e10)

        gain = (ca - cn) / np.maximum(ca, 1e-300)
        # stalls are only accepted away from zero residual (local minima)
        done = (
            (cost[active] <= ftol)
            | (lam[active] >= 1e10)
            | (ok & (gain < stall_rtol) & (cost[active] > stall_floor))
        )
        active = active[~done]
    return x, cost


def newton_polish(fun, x, args=(), iters=20):
    """Newton steps on square systems; keeps a step only if it lowers the residual."""
    x = np.array(x, dtype=float)
    args = tuple(np.asarray(a) for a in args)
    f, jac = fun(x, *args)
    cost = np.einsum("ij,ij->i", f, f)
    for _ in range(iters):
        try:
            step = np.linalg.solve(jac, f[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.einsum("nkm,nm->nk", np.linalg.pinv(jac), f)
        xn = x - step
        fn, jn = fun(xn, *args)
        cn = np.einsum("ij,ij->i", fn, fn)
        ok = cn < cost
        if not ok.any():
            break
        x[ok], f[ok], jac[ok], cost[ok] = xn[ok], fn[ok], jn[ok], cn[ok]
    return x, f
