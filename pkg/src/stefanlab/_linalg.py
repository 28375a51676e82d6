"""Linear solvers used by the mesh and solver modules.

Right-hand sides are stacked along the leading axes, the unknown index is last.
"""

import numpy as np
from scipy.linalg import solve_banded

from .errors import NumericalError


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve a tridiagonal system for one or many right-hand sides.

    ``lower[i]`` couples row ``i+1`` to column ``i`` and ``upper[i]`` couples
    row ``i`` to column ``i+1``; both have length ``len(diag) - 1``.
    """
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    b = np.asarray(rhs, dtype=float)
    flat = b.reshape(-1, n).T
    try:
        x = solve_banded((1, 1), ab, flat, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"tridiagonal solve failed: {exc}", size=n) from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError("tridiagonal solve produced non-finite values", size=n)
    return x.T.reshape(b.shape)


def pcg(matvec, rhs, diag=None, rtol=1e-10, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients, vectorized over stacked systems.

    Every system is iterated until ``|r| <= rtol * |b|`` in the Euclidean norm.
    ``matvec`` receives a ``(k, n)`` stack and must return the same shape.
    """
    b = np.asarray(rhs, dtype=float)
    shape = b.shape
    n = shape[-1]
    b = b.reshape(-1, n)
    if maxiter is None:
        maxiter = 10 * n + 100
    inv_diag = None if diag is None else 1.0 / np.broadcast_to(diag, shape).reshape(-1, n)

    def apply(v):
        return np.asarray(matvec(v)).reshape(-1, n)

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).reshape(-1, n)
    r = b - apply(x) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b, axis=1)
    target = rtol * bnorm
    z = r * inv_diag if inv_diag is not None else r.copy()
    p = z.copy()
    rz = np.einsum("ij,ij->i", r, z)
    active = np.linalg.norm(r, axis=1) > target
    it = 0
    while np.any(active):
        if it >= maxiter:
            res = np.linalg.norm(r, axis=1)
            raise NumericalError(
                "conjugate gradients did not converge",
                iterations=it,
                relative_residual=float(np.max(res[active] / np.where(bnorm[active] > 0, bnorm[active], 1.0))),
            )
        ap = apply(p)
        pap = np.einsum("ij,ij->i", p, ap)
        if np.any(pap[active] <= 0):
            raise NumericalError("operator is not positive definite", iterations=it)
        alpha = np.where(active, rz / np.where(active, pap, 1.0), 0.0)
        x += alpha[:, None] * p
        r -= alpha[:, None] * ap
        active = np.linalg.norm(r, axis=1) > target
        z = r * inv_diag if inv_diag is not None else r.copy()
        rz_new = np.einsum("ij,ij->i", r, z)
        beta = np.where(active, rz_new / np.where(rz != 0, rz, 1.0), 0.0)
        p = z + beta[:, None] * p
        rz = rz_new
        it += 1
    return x.reshape(shape)
