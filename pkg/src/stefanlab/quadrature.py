"""Adaptive Simpson quadrature, vectorized over the active interval set."""

import numpy as np

from .errors import NumericalError

DEFAULT_TOL = 1e-10
DEFAULT_BUDGET = 10**6


def adaptive_simpson(func, edges, tol=DEFAULT_TOL, budget=DEFAULT_BUDGET):
    """Integrate ``func`` over each segment ``[edges[i], edges[i+1]]``.

    Returns the per-segment integrals. The tolerance is shared among segments
    in proportion to their length, so any partial sum of the result has an
    estimated absolute error below ``tol``. ``func`` must accept arrays.
    Raises NumericalError once more than ``budget`` interval splits are needed.
    """
    if not tol > 0:
        raise ValueError(f"quadrature tolerance must be positive, got {tol}")
    edges = np.asarray(edges, dtype=float)
    a0, b0 = edges[:-1], edges[1:]
    nseg = a0.size
    out = np.zeros(nseg)
    if nseg == 0:
        return out
    width = np.abs(b0 - a0)
    total = width.sum()
    if total == 0:
        return out
    owner = np.arange(nseg)
    a, b = a0.copy(), b0.copy()
    m = 0.5 * (a + b)
    fa, fm, fb = func(a), func(m), func(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    share = tol * width / total
    splits = 0
    while owner.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = func(lm), func(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        done = (np.abs(err) <= 15.0 * share) | (np.abs(b - a) <= 1e-14 * np.maximum(1.0, np.abs(a)))
        np.add.at(out, owner[done], (left + right + err / 15.0)[done])
        keep = ~done
        nsplit = int(np.count_nonzero(keep))
        splits += nsplit
        if splits > budget:
            raise NumericalError(
                "adaptive Simpson exceeded its splitting budget",
                budget=budget,
                pending=nsplit,
            )
        if not nsplit:
            break
        owner = np.concatenate([owner[keep], owner[keep]])
        a, m, b = (
            np.concatenate([a[keep], m[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
            np.concatenate([m[keep], b[keep]]),
        )
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        share = np.concatenate([share[keep], share[keep]]) / 2.0
    return out


def cumulative_integral(func, points, tol=DEFAULT_TOL, breaks=(), budget=DEFAULT_BUDGET):
    """``int_0^s func`` for every ``s`` in ``points`` (any sign, any order).

    ``breaks`` are kinks of the integrand; they become segment edges so the
    Simpson rule never straddles them.
    """
    s = np.asarray(points, dtype=float)
    flat = s.ravel()
    result = np.zeros_like(flat)
    for sign in (1.0, -1.0):
        mask = sign * flat > 0
        if not np.any(mask):
            continue
        targets = sign * flat[mask]
        kinks = [sign * x for x in breaks if sign * x > 0 and sign * x < targets.max()]
        edges = np.unique(np.concatenate([[0.0], targets, kinks]))
        pieces = adaptive_simpson(lambda t: func(sign * t), edges, tol=tol, budget=budget)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        idx = np.searchsorted(edges, targets)
        result[mask] = sign * cum[idx]
    return result.reshape(s.shape)
