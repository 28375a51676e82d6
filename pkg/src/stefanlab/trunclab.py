"""Truncation-convergence checks on concrete 1D sequences.

The oscillating counterexample ``v_n = n**a`` on the intervals
``]i/n, i/n + 1/n**2[`` (``i = 0..n-1``) is handled with exact interval
measures; grid sampling is only used when a nodal field is asked for.
"""

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

from .errors import ResolutionError
from .mesh import Grid, GridFunction

__all__ = [
    "SequenceSpec",
    "Counterexample",
    "counterexample_sequence",
    "tail_integral",
    "tail_bound",
    "check_strong_truncation_lemma",
    "counterexample_report",
    "weak_pairing_trend",
    "l1_trunc_trend",
    "PROBES",
    "MIN_NODES_PER_INTERVAL",
]

MIN_NODES_PER_INTERVAL = 4
WEAK_TOL = 0.10

# smooth probes on ]0,1[ with their exact integrals
PROBES = {
    "one": (lambda x: np.ones_like(x), 1.0),
    "x": (lambda x: x, 0.5),
    "sin": (lambda x: np.sin(np.pi * x), 2.0 / math.pi),
    "exp": (np.exp, math.e - 1.0),
}

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class SequenceSpec:
    kind: str
    n: int
    amplitude_exp: float = 1.0
    grid: Grid = None

    def __post_init__(self):
        if self.kind not in ("counterexample", "smooth", "random"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "counterexample" and self.n < 2:
            raise ValueError(f"counterexample needs n >= 2, got {self.n}")


@dataclass(frozen=True)
class Counterexample:
    """One member of the oscillating family, with closed-form integrals."""

    n: int
    amplitude_exp: float
    field: GridFunction = None

    @property
    def amplitude(self):
        return float(self.n) ** self.amplitude_exp

    @property
    def support_measure(self):
        return 1.0 / self.n

    @property
    def mass(self):
        return self.amplitude / self.n

    def truncated_l1(self, k):
        if not k > 0:
            raise ValueError(f"truncation level must be positive, got {k}")
        return min(k, self.amplitude) / self.n

    def lp_power(self, p):
        """``int |v|^p``."""
        return self.amplitude**p / self.n

    def pairing(self, rho):
        """``int v rho`` by 8-point Gauss-Legendre on every interval."""
        n = self.n
        left = np.arange(n) / n
        half = 0.5 / n**2
        x = (left + half)[:, None] + half * _GL_NODES[None, :]
        return float(self.amplitude * half * np.sum(rho(x) @ _GL_WEIGHTS))


def _intervals_node_counts(n, grid):
    h = grid.spacing[0]
    a = np.arange(n) / n
    b = a + 1.0 / n**2
    # nodes x_j = j h with a < x_j < b, j in 1..cells
    lo = np.floor(a / h) + 1
    hi = np.ceil(b / h) - 1
    hi = np.minimum(hi, grid.cells[0])
    return np.maximum(hi - lo + 1, 0)


def counterexample_sequence(n, amplitude_exp=1.0, grid=None):
    """The ``n``-th oscillating function, sampled on ``grid`` when one is given.

    Raises ResolutionError if some interval of length ``1/n**2`` holds fewer
    than four nodes.
    """
    SequenceSpec("counterexample", n, amplitude_exp)
    if grid is None:
        return Counterexample(n, amplitude_exp)
    if grid.dim != 1 or grid.lengths[0] != 1.0:
        raise ValueError("counterexample lives on a 1D grid of ]0,1[")
    counts = _intervals_node_counts(n, grid)
    if counts.min() < MIN_NODES_PER_INTERVAL:
        need = math.ceil(MIN_NODES_PER_INTERVAL * n**2) + 1
        raise ResolutionError(
            f"intervals of length 1/n^2 = {1 / n**2:g} hold as few as {int(counts.min())} nodes; "
            f"use at least about {need} cells"
        )
    x = grid.coordinates()[0]
    frac = x * n - np.floor(x * n)
    inside = (frac > 0) & (frac * n < 1.0)
    values = np.where(inside, float(n) ** amplitude_exp, 0.0)
    return Counterexample(n, amplitude_exp, GridFunction(grid, values))


def _vals(w):
    return (w.grid, w.values) if isinstance(w, GridFunction) else (None, np.asarray(w, float))


def tail_integral(w, k):
    """``int_{|w| >= k} |w|``."""
    grid, v = _vals(w)
    a = np.abs(v)
    return float(np.sum(a[a >= k]) * grid.cell_volume)


def tail_bound(w, k, p):
    """``k**(1-p) |w|_p^p``, which dominates the tail integral for p >= 1."""
    grid, v = _vals(w)
    return float(k ** (1 - p) * grid.lp(v, p) ** p)


@dataclass
class StrongVerdict:
    p: float
    lemma_applies: bool
    chain: list = field(default_factory=list)
    interpolation: list = field(default_factory=list)
    l1_gaps: list = field(default_factory=list)
    l1_trend: str = ""

    @property
    def chain_holds(self):
        return all(c["holds"] for c in self.chain)

    @property
    def interpolation_holds(self):
        return all(c["holds"] for c in self.interpolation)

    def to_dict(self):
        out = asdict(self)
        out["chain_holds"] = self.chain_holds
        out["interpolation_holds"] = self.interpolation_holds
        return out


def _trend(values, factor=2.0):
    v = np.asarray(values, float)
    if np.all(v == 0):
        return "zero"
    if v[-1] * factor <= v[0] and np.all(np.diff(v) <= 1e-12 * v[0]):
        return "decreasing"
    if v[-1] >= factor * v[0]:
        return "growing"
    return "flat"


def check_strong_truncation_lemma(family, v_limit, p, k_list, q_list=(), bound=None):
    """Evaluate the truncation chain for every member of ``family`` and every k.

    For each ``(n, k)`` records
    ``|v_n - v|_1 <= |T_k v_n - T_k v|_1 + k**(1-p) (|v_n|_p^p + |v|_p^p)``
    and for each ``(n, q)`` with ``1 < q < p`` the interpolation bound
    ``|w|_q <= |w|_1**(1-eta) |w|_p**eta``. ``bound`` caps ``sup |v_n|_p``;
    by default it is twice the first member's norm.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    family = list(family)
    if not family:
        raise ValueError("empty family")
    grid = v_limit.grid
    norms = [grid.lp(w.values, p) for w in family]
    cap = 2.0 * max(norms[0], 1e-300) if bound is None else bound
    if max(norms) > cap * (1 + 1e-12):
        raise ValueError(f"family is not bounded in L^{p}: norms {norms} exceed {cap}")
    v = v_limit.values
    vp = grid.lp(v, p) ** p
    verdict = StrongVerdict(p=p, lemma_applies=p > 1)
    for idx, w in enumerate(family):
        diff = w.values - v
        gap = grid.lp(diff, 1)
        verdict.l1_gaps.append(gap)
        wp = norms[idx] ** p
        for k in k_list:
            trunc = grid.lp(np.clip(w.values, -k, k) - np.clip(v, -k, k), 1)
            rhs = trunc + k ** (1 - p) * (wp + vp)
            verdict.chain.append(
                {"member": idx, "k": k, "lhs": gap, "rhs": rhs, "slack": rhs - gap, "holds": gap <= rhs * (1 + 1e-12)}
            )
        for q in q_list:
            if not 1 < q < p:
                raise ValueError(f"interpolation exponents need 1 < q < p, got q={q}")
            eta = (1 - 1 / q) / (1 - 1 / p)
            lhs = grid.lp(diff, q)
            rhs = gap ** (1 - eta) * grid.lp(diff, p) ** eta
            verdict.interpolation.append(
                {"member": idx, "q": q, "eta": eta, "lhs": lhs, "rhs": rhs, "holds": lhs <= rhs * (1 + 1e-12)}
            )
    verdict.l1_trend = _trend(verdict.l1_gaps)
    return verdict


def weak_pairing_trend(pairings, exact, tol=WEAK_TOL):
    """"converging" when relative errors shrink and end within ``tol``; "diverging" when they grow."""
    err = np.abs(np.asarray(pairings, float) - exact) / abs(exact)
    if err[-1] <= tol and err[-1] <= err[0]:
        return "converging"
    if err[-1] > err[0] + tol:
        return "diverging"
    return "inconclusive"


def l1_trunc_trend(values, factor=2.0):
    """"vanishing" when every step shrinks the value by at least ``factor``."""
    v = np.asarray(values, float)
    if np.all(v[1:] * factor <= v[:-1]):
        return "vanishing"
    return "persistent"


@dataclass
class CounterexampleVerdict:
    amplitude_exp: float
    n_list: list
    masses: list
    truncated_l1: dict
    pairings: dict
    exact_pairings: dict
    weak_pairing_trend: str
    l1_trunc_trend: str
    weak_convergence_to_indicator: str
    notes: list = field(default_factory=list)

    def to_dict(self):
        out = asdict(self)
        out["truncated_l1"] = {str(k): v for k, v in self.truncated_l1.items()}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def counterexample_report(n_list=(10, 100, 1000), amplitude_exp=1.0, k_list=(0.5, 1.0, 2.0), probes=None, tol=WEAK_TOL):
    """Exact masses, truncation norms and probe pairings along the family."""
    probes = PROBES if probes is None else probes
    members = [counterexample_sequence(n, amplitude_exp) for n in n_list]
    trunc = {k: [m.truncated_l1(k) for m in members] for k in k_list}
    pairings = {name: [m.pairing(rho) for m in members] for name, (rho, _) in probes.items()}
    exact = {name: val for name, (_, val) in probes.items()}
    trends = {name: weak_pairing_trend(pairings[name], exact[name], tol) for name in probes}
    weak = "converging" if all(t == "converging" for t in trends.values()) else (
        "diverging" if any(t == "diverging" for t in trends.values()) else "inconclusive"
    )
    l1 = "vanishing" if all(l1_trunc_trend(v) == "vanishing" for v in trunc.values()) else "persistent"
    masses = [m.mass for m in members]
    notes = []
    if amplitude_exp != 1.0:
        notes.append(
            f"total mass n^{amplitude_exp - 1:g} is not constant along the family "
            f"({masses[0]:g} .. {masses[-1]:g}), so it cannot tend weakly in L^1 to the indicator"
        )
    return CounterexampleVerdict(
        amplitude_exp=amplitude_exp,
        n_list=list(n_list),
        masses=masses,
        truncated_l1=trunc,
        pairings=pairings,
        exact_pairings=exact,
        weak_pairing_trend=weak,
        l1_trunc_trend=l1,
        weak_convergence_to_indicator="holds" if weak == "converging" else "fails",
        notes=notes,
    )
