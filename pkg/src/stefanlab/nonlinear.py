"""Piecewise-linear nonlinearities and the scalar functions built from them.

Everything here is vectorized over the argument ``s``: scalars in give
floats out, arrays in give arrays out.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import expi

from .quadrature import DEFAULT_TOL, cumulative_integral

__all__ = [
    "PiecewiseLinear",
    "Nonlinearity",
    "AuxFunctions",
    "T0",
    "truncate",
    "phi_eval",
    "phi_slope",
    "primitive_Phi",
    "psi_eval",
    "psi_prime",
    "beta_eval",
    "beta_closed_form",
    "A_eval",
    "Theta_k_eval",
]

# psi(T0) = 1/2  <=>  ln(1 + T0) = 1
T0 = math.e - 1.0


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


class PiecewiseLinear:
    """Continuous piecewise-linear function with explicit slopes beyond the end knots."""

    def __init__(self, x, y, left_slope=None, right_slope=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("need at least two (s, phi(s)) breakpoints")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoint abscissae must be strictly increasing")
        self.x, self.y = x, y
        self.segment_slopes = np.diff(y) / np.diff(x)
        self.left_slope = float(self.segment_slopes[0] if left_slope is None else left_slope)
        self.right_slope = float(self.segment_slopes[-1] if right_slope is None else right_slope)
        self._slopes = np.concatenate([[self.left_slope], self.segment_slopes, [self.right_slope]])
        # primitive from 0 at every knot
        seg = 0.5 * (y[:-1] + y[1:]) * np.diff(x)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._knot_primitive = cum - self._raw_primitive_at(0.0, cum)

    def _segment(self, s):
        return np.searchsorted(self.x, s, side="right") - 1

    def _anchor(self, j):
        # segment j < 0 is the left extension, anchored at the first knot
        return np.clip(j, 0, self.x.size - 1)

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        j = self._segment(s_arr)
        a = self._anchor(j)
        out = self.y[a] + self._slopes[j + 1] * (s_arr - self.x[a])
        return _out(out, s)

    def slope(self, s):
        """Right derivative."""
        s_arr = np.asarray(s, dtype=float)
        out = self._slopes[self._segment(s_arr) + 1]
        return _out(out, s)

    def _raw_primitive_at(self, s, cum):
        j = self._segment(np.asarray(s, dtype=float))
        a = self._anchor(j)
        d = s - self.x[a]
        return cum[a] + self.y[a] * d + 0.5 * self._slopes[j + 1] * d * d

    def primitive(self, s):
        """Exact ``int_0^s`` of the function."""
        s_arr = np.asarray(s, dtype=float)
        return _out(self._raw_primitive_at(s_arr, self._knot_primitive), s)

    @property
    def max_slope(self):
        return float(np.max(self._slopes))

    @property
    def min_slope(self):
        return float(np.min(self._slopes))

    def truncated(self, k):
        """The composite ``T_k(self(.))``, again piecewise linear."""
        points = list(self.x)
        for level in (-k, k):
            for i, slope in enumerate(self.segment_slopes):
                if slope != 0:
                    t = self.x[i] + (level - self.y[i]) / slope
                    if self.x[i] < t < self.x[i + 1]:
                        points.append(t)
            if self.left_slope != 0:
                t = self.x[0] + (level - self.y[0]) / self.left_slope
                if t < self.x[0]:
                    points.append(t)
            if self.right_slope != 0:
                t = self.x[-1] + (level - self.y[-1]) / self.right_slope
                if t > self.x[-1]:
                    points.append(t)
        pts = np.unique(points)
        vals = np.clip(self(pts), -k, k)
        # every nonzero extension slope eventually hits the clamp
        return PiecewiseLinear(pts, vals, 0.0, 0.0)


@dataclass(frozen=True)
class Nonlinearity:
    """Nondecreasing Lipschitz ``phi`` through ``breakpoints``, affine beyond them.

    ``lipschitz`` defaults to the largest slope; ``sublin_z0`` and ``sublin_z1``
    are the constants of the lower bound ``|phi(s)| >= Z1 |s| - Z0``.
    """

    breakpoints: tuple
    sublin_z0: float
    sublin_z1: float
    lipschitz: float = None

    def __post_init__(self):
        pts = tuple((float(s), float(v)) for s, v in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        problems = self.violations(pts, self.lipschitz, self.sublin_z0, self.sublin_z1)
        if problems:
            raise ValueError("invalid nonlinearity: " + "; ".join(problems))
        fn = PiecewiseLinear(*np.array(pts).T)
        object.__setattr__(self, "_fn", fn)
        if self.lipschitz is None:
            object.__setattr__(self, "lipschitz", fn.max_slope)
        object.__setattr__(self, "lipschitz", float(self.lipschitz))
        object.__setattr__(self, "sublin_z0", float(self.sublin_z0))
        object.__setattr__(self, "sublin_z1", float(self.sublin_z1))

    @staticmethod
    def violations(breakpoints, lipschitz=None, z0=0.0, z1=1.0):
        """Return human-readable reasons why the data cannot define a valid phi."""
        try:
            pts = np.array([(float(s), float(v)) for s, v in breakpoints])
            fn = PiecewiseLinear(pts[:, 0], pts[:, 1])
        except (ValueError, TypeError, IndexError) as exc:
            return [f"breakpoints: {exc}"]
        out = []
        if fn.min_slope < 0:
            bad = int(np.argmin(fn.segment_slopes))
            out.append(
                "monotonicity: phi must be nondecreasing, segment "
                f"[{fn.x[bad]}, {fn.x[bad + 1]}] has slope {fn.segment_slopes[bad]}"
            )
        if lipschitz is not None and not math.isclose(float(lipschitz), fn.max_slope, rel_tol=1e-12, abs_tol=1e-14):
            out.append(f"lipschitz: declared L_phi={lipschitz} but the largest slope is {fn.max_slope}")
        if abs(fn(0.0)) > 1e-14:
            out.append(f"phi(0) = 0 required, got phi(0) = {fn(0.0)}")
        if z0 is None or z1 is None or not (float(z0) >= 0 and float(z1) > 0):
            out.append(f"growth constants need Z0 >= 0 and Z1 > 0, got Z0={z0}, Z1={z1}")
            return out
        z0, z1 = float(z0), float(z1)
        tol = 1e-12 * (1 + np.abs(fn.x).max())
        for s in np.concatenate([fn.x, [0.0]]):
            if abs(fn(s)) < z1 * abs(s) - z0 - tol:
                out.append(f"growth bound: |phi({s})| = {abs(fn(s))} < Z1|s| - Z0 = {z1 * abs(s) - z0}")
        if fn.right_slope < z1 or fn.left_slope < z1:
            out.append(
                f"growth bound: asymptotic slopes ({fn.left_slope}, {fn.right_slope}) fall below Z1={z1}"
            )
        return out

    @classmethod
    def linear(cls, slope=1.0):
        return cls(((-1.0, -slope), (0.0, 0.0), (1.0, slope)), sublin_z0=0.0, sublin_z1=slope)

    @classmethod
    def stefan(cls, plateau=(0.0, 1.0), slope=1.0):
        """Zero on ``plateau`` (which must contain 0), slope ``slope`` outside."""
        a, b = plateau
        if not a <= 0 <= b:
            raise ValueError(f"plateau must contain 0, got {plateau}")
        pts = ((a - 1.0, -slope), (a, 0.0), (b, 0.0), (b + 1.0, slope))
        return cls(pts, sublin_z0=slope * max(-a, b), sublin_z1=slope)

    @classmethod
    def from_config(cls, data):
        """Build from ``{"breakpoints": [[s, v], ...], "lipschitz": L, "z0": Z0, "z1": Z1}``."""
        return cls(
            tuple(map(tuple, data["breakpoints"])),
            sublin_z0=data["z0"],
            sublin_z1=data["z1"],
            lipschitz=data.get("lipschitz"),
        )

    def to_config(self):
        return {
            "breakpoints": [list(p) for p in self.breakpoints],
            "lipschitz": self.lipschitz,
            "z0": self.sublin_z0,
            "z1": self.sublin_z1,
        }

    @property
    def function(self):
        return self._fn

    @property
    def knots(self):
        return self._fn.x

    def __call__(self, s):
        return self._fn(s)

    def slope(self, s):
        return self._fn.slope(s)


def truncate(k, s):
    """``T_k(s) = min(k, |s|) sign(s)``."""
    if not k > 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    return _out(np.clip(np.asarray(s, dtype=float), -k, k), s)


def phi_eval(nl, s):
    return nl(s)


def phi_slope(nl, s):
    """Right derivative of phi."""
    return nl.slope(s)


def primitive_Phi(nl, s):
    """``Phi(s) = int_0^s phi``, exact."""
    return nl.function.primitive(s)


def psi_eval(s):
    s_arr = np.asarray(s, dtype=float)
    lg = np.log1p(np.abs(s_arr))
    return _out(np.sign(s_arr) * lg / (1.0 + lg), s)


def psi_prime(s):
    a = np.abs(np.asarray(s, dtype=float))
    return _out(1.0 / ((1.0 + a) * (1.0 + np.log1p(a)) ** 2), s)


def _sqrt_psi_prime(t):
    a = np.abs(t)
    return 1.0 / (np.sqrt(1.0 + a) * (1.0 + np.log1p(a)))


def beta_eval(s, tol=DEFAULT_TOL):
    """``beta(s) = int_0^s sqrt(psi'(t)) dt`` by adaptive Simpson, absolute error <= tol."""
    return _out(cumulative_integral(_sqrt_psi_prime, s, tol=tol), s)


def beta_closed_form(s):
    """Same integral through the exponential integral.

    With ``w = 1 + ln(1+|s|)`` the integrand becomes ``exp((w-1)/2)/w``, so
    ``|beta(s)| = exp(-1/2) (Ei(w/2) - Ei(1/2))``.
    """
    s_arr = np.asarray(s, dtype=float)
    w = 1.0 + np.log1p(np.abs(s_arr))
    out = np.sign(s_arr) * math.exp(-0.5) * (expi(0.5 * w) - expi(0.5))
    return _out(out, s)


def A_eval(nl, s, tol=DEFAULT_TOL):
    """``A(s) = int_0^s psi(phi(a)) da`` by adaptive Simpson split at the breakpoints."""
    return _out(cumulative_integral(lambda a: psi_eval(nl(a)), s, tol=tol, breaks=nl.knots), s)


def Theta_k_eval(nl, k, s):
    """``Theta_k(s) = int_0^s T_k(phi(t)) dt``, exact."""
    if not k > 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    return nl.function.truncated(k).primitive(s)


class AuxFunctions:
    """The auxiliary functions attached to one nonlinearity."""

    def __init__(self, nl):
        self.nl = nl

    psi = staticmethod(psi_eval)
    psi_prime = staticmethod(psi_prime)

    def beta(self, s, tol=DEFAULT_TOL):
        return beta_eval(s, tol)

    def A(self, s, tol=DEFAULT_TOL):
        return A_eval(self.nl, s, tol)

    def Theta(self, k, s):
        return Theta_k_eval(self.nl, k, s)

    def Phi(self, s):
        return primitive_Phi(self.nl, s)
