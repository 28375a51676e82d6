"""Estimate functionals, compactness diagnostics and parameter sweeps.

All functionals are evaluated on solver trajectories with the discrete
norms of :mod:`stefanlab.mesh`; time integrals use the left-endpoint rule.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math
import os

import numpy as np

from .errors import NumericalError, StructuralError
from .mesh import GridFunction, Trajectory, time_norm
from .nonlinear import beta_closed_form
from .solver import NewtonConfig, ViscosityParam, dirac_approx, solve

__all__ = [
    "EstimateReport",
    "SweepResult",
    "MintyResult",
    "estimate_report",
    "probe_fields",
    "viscosity_sweep",
    "minty_diagnostic",
    "equicontinuity_modulus",
    "l1_data_sweep",
    "DiracFamily",
    "gradient_bound_exponents",
    "loglog_slope",
    "growth_factor",
    "GROWTH_FACTOR",
]

GROWTH_FACTOR = 2.0


def _r_threshold(d):
    return math.inf if d == 1 else d / (d - 1)


@dataclass
class EstimateReport:
    phi_of_u_L1_max: float
    phi_u_L2H10: float
    u_L2H10: float
    dtu_L2Hm1: float
    u_LinfL2: float
    u_LinfL1: float
    phiu_LinfL1: float
    beta_grad_L2: float
    u_L2Lr: dict
    tk_grad_L2: dict
    visc_term: float
    n: float = math.inf
    flags: list = field(default_factory=list)

    def scalars(self):
        return {
            k: v
            for k, v in asdict(self).items()
            if isinstance(v, float) and k != "n"
        }

    def to_dict(self):
        out = asdict(self)
        out["u_L2Lr"] = {str(k): v for k, v in self.u_L2Lr.items()}
        out["tk_grad_L2"] = {str(k): v for k, v in self.tk_grad_L2.items()}
        out["n"] = _json_number(self.n)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _json_number(x):
    return "inf" if math.isinf(x) else x


def probe_fields(grid, seed=0, n_modes=5, n_random=3):
    """Lowest discrete eigenvectors plus seeded random fields, unit H^1_0 seminorm."""
    coords = grid.coordinates()
    if grid.dim == 1:
        modes = [(k,) for k in range(1, n_modes + 1)]
    else:
        cand = [(i, j) for i in range(1, n_modes + 1) for j in range(1, n_modes + 1)]
        cand.sort(key=lambda ij: (ij[0] / grid.lengths[0]) ** 2 + (ij[1] / grid.lengths[1]) ** 2)
        modes = cand[:n_modes]
    fields = []
    for mode in modes:
        v = np.ones(grid.size)
        for k, x, L in zip(mode, coords, grid.lengths):
            v = v * np.sin(k * np.pi * x / L)
        fields.append(v)
    rng = np.random.default_rng(seed)
    fields.extend(rng.standard_normal((n_random, grid.size)))
    fields = np.array(fields)
    return fields / np.sqrt(grid.gradient_energy(fields))[:, None]


def estimate_report(traj, spec, visc, r_list=(), k_list=(), seed=0, probes=None):
    """Evaluate every estimate functional on one trajectory."""
    if traj.grid != spec.grid:
        raise StructuralError("trajectory and problem live on different grids")
    grid, dt, T = traj.grid, traj.partition.dt, traj.partition.horizon
    u = traj.states
    left = u[:-1]
    nl = spec.nl
    phi = nl(u)
    phi_left = phi[:-1]

    def l2_time(per_step):
        return time_norm(per_step, dt, 2)

    h10 = lambda v: np.sqrt(grid.gradient_energy(v))
    dtu = np.diff(u, axis=0) / dt

    flags = []
    threshold = _r_threshold(grid.dim)
    u_lr = {}
    for r in r_list:
        if r >= threshold:
            flags.append(f"r={r} is above the d/(d-1)={threshold:g} threshold")
        u_lr[r] = l2_time(grid.lp(left, r))
    tk = {k: l2_time(h10(np.clip(phi_left, -k, k))) for k in k_list}

    eps = visc.coefficient
    if eps == 0.0:
        visc_term = 0.0
    else:
        v = probe_fields(grid, seed) if probes is None else np.atleast_2d(probes)
        v = v / np.sqrt(grid.gradient_energy(v))[:, None]
        # stiffness pairing of u_m with time-constant probes, left-endpoint rule
        pairing = dt * grid.inner(left.sum(axis=0), grid.laplacian(v))
        visc_term = float(eps * np.max(np.abs(pairing)) / math.sqrt(T))

    return EstimateReport(
        phi_of_u_L1_max=float(np.max(grid.lp(nl.function.primitive(u), 1))),
        phi_u_L2H10=l2_time(h10(phi_left)),
        u_L2H10=l2_time(h10(left)),
        dtu_L2Hm1=l2_time(grid.hminus1(dtu)),
        u_LinfL2=float(np.max(grid.lp(u, 2))),
        u_LinfL1=float(np.max(grid.lp(u, 1))),
        phiu_LinfL1=float(np.max(grid.lp(phi, 1))),
        beta_grad_L2=l2_time(h10(beta_closed_form(phi_left))),
        u_L2Lr=u_lr,
        tk_grad_L2=tk,
        visc_term=visc_term,
        n=visc.n,
        flags=flags,
    )


@dataclass
class MintyResult:
    theta_l1: float
    truncation_gap_sq: float
    lipschitz: float

    @property
    def bound_holds(self):
        return self.truncation_gap_sq <= self.lipschitz * self.theta_l1 * (1 + 1e-12) + 1e-300


def _check_compatible(a, b):
    if a.grid != b.grid or a.partition != b.partition:
        raise StructuralError("trajectories use different grids or time partitions")


def minty_diagnostic(traj_n, traj_ref, nl, k):
    """Space-time L^1 norm of ``(T_k phi(u_n) - T_k phi(u_ref)) (u_n - u_ref)``.

    Also returns ``|T_k phi(u_n) - T_k phi(u_ref)|^2_{L^2 L^2}``, which the
    monotone-Lipschitz structure bounds by ``L_phi`` times the first value.
    """
    _check_compatible(traj_n, traj_ref)
    if not k > 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    grid, dt = traj_n.grid, traj_n.partition.dt
    a, b = traj_n.states[:-1], traj_ref.states[:-1]
    gap = np.clip(nl(a), -k, k) - np.clip(nl(b), -k, k)
    theta = gap * (a - b)
    w = dt * grid.cell_volume
    return MintyResult(
        theta_l1=float(np.sum(np.abs(theta)) * w),
        truncation_gap_sq=float(np.sum(gap * gap) * w),
        lipschitz=nl.lipschitz,
    )


def equicontinuity_modulus(traj):
    """``max_{m1 > m2} |u_m1 - u_m2|_{H^-1} / sqrt(t_m1 - t_m2)``."""
    if traj.partition.steps < 2:
        raise ValueError("equicontinuity modulus needs at least two steps")
    grid, dt = traj.grid, traj.partition.dt
    u = traj.states
    w = grid.solve_laplacian(u)
    best = 0.0
    for lag in range(1, u.shape[0]):
        du = u[lag:] - u[:-lag]
        dw = w[lag:] - w[:-lag]
        sq = np.maximum(np.sum(du * dw, axis=1) * grid.cell_volume, 0.0)
        best = max(best, float(np.sqrt(sq.max() / (lag * dt))))
    return best


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; nan if any y <= 0."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(y <= 0) or np.any(~np.isfinite(y)):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def growth_factor(values):
    """``max / min`` of a positive sequence (inf if some entry is 0 and another is not)."""
    v = np.asarray(values, float)
    if np.all(v == 0):
        return 1.0
    if np.any(v <= 0):
        return math.inf
    return float(v.max() / v.min())


@dataclass
class SweepResult:
    axis: list
    reports: list
    cauchy_Hm1: list
    fitted_slopes: dict
    flags: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    trajectories: list = field(default_factory=list, repr=False)
    axis_name: str = "n"

    def column(self, name, key=None):
        out = []
        for rep in self.reports:
            if rep is None:
                out.append(math.nan)
                continue
            val = getattr(rep, name)
            out.append(val[key] if key is not None else val)
        return out

    def to_dict(self):
        return {
            "axis_name": self.axis_name,
            "axis": [_json_number(float(a)) for a in self.axis],
            "reports": [None if r is None else r.to_dict() for r in self.reports],
            "cauchy_Hm1": self.cauchy_Hm1,
            "fitted_slopes": self.fitted_slopes,
            "flags": self.flags,
            "failures": {str(k): v for k, v in self.failures.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        """One row per sweep point; the Cauchy entry links a point to the next one."""
        scalar_cols = [
            "phi_u_L2H10",
            "u_L2H10",
            "dtu_L2Hm1",
            "u_LinfL2",
            "visc_term",
            "phi_of_u_L1_max",
            "u_LinfL1",
            "phiu_LinfL1",
            "beta_grad_L2",
        ]
        first = next((r for r in self.reports if r is not None), None)
        r_keys = list(first.u_L2Lr) if first else []
        k_keys = list(first.tk_grad_L2) if first else []
        header = [self.axis_name] + scalar_cols[:5] + ["cauchy_Hm1"] + scalar_cols[5:]
        header += [f"u_L2Lr_{r:g}" for r in r_keys] + [f"tk_grad_L2_{k:g}" for k in k_keys]
        slope_keys = sorted(self.fitted_slopes)
        header += [f"slope_{name}" for name in slope_keys]
        slopes = [repr(self.fitted_slopes[name]) for name in slope_keys]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for i, (a, rep) in enumerate(zip(self.axis, self.reports)):
            cauchy = self.cauchy_Hm1[i] if i < len(self.cauchy_Hm1) else ""
            if rep is None:
                writer.writerow([a] + ["nan"] * (len(header) - 1 - len(slopes)) + slopes)
                continue
            row = [a] + [repr(getattr(rep, c)) for c in scalar_cols[:5]] + [cauchy]
            row += [repr(getattr(rep, c)) for c in scalar_cols[5:]]
            row += [repr(rep.u_L2Lr[r]) for r in r_keys] + [repr(rep.tk_grad_L2[k]) for k in k_keys]
            row += slopes
            writer.writerow(row)
        return buf.getvalue()


def _l2hm1_distance(a, b):
    _check_compatible(a, b)
    diff = a.states[:-1] - b.states[:-1]
    return time_norm(a.grid.hminus1(diff), a.partition.dt, 2)


def _solve_point(args):
    spec, n, cfg = args
    try:
        return solve(spec, ViscosityParam(n), cfg), None
    except (NumericalError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_points(jobs, workers):
    if workers is None:
        workers = int(os.environ.get("STEFANLAB_WORKERS", "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_point, jobs))
    return [_solve_point(j) for j in jobs]


def viscosity_sweep(spec, n_list, cfg=NewtonConfig(), r_list=(), k_list=(), seed=0, workers=None):
    """Solve for every ``n`` and collect reports, Cauchy distances and slopes.

    A failing point leaves ``None`` in ``reports`` and a message in
    ``failures``; the remaining points are still reported.
    """
    n_list = [float(n) for n in n_list]
    if len(n_list) < 3:
        raise ValueError("a viscosity sweep needs at least three values of n")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError(f"n_list must be strictly increasing, got {n_list}")
    results = _run_points([(spec, n, cfg) for n in n_list], workers)
    trajs = [t for t, _ in results]
    failures = {n: err for n, (_, err) in zip(n_list, results) if err}
    reports = [
        None if t is None else estimate_report(t, spec, ViscosityParam(n), r_list, k_list, seed)
        for n, t in zip(n_list, trajs)
    ]
    cauchy = [
        math.nan if a is None or b is None else _l2hm1_distance(a, b) for a, b in zip(trajs, trajs[1:])
    ]
    res = SweepResult(n_list, reports, cauchy, {}, failures=failures, trajectories=trajs)
    ok = [i for i, r in enumerate(reports) if r is not None]
    xs = [n_list[i] for i in ok]
    slopes = {}
    for name in ("u_L2H10", "visc_term", "phi_u_L2H10", "dtu_L2Hm1", "u_LinfL2"):
        slopes[name] = loglog_slope(xs, [getattr(reports[i], name) for i in ok]) if len(ok) >= 2 else math.nan
    res.fitted_slopes = slopes
    res.flags = {
        "phi_u_L2H10_growth": growth_factor([reports[i].phi_u_L2H10 for i in ok]),
        "u_LinfL2_growth": growth_factor([reports[i].u_LinfL2 for i in ok]),
        "dtu_L2Hm1_growth": growth_factor([reports[i].dtu_L2Hm1 for i in ok]),
        "visc_sqrt_n_growth": growth_factor([reports[i].visc_term * math.sqrt(n_list[i]) for i in ok]),
    }
    return res


@dataclass(frozen=True)
class DiracFamily:
    """Gaussian approximations of ``mass * delta_center`` with width ``width0 * ratio**-level``.

    ``role`` chooses where the mass goes: ``"initial"`` puts it in ``u_0``;
    ``"source"`` injects it through ``f`` during the first time step.
    """

    center: tuple
    mass: float = 1.0
    width0: float = 0.1
    ratio: float = 2.0
    role: str = "initial"

    def __post_init__(self):
        if self.role not in ("initial", "source"):
            raise ValueError(f"role must be 'initial' or 'source', got {self.role!r}")

    def width(self, level):
        return self.width0 * self.ratio ** (-level)

    def field(self, grid, level):
        return dirac_approx(grid, self.center, self.width(level), self.mass)

    def sweep_data(self):
        """``(base_f, base_u0)`` for :func:`l1_data_sweep`."""
        if self.role == "initial":
            return None, self.field

        def base_f(grid, part, level):
            f = np.zeros((part.steps + 1, grid.size))
            f[1] = self.field(grid, level) / part.dt
            return f

        return base_f, None


def l1_data_sweep(
    base_f,
    base_u0,
    levels,
    spec,
    n_fixed=math.inf,
    cfg=NewtonConfig(),
    r_list=(1.2, 1.5, 1.8, 2.1, 2.5),
    k_list=(0.1, 1.0, 10.0),
    seed=0,
    workers=None,
):
    """Run the problem with mollified L^1 data at each level and classify trends.

    ``base_f(grid, partition, level)`` returns a source array of shape
    ``(M+1, N)`` or None; ``base_u0(grid, level)`` returns nodal initial values
    or None (keep ``spec.initial``). A column is "bounded" when its max/min
    ratio across levels stays below ``GROWTH_FACTOR``.
    """
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError(f"levels must be strictly increasing, got {levels}")
    grid, part = spec.grid, spec.partition
    specs, f_l1, u0_l1 = [], [], []
    for lev in levels:
        f = None if base_f is None else base_f(grid, part, lev)
        u0 = None if base_u0 is None else base_u0(grid, lev)
        init = spec.initial if u0 is None else GridFunction(grid, u0)
        s = spec.with_data(initial=init, source=f, source_id=f"l1-level-{lev}")
        specs.append(s)
        f_l1.append(0.0 if f is None else float(part.dt * np.sum(grid.lp(np.asarray(f)[1:], 1))))
        u0_l1.append(float(grid.lp(init.values, 1)))
    for name, vals in (("source", f_l1), ("initial datum", u0_l1)):
        if max(vals) > GROWTH_FACTOR * max(vals[0], 1e-300) + 1e-12:
            raise ValueError(f"{name} L^1 norms are not uniformly bounded across levels: {vals}")
    results = _run_points([(s, n_fixed, cfg) for s in specs], workers)
    visc = ViscosityParam(n_fixed)
    reports, trajs, failures = [], [], {}
    for lev, s, (t, err) in zip(levels, specs, results):
        trajs.append(t)
        if err:
            failures[lev] = err
        reports.append(None if t is None else estimate_report(t, s, visc, r_list, k_list, seed))
    cauchy = [
        math.nan if a is None or b is None else _l2hm1_distance(a, b) for a, b in zip(trajs, trajs[1:])
    ]
    res = SweepResult(levels, reports, cauchy, {}, failures=failures, trajectories=trajs, axis_name="level")
    ok = [r for r in reports if r is not None]
    threshold = _r_threshold(grid.dim)
    flags = {"r_threshold": threshold}
    for r in r_list:
        g = growth_factor([rep.u_L2Lr[r] for rep in ok])
        flags[f"u_L2Lr_{r:g}"] = {
            "growth": g,
            "trend": "bounded" if g < GROWTH_FACTOR else "growing",
            "below_threshold": r < threshold,
        }
    for name in ("beta_grad_L2", "u_LinfL1", "phiu_LinfL1"):
        g = growth_factor([getattr(rep, name) for rep in ok])
        flags[name] = {"growth": g, "trend": "bounded" if g < GROWTH_FACTOR else "growing"}
    for k in k_list:
        scaled = [rep.tk_grad_L2[k] ** 2 / (k * (k + 1)) for rep in ok]
        g = growth_factor(scaled)
        flags[f"tk_grad_L2_{k:g}"] = {
            "scaled_max": max(scaled) if scaled else math.nan,
            "growth": g,
            "trend": "bounded" if g < GROWTH_FACTOR else "growing",
        }
    res.flags = flags
    res.fitted_slopes = {}
    return res


def gradient_bound_exponents(d, p):
    """Exponent bookkeeping behind the ``L^p(W^{1,p})`` bound for ``beta``-controlled fields.

    For ``1 <= p < (d+2)/(d+1)`` returns ``theta1 = d(2-p)/(d-p)``,
    ``theta2 = (d+1)(2-p)/d``, ``theta = min(1+theta1, 1+theta2)/2``, the
    Lebesgue exponent ``r = theta p / (2-p)``, the interpolation weight
    ``zeta = (1 - 1/r) / (1 - 1/p*)`` with ``p* = dp/(d-p)``, and the
    final power ``beta = (2-p) r zeta / (2p)``.
    """
    if d < 2:
        raise ValueError("the Sobolev exponent p* = dp/(d-p) needs d >= 2 here")
    if not 1 <= p < (d + 2) / (d + 1):
        raise ValueError(f"p must lie in [1, {(d + 2) / (d + 1):.6g}), got {p}")
    p_star = d * p / (d - p)
    theta1 = d * (2 - p) / (d - p)
    theta2 = (d + 1) * (2 - p) / d
    theta = 0.5 * min(1 + theta1, 1 + theta2)
    r = theta * p / (2 - p)
    zeta = (1 - 1 / r) / (1 - 1 / p_star)
    beta = (2 - p) * r * zeta / (2 * p)
    return {
        "p_star": p_star,
        "theta1": theta1,
        "theta2": theta2,
        "theta": theta,
        "r": r,
        "zeta": zeta,
        "beta": beta,
        "beta_cap": (2 - p) * p / (2 * p),
    }
