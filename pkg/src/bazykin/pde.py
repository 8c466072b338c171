"""1D reaction-diffusion on [0, L] with zero-flux ends.

    u_t = u_xx + f(u, v),    v_t = d v_xx + eps g(u, v)

Node-centred grid x_i = i dx, i = 0..N-1, with mirrored ghost nodes so the
discrete Laplacian has cos(n pi x / L) as eigenvectors.  The default IMEX
scheme is Strang splitting: half a Crank-Nicolson diffusion step, a full
explicit RK4 reaction step (sub-cycled when the local reaction Jacobian is
large), another half diffusion step.  The reference scheme is classical
RK4 on the whole semi-discrete system under the diffusive CFL limit.
"""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import signal

from .core_model import Params, coexistence, upper_bounds
from .errors import IntegrationError
from .transients import DiagnosticsSeries, diagnostics

__all__ = [
    "Grid",
    "FieldPair",
    "PdeScheme",
    "PdeConfig",
    "SpaceTimeResult",
    "SolutionType",
    "initial_condition",
    "laplacian_neumann",
    "simulate",
    "steady_state_detect",
    "count_peaks",
    "mean_oscillation",
    "default_dt",
    "write_snapshot_csv",
]

BOUND_TOL = 1e-6
RK4_STABILITY = 2.5  # inside the real-axis limit 2.785


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("N must be >= 3")
        if not self.L > 0:
            raise ValueError("L must be > 0")

    @classmethod
    def from_spacing(cls, L: float, dx: float = 0.25) -> "Grid":
        return cls(float(L), int(round(L / dx)) + 1)

    @property
    def dx(self) -> float:
        return self.L / (self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N)


@dataclass
class FieldPair:
    u: np.ndarray
    v: np.ndarray
    grid: Grid | None = None

    def copy(self) -> "FieldPair":
        return FieldPair(self.u.copy(), self.v.copy(), self.grid)

    def check_bounds(self, p: Params, tol: float = BOUND_TOL) -> None:
        ub, vb = upper_bounds(p)
        lo = min(self.u.min(), self.v.min())
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise IntegrationError("non-finite density", kind="STEP_UNDERFLOW")
        if lo < -tol or self.u.max() > ub + tol or self.v.max() > vb + tol:
            raise IntegrationError(
                f"field left [0, {ub}] x [0, {vb:.6g}]", kind="BOUND_VIOLATION",
                u_min=float(self.u.min()), u_max=float(self.u.max()),
                v_min=float(self.v.min()), v_max=float(self.v.max()),
            )


class PdeScheme(str, enum.Enum):
    IMEX = "IMEX"
    EXPLICIT = "FullyExplicit"


def default_dt(p: Params) -> float:
    return 0.01 if p.eps > 0.1 else 0.002


@dataclass(frozen=True)
class PdeConfig:
    d: float
    dt: float = 0.01
    t_end: float = 100.0
    snapshot_stride: int = 100
    scheme: PdeScheme = PdeScheme.IMEX
    # steps between diagnostics rows; defaults to snapshot_stride
    diag_stride: int | None = None

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be > 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if self.snapshot_stride < 1 or (self.diag_stride is not None and self.diag_stride < 1):
            raise ValueError("strides must be >= 1")
        object.__setattr__(self, "scheme", PdeScheme(self.scheme))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class SpaceTimeResult:
    grid: Grid
    times: list
    snapshots: list
    diagnostics: DiagnosticsSeries
    params: Params | None = None
    config: PdeConfig | None = None
    final: FieldPair | None = field(default=None)


# ---------------------------------------------------------------------------
# initial data


def initial_condition(kind: str, p: Params, grid: Grid, magnitude=None, seed: int | None = None) -> FieldPair:
    """Homogeneous E* plus a perturbation.

    LocalizedBump: +magnitude on u and +magnitude/2 on v for |x - L/2| < 2
    (default magnitude 0.02).  SmallRandom: independent uniform noise in
    [-magnitude, magnitude] on both species.  HomogeneousOffset: +magnitude
    everywhere.
    """
    e = coexistence(p).point
    x = grid.x
    u = np.full(grid.N, e.u)
    v = np.full(grid.N, e.v)
    if kind == "LocalizedBump":
        m = 0.02 if magnitude is None else float(magnitude)
        inside = np.abs(x - 0.5 * grid.L) < 2.0
        u[inside] += m
        v[inside] += 0.5 * m
    elif kind == "SmallRandom":
        m = 1e-3 if magnitude is None else float(magnitude)
        rng = np.random.default_rng(seed)
        u += rng.uniform(-m, m, grid.N)
        v += rng.uniform(-m, m, grid.N)
    elif kind == "HomogeneousOffset":
        m = 0.0 if magnitude is None else float(magnitude)
        u += m
        v += m
    else:
        raise ValueError(f"unknown initial condition {kind!r}")
    return FieldPair(np.maximum(u, 0.0), np.maximum(v, 0.0), grid)


# ---------------------------------------------------------------------------
# kernels


def laplacian_neumann(f, dx: float) -> np.ndarray:
    """Second difference with mirrored ghosts f[-1] = f[1], f[N] = f[N-2]."""
    f = np.asarray(f, float)
    if f.size < 3:
        raise ValueError("need at least 3 nodes")
    out = np.empty_like(f)
    out[1:-1] = f[:-2] - 2 * f[1:-1] + f[2:]
    out[0] = 2 * (f[1] - f[0])
    out[-1] = 2 * (f[-2] - f[-1])
    return out / (dx * dx)


@numba.njit(cache=True)
def _thomas_factor(n, s):
    """LU of I - s*Lap (Neumann, scaled by dx^2): returns c' and 1/denominators."""
    cp = np.empty(n)
    inv = np.empty(n)
    b = 1.0 + 2.0 * s
    inv[0] = 1.0 / b
    cp[0] = -2.0 * s * inv[0]
    for i in range(1, n):
        a = -2.0 * s if i == n - 1 else -s
        den = b - a * cp[i - 1]
        inv[i] = 1.0 / den
        cp[i] = -s * inv[i]
    return cp, inv


@numba.njit(cache=True)
def _cn_half(f, s, cp, inv, rhs):
    """One Crank-Nicolson step of f_t = D f_xx with s = D tau / (2 dx^2)."""
    n = f.size
    rhs[0] = f[0] + 2.0 * s * (f[1] - f[0])
    for i in range(1, n - 1):
        rhs[i] = f[i] + s * (f[i - 1] - 2.0 * f[i] + f[i + 1])
    rhs[n - 1] = f[n - 1] + 2.0 * s * (f[n - 2] - f[n - 1])
    # forward sweep
    rhs[0] = rhs[0] * inv[0]
    for i in range(1, n):
        a = -2.0 * s if i == n - 1 else -s
        rhs[i] = (rhs[i] - a * rhs[i - 1]) * inv[i]
    f[n - 1] = rhs[n - 1]
    for i in range(n - 2, -1, -1):
        f[i] = rhs[i] - cp[i] * f[i + 1]


@numba.njit(cache=True, inline="always")
def _rates(u, v, nu, chi, alpha, beta, eta, delta, eps):
    q = beta * u * v / (1.0 + alpha * u)
    return nu * u * (1.0 - u / chi) - q, eps * (q - eta * v - delta * v * v)


@numba.njit(cache=True, inline="always")
def _jac_norm(u, v, nu, chi, alpha, beta, eta, delta, eps):
    q = 1.0 + alpha * u
    a11 = nu * (1.0 - 2.0 * u / chi) - beta * v / (q * q)
    a12 = beta * u / q
    a21 = eps * beta * v / (q * q)
    a22 = eps * (beta * u / q - eta - 2.0 * delta * v)
    return max(abs(a11) + abs(a12), abs(a21) + abs(a22))


@numba.njit(cache=True)
def _react(u, v, dt, nu, chi, alpha, beta, eta, delta, eps):
    """RK4 in time for the reaction at every node, sub-cycled per node."""
    for i in range(u.size):
        x, y = u[i], v[i]
        m = int(np.ceil(dt * _jac_norm(x, y, nu, chi, alpha, beta, eta, delta, eps) / RK4_STABILITY))
        m = max(m, 1)
        h = dt / m
        for _ in range(m):
            k1u, k1v = _rates(x, y, nu, chi, alpha, beta, eta, delta, eps)
            k2u, k2v = _rates(x + 0.5 * h * k1u, y + 0.5 * h * k1v, nu, chi, alpha, beta, eta, delta, eps)
            k3u, k3v = _rates(x + 0.5 * h * k2u, y + 0.5 * h * k2v, nu, chi, alpha, beta, eta, delta, eps)
            k4u, k4v = _rates(x + h * k3u, y + h * k3v, nu, chi, alpha, beta, eta, delta, eps)
            x += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            y += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        u[i], v[i] = x, y


@numba.njit(cache=True)
def _imex_steps(u, v, nsteps, dt, su, sv, cpu, invu, cpv, invv, nu, chi, alpha, beta, eta, delta, eps):
    rhs = np.empty(u.size)
    for _ in range(nsteps):
        _cn_half(u, su, cpu, invu, rhs)
        _cn_half(v, sv, cpv, invv, rhs)
        _react(u, v, dt, nu, chi, alpha, beta, eta, delta, eps)
        _cn_half(u, su, cpu, invu, rhs)
        _cn_half(v, sv, cpv, invv, rhs)
        if not (np.isfinite(u[0]) and np.isfinite(v[0])):
            return False
    return True


@numba.njit(cache=True)
def _rhs_full(u, v, ru, rv, idx2, d, nu, chi, alpha, beta, eta, delta, eps):
    n = u.size
    for i in range(n):
        il = 1 if i == 0 else i - 1
        ir = n - 2 if i == n - 1 else i + 1
        fu, fv = _rates(u[i], v[i], nu, chi, alpha, beta, eta, delta, eps)
        ru[i] = (u[il] - 2.0 * u[i] + u[ir]) * idx2 + fu
        rv[i] = d * (v[il] - 2.0 * v[i] + v[ir]) * idx2 + fv


@numba.njit(cache=True)
def _explicit_steps(u, v, nsteps, h, idx2, d, nu, chi, alpha, beta, eta, delta, eps):
    n = u.size
    k = np.empty((8, n))
    tu = np.empty(n)
    tv = np.empty(n)
    for _ in range(nsteps):
        _rhs_full(u, v, k[0], k[1], idx2, d, nu, chi, alpha, beta, eta, delta, eps)
        for i in range(n):
            tu[i] = u[i] + 0.5 * h * k[0, i]
            tv[i] = v[i] + 0.5 * h * k[1, i]
        _rhs_full(tu, tv, k[2], k[3], idx2, d, nu, chi, alpha, beta, eta, delta, eps)
        for i in range(n):
            tu[i] = u[i] + 0.5 * h * k[2, i]
            tv[i] = v[i] + 0.5 * h * k[3, i]
        _rhs_full(tu, tv, k[4], k[5], idx2, d, nu, chi, alpha, beta, eta, delta, eps)
        for i in range(n):
            tu[i] = u[i] + h * k[4, i]
            tv[i] = v[i] + h * k[5, i]
        _rhs_full(tu, tv, k[6], k[7], idx2, d, nu, chi, alpha, beta, eta, delta, eps)
        for i in range(n):
            u[i] += h / 6.0 * (k[0, i] + 2.0 * k[2, i] + 2.0 * k[4, i] + k[6, i])
            v[i] += h / 6.0 * (k[1, i] + 2.0 * k[3, i] + 2.0 * k[5, i] + k[7, i])
        if not (np.isfinite(u[0]) and np.isfinite(v[0])):
            return False
    return True


# ---------------------------------------------------------------------------
# driver


def _stepper(p: Params, cfg: PdeConfig, grid: Grid):
    """Closure advancing (u, v) in place by k outer steps of size cfg.dt."""
    pars = (p.nu, p.chi, p.alpha, p.beta, p.eta, p.delta, p.eps)
    dx = grid.dx
    if cfg.scheme is PdeScheme.IMEX:
        tau = 0.5 * cfg.dt
        su = tau / (2 * dx * dx)
        sv = cfg.d * tau / (2 * dx * dx)
        cpu, invu = _thomas_factor(grid.N, su)
        cpv, invv = _thomas_factor(grid.N, sv)

        def step(u, v, k):
            return _imex_steps(u, v, k, cfg.dt, su, sv, cpu, invu, cpv, invv, *pars)

    else:
        limit = dx * dx / (2 * max(1.0, cfg.d))
        sub = max(1, int(np.ceil(cfg.dt / limit - 1e-12)))
        h = cfg.dt / sub

        def step(u, v, k):
            return _explicit_steps(u, v, k * sub, h, 1.0 / (dx * dx), cfg.d, *pars)

    return step


def simulate(p: Params, cfg: PdeConfig, ic: FieldPair, grid: Grid | None = None) -> SpaceTimeResult:
    """Advance ``ic`` to cfg.t_end.

    Fields are stored every ``snapshot_stride`` steps (and at the end),
    diagnostics every ``diag_stride`` steps.  The Theorem-2 box
    0 <= u <= chi, 0 <= v <= (beta chi - eta)/delta is asserted at every
    stored row.
    """
    grid = grid or ic.grid
    if grid is None:
        raise ValueError("no grid given and the initial condition carries none")
    if len(ic.u) != grid.N or len(ic.v) != grid.N:
        raise ValueError("initial condition does not match the grid")
    state = FieldPair(np.array(ic.u, float), np.array(ic.v, float), grid)
    state.check_bounds(p)
    step = _stepper(p, cfg, grid)

    n_total = cfg.n_steps
    ds = cfg.diag_stride or cfg.snapshot_stride
    ss = cfg.snapshot_stride
    series = DiagnosticsSeries()
    times, snaps = [0.0], [state.copy()]
    series.append(0.0, diagnostics(state.u, state.v, grid.dx))
    done = 0
    while done < n_total:
        nxt = min(n_total, (done // ds + 1) * ds, (done // ss + 1) * ss)
        if not step(state.u, state.v, nxt - done):
            raise IntegrationError(f"non-finite field near t = {nxt * cfg.dt:.6g}", kind="STEP_UNDERFLOW")
        done = nxt
        t = done * cfg.dt
        if done % ds == 0 or done == n_total:
            row = diagnostics(state.u, state.v, grid.dx)
            series.append(t, row)
        if done % ss == 0 or done == n_total:
            state.check_bounds(p)
            times.append(t)
            snaps.append(state.copy())
    return SpaceTimeResult(grid, times, snaps, series, p, cfg, state)


# ---------------------------------------------------------------------------
# post-processing


class SolutionType(str, enum.Enum):
    STATIONARY = "Stationary"
    HOMOGENEOUS_OSCILLATORY = "HomogeneousOscillatory"
    HETEROGENEOUS_OSCILLATORY = "HeterogeneousOscillatory"
    MIXED = "Mixed"
    UNDECIDED = "Undecided"


def _turns(y, tol):
    """Number of direction changes of y, ignoring wiggles below tol."""
    n, trend, ref = 0, 0, y[0]
    for x in y[1:]:
        if trend >= 0 and x < ref - tol:
            n += trend > 0
            trend, ref = -1, x
        elif trend <= 0 and x > ref + tol:
            n += trend < 0
            trend, ref = 1, x
        elif (trend > 0 and x > ref) or (trend < 0 and x < ref):
            ref = x
    return n


def _label_block(U, tol):
    var = U.max(axis=0) - U.min(axis=0)
    if var.max() < tol:
        return SolutionType.STATIONARY
    k = int(np.argmax(var))
    if _turns(U[:, k], 0.1 * tol) < 3:
        return SolutionType.UNDECIDED
    if np.max(U.max(axis=1) - U.min(axis=1)) < tol:
        return SolutionType.HOMOGENEOUS_OSCILLATORY
    return SolutionType.HETEROGENEOUS_OSCILLATORY


def steady_state_detect(result: SpaceTimeResult, tol: float = 1e-4, window: int = 20,
                        n_parts: int = 4) -> SolutionType:
    """Classify the last ``window`` stored prey fields.

    Stationary when no node varies by ``tol`` over the window; oscillatory
    when the most variable node turns back and forth at least three times,
    homogeneous if the spatial spread stays below ``tol``.  When the domain
    split into ``n_parts`` pieces gives different stationary/oscillatory
    answers the result is Mixed.
    """
    if len(result.snapshots) < window:
        return SolutionType.UNDECIDED
    U = np.array([s.u for s in result.snapshots[-window:]])
    whole = _label_block(U, tol)
    if whole in (SolutionType.STATIONARY, SolutionType.UNDECIDED, SolutionType.HOMOGENEOUS_OSCILLATORY):
        return whole
    parts = [_label_block(b, tol) for b in np.array_split(U, n_parts, axis=1)]
    kinds = {x is SolutionType.STATIONARY for x in parts if x is not SolutionType.UNDECIDED}
    if len(kinds) > 1:
        return SolutionType.MIXED
    return whole


def count_peaks(u, rel_prominence: float = 0.05, boundary_weight: float = 1.0) -> float:
    """Local maxima of a stationary profile.

    A maximum counts when its prominence exceeds ``rel_prominence`` of the
    profile's range.  The profile is reflected across both ends first, so a
    maximum on an end node is found too; those count ``boundary_weight``
    each (0.5 gives the half-peak convention).
    """
    u = np.asarray(u, float)
    rng = u.max() - u.min()
    if rng == 0:
        return 0.0
    n = u.size
    padded = np.r_[u[:0:-1], u, u[-2::-1]]
    idx, _ = signal.find_peaks(padded, prominence=rel_prominence * rng)
    idx = idx[(idx >= n - 1) & (idx <= 2 * n - 2)] - (n - 1)
    ends = np.count_nonzero((idx == 0) | (idx == n - 1))
    return float(idx.size - ends + boundary_weight * ends)


def mean_oscillation(result: SpaceTimeResult, frac: float = 0.2) -> tuple[float, float]:
    """Peak-to-peak range of the spatial average of u over the final
    ``frac`` of the record, and its ratio to the same measure one window
    earlier (above 1 while an oscillation is still growing)."""
    a = result.diagnostics.arrays()
    t, m = a["t"], a["mean_u"]
    w = frac * (t[-1] - t[0])
    last = np.ptp(m[t >= t[-1] - w])
    prev = np.ptp(m[(t >= t[-1] - 2 * w) & (t < t[-1] - w)])
    return float(last), float(last / prev) if prev > 0 else float("inf")


def write_snapshot_csv(grid: Grid, f: FieldPair, t: float, directory) -> str:
    path = os.path.join(directory, f"snap_t{t:.4f}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u", "v"])
        for xi, ui, vi in zip(grid.x, f.u, f.v):
            w.writerow([repr(float(xi)), repr(float(ui)), repr(float(vi))])
    return path
