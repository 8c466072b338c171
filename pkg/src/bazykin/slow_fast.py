"""Geometry of the critical manifold in the singular limit eps -> 0.

The critical manifold consists of the trivial branch ``u = 0`` and the
parabola ``v = F(u)``.  Its fold splits the parabola into an attracting
(right) and a repelling (left) sheet.  Singular cycles are assembled from
arcs of these branches and horizontal fast fibres; the sign of the slow
divergence integral along them predicts the stability of the canard cycles
that persist for small eps.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .core_model import Params, State, critical_manifold, reaction_rates
from .errors import ModelError

__all__ = [
    "FoldKind",
    "FoldPoint",
    "CycleKind",
    "SingularCycle",
    "SlowDivergence",
    "fold_point",
    "exit_point",
    "entry_exit_balance",
    "cycle_roots",
    "canard_height_range",
    "divergence_integrand",
    "trivial_branch_integrand",
    "slow_divergence_integral",
    "singular_cycle",
    "slow_flow",
]

GEOMETRY_TOL = 1e-10
QUAD_TOL = 1e-8
FOLD_KIND_TOL = 1e-9


class FoldKind(str, enum.Enum):
    JUMP = "Jump"
    CANARD = "Canard"


class CycleKind(str, enum.Enum):
    HEADLESS = "HeadlessCanard"
    HEADED = "HeadedCanard"
    RELAXATION = "Relaxation"


@dataclass(frozen=True)
class FoldPoint:
    u_f: float
    v_f: float
    kind: FoldKind
    delta_f: float


@dataclass(frozen=True)
class SingularCycle:
    kind: CycleKind
    s: float
    vertices: np.ndarray  # (n, 2) closed polyline, first row repeated last
    segments: tuple  # (label, start, stop) index ranges; label in {"C01", "C00", "fiber"}


@dataclass(frozen=True)
class SlowDivergence:
    value: float
    predicts_stable: bool
    abserr: float = 0.0


def fold_point(p: Params) -> FoldPoint:
    """Maximum of F; a canard point when the predator nullcline passes through it."""
    if p.alpha * p.chi <= 1:
        raise ModelError(f"alpha*chi = {p.alpha * p.chi} <= 1, no interior fold", kind="NO_FOLD")
    u_f = (p.alpha * p.chi - 1.0) / (2.0 * p.alpha)
    v_f = float(critical_manifold(p, u_f))
    delta_f = (p.beta * u_f / (1.0 + p.alpha * u_f) - p.eta) / v_f
    g = reaction_rates(p, (u_f, v_f))[1]
    kind = FoldKind.CANARD if abs(g) < FOLD_KIND_TOL * max(1.0, v_f) else FoldKind.JUMP
    return FoldPoint(u_f, v_f, kind, delta_f)


def slow_flow(p: Params, u):
    """du/dtau = g(u, F(u)) / F'(u) on the parabolic branch."""
    F = critical_manifold(p, u)
    return reaction_rates(p, (u, F))[1] / critical_manifold(p, u, 1)


def trivial_branch_integrand(p: Params, v):
    """(df/du)(0, v) / g(0, v) = (nu - beta*v) / (-eta*v - delta*v**2)."""
    return (p.nu - p.beta * v) / (-p.eta * v - p.delta * v * v)


def _trivial_antiderivative(p: Params, v):
    # partial fractions of (nu - beta v)/(v (eta + delta v)), with a sign flip
    a = p.nu / p.eta
    b = -p.beta - p.nu * p.delta / p.eta
    return -a * np.log(v) - (b / p.delta) * np.log(p.eta + p.delta * v)


def entry_exit_balance(p: Params, v_exit: float, v_entry: float | None = None) -> float:
    """Integral of the trivial-branch integrand from ``v_exit`` to ``v_entry``.

    Accumulated contraction above nu/beta and expansion below it cancel when
    this vanishes.  ``v_entry`` defaults to the fold height.
    """
    if v_entry is None:
        v_entry = fold_point(p).v_f
    return float(_trivial_antiderivative(p, v_entry) - _trivial_antiderivative(p, v_exit))


def exit_point(p: Params, v_lo: float = 1e-8, v_entry: float | None = None) -> float:
    """Height at which a trajectory that landed on ``u = 0`` at the fold height
    leaves the trivial branch again (way-in/way-out balance)."""
    fp = fold_point(p)
    v_entry = fp.v_f if v_entry is None else v_entry
    v_turn = p.nu / p.beta
    if v_entry <= v_turn:
        raise ModelError(
            f"entry height {v_entry:.6g} not above the attracting/repelling switch {v_turn:.6g}",
            kind="NO_ROOT",
        )
    lo = entry_exit_balance(p, v_lo, v_entry)
    hi = entry_exit_balance(p, v_turn, v_entry)
    if not (lo < 0 < hi):
        raise ModelError("entry-exit integral does not change sign", kind="NO_ROOT")
    return float(
        optimize.brentq(lambda v: entry_exit_balance(p, v, v_entry), v_lo, v_turn, xtol=1e-15, rtol=1e-15)
    )


def cycle_roots(p: Params, s: float, v_ext: float) -> tuple[float, float]:
    """Both roots of F(u) = v_ext + s, left one first (it may be negative)."""
    fp = fold_point(p)
    h = v_ext + s
    if h > fp.v_f * (1 + 1e-13) or h < 0:
        raise ModelError(f"height {h:.10g} outside [0, v_f={fp.v_f:.10g}]", kind="OUT_OF_RANGE")
    disc = p.nu**2 * (p.alpha * p.chi + 1) ** 2 - 4 * p.alpha * p.beta * p.nu * p.chi * h
    half = np.sqrt(max(disc, 0.0)) / (2 * p.alpha * p.nu)
    mid = 0.5 * (p.chi - 1.0 / p.alpha)
    return float(mid - half), float(mid + half)


def canard_height_range(
    p: Params, v_ext: float | None = None, at_canard_point: bool = False
) -> tuple[float, float]:
    """Range of s for which the left root u_l(s) is feasible (>= 0).

    Headless and headed cycles both need their fast fibre to leave the
    parabola at non-negative prey density, i.e. height >= F(0) = nu/beta.
    Pass ``at_canard_point=True`` for heights fed to
    :func:`slow_divergence_integral`, which works at delta_f.
    """
    if at_canard_point:
        p = _canard_params(p)
    if v_ext is None:
        v_ext = exit_point(p)
    fp = fold_point(p)
    return p.nu / p.beta - v_ext, fp.v_f - v_ext


def _canard_params(p: Params) -> Params:
    return p.replace(delta=fold_point(p).delta_f)


def divergence_integrand(p: Params, u):
    """(df/du)(u, F(u)) * F'(u) / g(u, F(u)) written so that the removable
    singularity at a canard fold cancels exactly."""
    u = np.asarray(u, dtype=float)
    fp = fold_point(p)
    F = critical_manifold(p, u)
    f_u = p.nu * (1 - 2 * u / p.chi) - p.beta * F / (1 + p.alpha * u) ** 2
    k = 2 * p.alpha * p.nu / (p.beta * p.chi)  # F'(u) = -k (u - u_f)
    phi_f = fp.v_f * (fp.delta_f - p.delta)
    du = u - fp.u_f
    psi = p.beta / ((1 + p.alpha * u) * (1 + p.alpha * fp.u_f)) + p.delta * (k / 2) * du
    if phi_f == 0.0:
        return f_u * (-k) / (F * psi)
    return f_u * (-k) * du / (F * (phi_f + du * psi))


def _check_poles(p: Params, a: float, b: float, n: int = 4001):
    fp = fold_point(p)
    lo, hi = min(a, b), max(a, b)
    u = np.linspace(lo, hi, n)[1:-1]
    if u.size == 0:
        return
    F = critical_manifold(p, u)
    du = u - fp.u_f
    k = 2 * p.alpha * p.nu / (p.beta * p.chi)
    psi = p.beta / ((1 + p.alpha * u) * (1 + p.alpha * fp.u_f)) + p.delta * (k / 2) * du
    phi_f = fp.v_f * (fp.delta_f - p.delta)
    # at a canard fold the zero of g at u_f cancels against F'(u_f) = 0
    den = psi if phi_f == 0.0 else phi_f + du * psi
    if np.any(F <= 0) or np.any(np.diff(np.sign(den)) != 0) or np.any(den == 0):
        raise ModelError(
            f"g(u, F(u)) vanishes on [{lo:.6g}, {hi:.6g}] for delta={p.delta:.10g}",
            kind="POLE_ON_PATH",
        )


def _arc_integral(p: Params, u_from: float, u_to: float) -> tuple[float, float]:
    _check_poles(p, u_from, u_to)
    val, err = integrate.quad(
        lambda x: float(divergence_integrand(p, x)), u_from, u_to,
        epsabs=QUAD_TOL, epsrel=1e-12, limit=200,
    )
    return val, err


def slow_divergence_integral(
    p: Params,
    s: float,
    kind: CycleKind | str = CycleKind.HEADLESS,
    v_ext: float | None = None,
    at_canard_point: bool = True,
) -> SlowDivergence:
    """Slow divergence integral of the singular cycle of height ``v_ext + s``.

    Canard cycles bifurcate from the canard point, so by default the integral
    is evaluated with delta replaced by the fold value delta_f of the given
    chi; the integrand then has only a removable singularity at the fold.
    With ``at_canard_point=False`` the given delta is used and an equilibrium
    on the arc raises ``POLE_ON_PATH``.
    """
    kind = CycleKind(kind)
    if kind is CycleKind.RELAXATION:
        raise ValueError("the slow divergence integral is defined for canard cycles only")
    q = _canard_params(p) if at_canard_point else p
    if v_ext is None:
        v_ext = exit_point(q)
    u_ls, u_rs = cycle_roots(q, s, v_ext)
    if u_ls < 0:
        raise ModelError(f"s={s} gives u_l(s)={u_ls:.6g} < 0", kind="OUT_OF_RANGE")
    if kind is CycleKind.HEADLESS:
        val, err = _arc_integral(q, u_rs, u_ls)
    else:
        u_r = cycle_roots(q, 0.0, v_ext)[1]
        val, err = _arc_integral(q, u_r, u_ls)
        v_val, v_err = integrate.quad(
            lambda v: float(trivial_branch_integrand(q, v)), v_ext + s, v_ext,
            epsabs=QUAD_TOL, epsrel=1e-12, limit=200,
        )
        val += v_val
        err += v_err
    return SlowDivergence(float(val), bool(val < 0), float(err))


def _parabola(p: Params, u0: float, u1: float, n: int) -> np.ndarray:
    u = np.linspace(u0, u1, n)
    return np.column_stack([u, critical_manifold(p, u)])


def _line(a, b, n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) * np.asarray(a, float) + t * np.asarray(b, float)


def singular_cycle(
    p: Params,
    s: float,
    kind: CycleKind | str,
    v_ext: float | None = None,
    n_arc: int = 200,
) -> SingularCycle:
    """Closed polyline tracing the singular cycle of the given type.

    The trivial branch ``u = 0`` plays the role of the left vertical segment
    for cycles with a head and for relaxation cycles.
    """
    kind = CycleKind(kind)
    fp = fold_point(p)
    if v_ext is None:
        v_ext = exit_point(p)
    pieces: list[tuple[str, np.ndarray]] = []
    if kind is CycleKind.RELAXATION:
        u_r = cycle_roots(p, 0.0, v_ext)[1]
        pieces = [
            ("fiber", _line((0.0, v_ext), (u_r, v_ext), n_arc)),
            ("C01", _parabola(p, u_r, fp.u_f, n_arc)),
            ("fiber", _line((fp.u_f, fp.v_f), (0.0, fp.v_f), n_arc)),
            ("C00", _line((0.0, fp.v_f), (0.0, v_ext), n_arc)),
        ]
    else:
        u_ls, u_rs = cycle_roots(p, s, v_ext)
        if u_ls < -GEOMETRY_TOL:
            raise ModelError(f"s={s} gives u_l(s)={u_ls:.6g} < 0", kind="OUT_OF_RANGE")
        u_ls = max(u_ls, 0.0)
        h = v_ext + s
        if kind is CycleKind.HEADLESS:
            pieces = [
                ("C01", _parabola(p, u_rs, u_ls, n_arc)),
                ("fiber", _line((u_ls, h), (u_rs, h), n_arc)),
            ]
        else:
            u_r = cycle_roots(p, 0.0, v_ext)[1]
            pieces = [
                ("fiber", _line((0.0, v_ext), (u_r, v_ext), n_arc)),
                ("C01", _parabola(p, u_r, u_ls, 2 * n_arc)),
                ("fiber", _line((u_ls, h), (0.0, h), n_arc)),
                ("C00", _line((0.0, h), (0.0, v_ext), n_arc)),
            ]
    verts, segs, start = [], [], 0
    for label, pts in pieces:
        body = pts[:-1]
        verts.append(body)
        segs.append((label, start, start + len(pts)))
        start += len(body)
    verts.append(pieces[0][1][:1])
    return SingularCycle(kind, float(s), np.vstack(verts), tuple(segs))


def fold_state(p: Params) -> State:
    fp = fold_point(p)
    return State(fp.u_f, fp.v_f)
