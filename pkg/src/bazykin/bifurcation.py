"""Codimension-one bifurcation curves in the (delta, chi) plane and the
operational classification of parameter points into the seven domains
that appear for small eps.

Hopf points and the first Lyapunov coefficient are computed from the
linearisation at E*; transitions between attractors (canard explosion,
saddle-node of cycles) come from forward simulation via :mod:`.ode`.
"""
from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core_model import Params, coexistence, jacobian
from .errors import BazykinError, ModelError, UnsettledError
from .ode import CycleEstimate, IntegratorConfig, detect_cycle
from .slow_fast import exit_point, fold_point

__all__ = [
    "CurveKind",
    "HopfPoint",
    "CurveSample",
    "Transition",
    "ScanResult",
    "DomainLabel",
    "hopf_threshold",
    "first_lyapunov",
    "hopf_curve",
    "fold_curve",
    "cycle_scan",
    "cycle_kind",
    "classify_domain",
    "operational_curve",
]

TRACE_TOL = 1e-9
NEAR_ZERO_L1 = 1e-8
MAX_BISECT = 60


class CurveKind(str, enum.Enum):
    HOPF = "Hopf"
    FOLD_CANARD = "FoldCanard"
    MAXIMAL_CANARD = "MaximalCanard"
    RELAXATION = "Relaxation"
    SNLC = "SNLC"


@dataclass(frozen=True)
class HopfPoint:
    chi: float
    delta: float
    omega: float
    l1: float
    eps: float = 1.0


@dataclass
class CurveSample:
    kind: CurveKind
    points: list  # (delta, chi) pairs sorted by chi
    omega: list = field(default_factory=list)
    l1: list = field(default_factory=list)
    gaps: list = field(default_factory=list)  # (chi, error kind)


# ---------------------------------------------------------------------------
# Hopf points


def _trace_at(p: Params) -> float:
    return jacobian(p, coexistence(p).point).trace


def hopf_threshold(p: Params, free: str, bracket, with_l1: bool = True) -> HopfPoint:
    """Root of Trace(J(E*)) in the parameter ``free`` on ``bracket``."""
    if free not in ("chi", "delta"):
        raise ValueError("free must be 'chi' or 'delta'")
    a, b = map(float, bracket)

    def tr(x):
        return _trace_at(p.replace(**{free: x}))

    ta, tb = tr(a), tr(b)
    if np.sign(ta) == np.sign(tb):
        raise ModelError(f"trace does not change sign on [{a}, {b}]", kind="NO_SIGN_CHANGE")
    x = optimize.brentq(tr, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    q = p.replace(**{free: x})
    j = jacobian(q, coexistence(q).point)
    if abs(j.trace) >= TRACE_TOL:
        # the last brentq iterate is not always the best one
        x = min((a_ for a_ in (x, np.nextafter(x, a), np.nextafter(x, b))), key=lambda y: abs(tr(y)))
        q = p.replace(**{free: x})
        j = jacobian(q, coexistence(q).point)
    if j.det <= 0:
        raise ModelError(f"Det = {j.det:.3g} <= 0 at the trace zero", kind="DET_NONPOSITIVE")
    h = HopfPoint(q.chi, q.delta, float(np.sqrt(j.det)), float("nan"), q.eps)
    if with_l1:
        h = HopfPoint(h.chi, h.delta, h.omega, first_lyapunov(q, h, check=False), h.eps)
    return h


def _tensors(p: Params, x0: np.ndarray, h: float):
    """Second and third derivative tensors of the vector field.

    Central differences of the analytic Jacobian: first differences give the
    Hessians, second differences the third derivatives.  Differencing J
    rather than the field itself keeps the third-order roundoff at eps/h^2.
    """
    n = 2
    e = np.eye(n) * h
    J = lambda y: jacobian(p, y).matrix  # noqa: E731
    J0 = J(x0)
    B = np.zeros((n, n, n))
    C = np.zeros((n, n, n, n))
    for k in range(n):
        B[:, :, k] = (J(x0 + e[k]) - J(x0 - e[k])) / (2 * h)
        C[:, :, k, k] = (J(x0 + e[k]) - 2 * J0 + J(x0 - e[k])) / (h * h)
    mixed = (J(x0 + e[0] + e[1]) - J(x0 + e[0] - e[1]) - J(x0 - e[0] + e[1]) + J(x0 - e[0] - e[1])) / (4 * h * h)
    C[:, :, 0, 1] = C[:, :, 1, 0] = mixed
    return B, C


def _l1_from_tensors(A: np.ndarray, B: np.ndarray, C: np.ndarray, omega: float) -> float:
    evals, evecs = np.linalg.eig(A)
    i = int(np.argmax(evals.imag))
    q = evecs[:, i].astype(complex)
    q /= np.linalg.norm(q)
    evals_t, evecs_t = np.linalg.eig(A.T)
    k = int(np.argmin(evals_t.imag))
    pv = evecs_t[:, k].astype(complex)
    pv /= np.conj(np.vdot(pv, q))  # <p, q> = conj(p) . q = 1

    def Bf(x, y):
        return np.einsum("ijk,j,k->i", B, x, y)

    def Cf(x, y, z):
        return np.einsum("ijkl,j,k,l->i", C, x, y, z)

    qb = q.conj()
    t1 = np.vdot(pv, Cf(q, q, qb))
    t2 = np.vdot(pv, Bf(q, np.linalg.solve(A, Bf(q, qb))))
    t3 = np.vdot(pv, Bf(qb, np.linalg.solve(2j * omega * np.eye(2) - A, Bf(q, q))))
    return float(np.real(t1 - 2 * t2 + t3) / (2 * omega))


def first_lyapunov(p: Params, h: HopfPoint | None = None, step: float = 1e-4, check: bool = True) -> float:
    """First Lyapunov coefficient at a Hopf point of the temporal model.

    Derivatives come from central differences with relative step ``step``,
    Richardson-combined with half the step.  With ``check`` the value is
    recomputed at half the step and ``NEAR_ZERO`` is raised when it is
    below 1e-8 in magnitude or not reproducible to 1%.
    """
    if h is not None:
        p = p.replace(chi=h.chi, delta=h.delta, eps=h.eps)
    x0 = np.asarray(coexistence(p).point, float)
    A = jacobian(p, x0).matrix
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    tr = A[0, 0] + A[1, 1]
    if det <= 0:
        raise ModelError("no purely imaginary pair at this point", kind="DET_NONPOSITIVE")
    omega = np.sqrt(det - tr * tr / 4)
    scale = np.maximum(np.abs(x0), 1.0)

    def value(s):
        hh = float(s * scale.min())
        B1, C1 = _tensors(p, x0, hh)
        B2, C2 = _tensors(p, x0, hh / 2)
        return _l1_from_tensors(A, (4 * B2 - B1) / 3, (4 * C2 - C1) / 3, omega)

    l1 = value(step)
    if check:
        l1h = value(step / 2)
        if abs(l1) < NEAR_ZERO_L1 or abs(l1 - l1h) > 0.01 * abs(l1):
            raise ModelError(f"l1 = {l1:.3g} is not sign-stable", kind="NEAR_ZERO", value=l1)
    return l1


def hopf_curve(
    p: Params,
    chi_range,
    n: int,
    delta_bracket=(1e-4, 1.0),
    n_grid: int = 400,
    with_l1: bool = True,
) -> CurveSample:
    """delta_H(chi) on ``n`` equally spaced chi samples.

    For each chi the trace is scanned on a log grid of ``delta_bracket`` and
    every sign change with Det > 0 is refined; samples without one become
    gaps.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    chis = np.linspace(chi_range[0], chi_range[1], n)
    grid = np.geomspace(delta_bracket[0], delta_bracket[1], n_grid)
    out = CurveSample(CurveKind.HOPF, [])
    for chi in chis:
        q = p.replace(chi=float(chi))
        vals = []
        for d in grid:
            try:
                vals.append(_trace_at(q.replace(delta=float(d))))
            except ModelError:
                vals.append(np.nan)
        vals = np.asarray(vals)
        idx = np.nonzero(np.isfinite(vals[:-1]) & np.isfinite(vals[1:]) & (np.sign(vals[:-1]) != np.sign(vals[1:])))[0]
        found = False
        for i in idx:
            try:
                hp = hopf_threshold(q, "delta", (grid[i], grid[i + 1]), with_l1=with_l1)
            except ModelError:
                continue
            out.points.append((hp.delta, hp.chi))
            out.omega.append(hp.omega)
            out.l1.append(hp.l1)
            found = True
        if not found:
            out.gaps.append((float(chi), "NO_SIGN_CHANGE"))
    return out


def fold_curve(p: Params, chi_range, n: int) -> CurveSample:
    """delta_f(chi): the delta that turns the fold into a canard point."""
    chis = np.linspace(chi_range[0], chi_range[1], n)
    out = CurveSample(CurveKind.FOLD_CANARD, [])
    for chi in chis:
        try:
            fp = fold_point(p.replace(chi=float(chi)))
        except ModelError as exc:
            out.gaps.append((float(chi), exc.kind))
            continue
        out.points.append((fp.delta_f, float(chi)))
    return out


# ---------------------------------------------------------------------------
# attractor scans


@dataclass(frozen=True)
class Transition:
    kind: str  # EXPLOSION or SNLC
    lo: float
    hi: float

    @property
    def location(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class ScanResult:
    free: str
    values: np.ndarray
    amp_near: np.ndarray
    amp_far: np.ndarray
    eq_stable: np.ndarray
    transitions: list


def _amplitude(p: Params, ic, horizon, cfg) -> float:
    try:
        c = detect_cycle(p, ic, cfg, horizon=horizon, probe=False)
    except UnsettledError:
        return 0.0
    return c.amplitude


def _seeds(p: Params):
    e = coexistence(p)
    u, v = e.point
    return e, (u * 1.01, v), (p.chi, v)


def _sample(args):
    p, horizon, cfg = args
    e, near, far = _seeds(p)
    return _amplitude(p, near, horizon, cfg), _amplitude(p, far, horizon, cfg), e.stability.is_stable


def _bisect(pred, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink [lo, hi] keeping pred(lo) != pred(hi)."""
    plo, phi = pred(lo), pred(hi)
    if plo == phi:
        raise UnsettledError(f"behaviour equal at both ends of [{lo}, {hi}]", kind="UNRESOLVED")
    for _ in range(MAX_BISECT):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        pm = pred(mid)
        if pm == plo:
            lo = mid
        else:
            hi = mid
    if hi - lo > max(tol, 1e-9 * max(1.0, abs(hi))):
        raise UnsettledError(f"bisection stalled at [{lo}, {hi}]", kind="UNRESOLVED")
    return lo, hi


def cycle_scan(
    p: Params,
    free: str,
    values_range,
    n: int,
    horizon: float | None = None,
    cfg: IntegratorConfig | None = None,
    refine: bool = True,
    tol: float = 1e-9,
    workers: int = 1,
    jump_ratio: float = 5.0,
) -> ScanResult:
    """Cycle amplitudes (u_max - u_min) along ``free`` from a seed next to E*
    and a far-field seed, plus the detected transitions.

    ``EXPLOSION`` marks the steepest jump, by more than ``jump_ratio``,
    between adjacent non-zero amplitudes.  ``SNLC`` marks a switch of the
    far-field attractor between cycle and equilibrium while E* is stable.
    With ``refine`` both are bisected down to ``tol``.
    """
    vals = np.linspace(values_range[0], values_range[1], n)
    tasks = [(p.replace(**{free: float(x)}), horizon, cfg) for x in vals]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sample, tasks))
    else:
        rows = [_sample(t) for t in tasks]
    amp_near = np.array([r[0] for r in rows])
    amp_far = np.array([r[1] for r in rows])
    stable = np.array([r[2] for r in rows])
    transitions = []

    # canard explosion: jump between two genuine cycles
    amp = np.maximum(amp_near, amp_far)
    best, best_i = jump_ratio, None
    for i in range(n - 1):
        a, b = amp[i], amp[i + 1]
        # both are cycles and the jump reaches the large-cycle scale
        if a > 0 and b > 0 and max(a, b) >= 0.5 * amp.max():
            r = max(a, b) / min(a, b)
            if r > best:
                best, best_i = r, i
    if best_i is not None:
        lo, hi = vals[best_i], vals[best_i + 1]
        if refine:
            thr = np.sqrt(amp[best_i] * amp[best_i + 1])

            def big(x):
                q = p.replace(**{free: float(x)})
                _, _, far = _seeds(q)
                return _amplitude(q, far, horizon, cfg) >= thr

            lo, hi = _bisect(big, lo, hi, tol)
        transitions.append(Transition("EXPLOSION", float(lo), float(hi)))

    # saddle-node of cycles: far-field attractor flips while E* stays stable
    far_cycle = amp_far > 0
    for i in range(n - 1):
        if stable[i] and stable[i + 1] and far_cycle[i] != far_cycle[i + 1]:
            lo, hi = vals[i], vals[i + 1]
            if refine:

                def alive(x):
                    q = p.replace(**{free: float(x)})
                    e, _, far = _seeds(q)
                    if not e.stability.is_stable:
                        raise UnsettledError("E* lost stability inside the bracket", kind="UNRESOLVED")
                    return _amplitude(q, far, horizon, cfg) > 0

                lo, hi = _bisect(alive, lo, hi, tol)
            transitions.append(Transition("SNLC", float(lo), float(hi)))
    return ScanResult(free, vals, amp_near, amp_far, stable, transitions)


# ---------------------------------------------------------------------------
# cycle shapes and domains


class CycleShape(str, enum.Enum):
    HEADLESS = "HeadlessCanard"
    HEADED = "HeadedCanard"
    RELAXATION = "Relaxation"


HEAD_FRACTION = 0.01
RELAXATION_FRACTION = 0.1


def cycle_kind(p: Params, c: CycleEstimate) -> CycleShape:
    """Shape of a simulated slow-fast cycle.

    A cycle has a head when its prey minimum is within 1% of chi of zero.
    It is a relaxation cycle when, in addition, it lands on u = 0 within
    10% of (v_f - v_ext) below the fold height, i.e. it left the parabola at
    the fold rather than further down its repelling sheet.
    """
    if c.u_min > HEAD_FRACTION * p.chi:
        return CycleShape.HEADLESS
    fp = fold_point(p)
    v_ext = exit_point(p)
    o = c.orbit
    thr = HEAD_FRACTION * p.chi
    u2, v2 = np.r_[o.u, o.u], np.r_[o.v, o.v]
    i = int(np.argmax(o.u))
    below = np.nonzero(u2[i:] < thr)[0]
    v_land = v2[i + below[0]] if below.size else fp.v_f
    if fp.v_f - v_land < RELAXATION_FRACTION * (fp.v_f - v_ext):
        return CycleShape.RELAXATION
    return CycleShape.HEADED


@dataclass(frozen=True)
class DomainLabel:
    id: int
    reason: str = ""
    distances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in range(1, 8):
            raise ValueError("domain id must be in 1..7")


def _hopf_l1_sign(p: Params) -> float:
    """Sign of l1 on the Hopf curve at this chi (searching delta near delta_f)."""
    fp = fold_point(p)
    width = 0.2 * fp.delta_f
    sample = hopf_curve(p, (p.chi, p.chi), 2, (fp.delta_f - width, fp.delta_f + width), n_grid=200)
    if not sample.points:
        raise UnsettledError("no Hopf point at this chi", kind="AMBIGUOUS")
    k = int(np.argmin([abs(d - fp.delta_f) for d, _ in sample.points]))
    return float(np.sign(sample.l1[k]))


def classify_domain(p: Params, horizon: float | None = None, cfg: IntegratorConfig | None = None,
                    boundary_tol: float = 1e-9) -> DomainLabel:
    """Domain 1..7 of the small-eps picture for a single parameter point.

    Uses the stability of E*, its position relative to the fold, the
    attractor reached from a far-field seed and, for cycles, their shape.
    Raises ``AMBIGUOUS`` (with distances to the fold and Hopf curves in
    ``info``) when the point is too close to a boundary to decide.
    """
    if p.eps > 0.1:
        raise ValueError("the domain picture applies for eps <= 0.1")
    e = coexistence(p)
    fp = fold_point(p)
    try:
        hp = hopf_threshold(p, "delta", (fp.delta_f * 0.8, fp.delta_f * 1.2), with_l1=False)
        d_hopf = p.delta - hp.delta
    except ModelError:
        d_hopf = float("nan")
    dist = {"fold": p.delta - fp.delta_f, "hopf": d_hopf}
    if e.stability.value == "NonHyperbolic" or min(abs(dist["fold"]), abs(np.nan_to_num(d_hopf, nan=1))) < boundary_tol:
        raise UnsettledError("point lies on a bifurcation curve", kind="AMBIGUOUS", **dist)
    horizon = horizon if horizon is not None else 20000.0
    seed = (p.chi, e.point.v)
    try:
        c = detect_cycle(p, seed, cfg, horizon=horizon, probe=False)
    except UnsettledError:
        c = None
    if not e.stability.is_stable:
        if c is None:
            raise UnsettledError("E* unstable but no cycle found", kind="AMBIGUOUS", **dist)
        shape = cycle_kind(p, c)
        dom = {CycleShape.HEADLESS: 3, CycleShape.HEADED: 4, CycleShape.RELAXATION: 5}[shape]
        return DomainLabel(dom, f"E* unstable, attracting {shape.value}", dist)
    if c is not None:
        return DomainLabel(7, "stable E* coexists with an attracting large cycle", dist)
    if e.point.u > fp.u_f:
        return DomainLabel(1, "stable E* on the attracting sheet", dist)
    try:
        sign = _hopf_l1_sign(p)
    except BazykinError as exc:
        raise UnsettledError(str(exc), kind="AMBIGUOUS", **dist) from exc
    if sign < 0:
        return DomainLabel(2, "stable E* on the repelling sheet, supercritical side", dist)
    return DomainLabel(6, "stable E* on the repelling sheet, subcritical side", dist)


def operational_curve(
    p: Params,
    kind: CurveKind | str,
    chi_values,
    delta_bracket_width: float = 2e-4,
    tol: float = 1e-8,
    horizon: float | None = None,
) -> CurveSample:
    """Maximal-canard or relaxation curve by bisection in delta per chi.

    MaximalCanard separates headless cycles from cycles with a head;
    Relaxation separates relaxation cycles from everything else.  The search
    bracket is [delta_H - width, delta_H] below the Hopf point.
    """
    kind = CurveKind(kind)
    if kind not in (CurveKind.MAXIMAL_CANARD, CurveKind.RELAXATION):
        raise ValueError("operational curves are MaximalCanard or Relaxation")
    out = CurveSample(kind, [])
    hz = 20000.0 if horizon is None else horizon

    def pred(q):
        e = coexistence(q)
        try:
            c = detect_cycle(q, (q.chi, e.point.v), horizon=hz, probe=False)
        except UnsettledError:
            return False
        shape = cycle_kind(q, c)
        if kind is CurveKind.MAXIMAL_CANARD:
            return shape is not CycleShape.HEADLESS
        return shape is CycleShape.RELAXATION

    for chi in chi_values:
        q = p.replace(chi=float(chi))
        try:
            fp = fold_point(q)
            hp = hopf_threshold(q, "delta", (fp.delta_f * 0.8, fp.delta_f * 1.2), with_l1=False)
            lo, hi = _bisect(lambda d: pred(q.replace(delta=float(d))), hp.delta - delta_bracket_width,
                             hp.delta, tol)
        except BazykinError as exc:
            out.gaps.append((float(chi), exc.kind))
            continue
        out.points.append((0.5 * (lo + hi), float(chi)))
    return out
