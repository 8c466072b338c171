import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bazykin.core_model import Params, critical_manifold, reaction_rates
from bazykin.errors import ModelError
from bazykin.ode import IntegratorConfig, integrate
from bazykin.slow_fast import (
    CycleKind,
    FoldKind,
    canard_height_range,
    cycle_roots,
    exit_point,
    fold_point,
    singular_cycle,
    slow_divergence_integral,
)

P6 = Params(chi=6.0, delta=0.14443, eps=0.01)
P13 = Params(chi=13.0, delta=0.1090657, eps=0.01)


def simpson(fun, a, b, n=1_000_000):
    if n % 2:
        n += 1
    x = np.linspace(a, b, n + 1)
    y = fun(x)
    bad = ~np.isfinite(y)
    if bad.any():  # removable point: fill from neighbours
        idx = np.nonzero(bad)[0]
        y[idx] = 0.5 * (y[idx - 1] + y[idx + 1])
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def bisect(fun, a, b, it=200):
    fa = fun(a)
    for _ in range(it):
        m = 0.5 * (a + b)
        fm = fun(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def raw_integrand(p):
    """(df/du) F' / g along v = F(u), straight from the definitions."""

    def fun(u):
        F = critical_manifold(p, u)
        q = 1 + p.alpha * u
        f_u = p.nu * (1 - 2 * u / p.chi) - p.beta * F / q**2
        g = reaction_rates(p, (u, F))[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return f_u * critical_manifold(p, u, 1) / g

    return fun


def test_fold_point_values():
    fp = fold_point(Params())
    assert fp.u_f == 2.5
    assert fp.v_f == pytest.approx(7.16374, abs=1e-5)
    assert fp.delta_f == pytest.approx(0.144577, abs=1e-6)
    assert fp.kind is FoldKind.JUMP
    assert fold_point(Params(chi=4.28)).u_f == pytest.approx(1.64, abs=1e-12)
    with pytest.raises(ModelError) as ei:
        fold_point(Params(chi=1.0))
    assert ei.value.kind == "NO_FOLD"


def test_fold_becomes_canard_point_at_delta_f():
    p = Params(chi=6.0)
    fp = fold_point(p)
    q = p.replace(delta=fp.delta_f)
    assert fold_point(q).kind is FoldKind.CANARD
    assert abs(reaction_rates(q, (fp.u_f, fp.v_f))[1]) < 1e-12


@given(st.floats(1.5, 15.0), st.floats(0.3, 3.0))
def test_fold_maximises_critical_manifold(chi, alpha):
    p = Params(chi=chi, alpha=alpha)
    assume_fold = alpha * chi > 1.05
    if not assume_fold:
        return
    fp = fold_point(p)
    assert abs(critical_manifold(p, fp.u_f, 1)) < 1e-12
    assert critical_manifold(p, fp.u_f, 2) < 0
    u = np.linspace(0, chi, 2001)
    assert np.all(critical_manifold(p, u) <= fp.v_f + 1e-12)


def test_cycle_roots_special_heights():
    p = Params(chi=6.0)
    fp = fold_point(p)
    ul, ur = cycle_roots(p, fp.v_f, 0.0)
    assert ul == pytest.approx(fp.u_f, abs=1e-6) and ur == pytest.approx(fp.u_f, abs=1e-6)
    ul, ur = cycle_roots(p, 0.0, 0.0)
    assert ul == pytest.approx(-1.0, abs=1e-12) and ur == pytest.approx(6.0, abs=1e-12)
    ul, ur = cycle_roots(p, 10 / 2.85, 0.0)
    assert ul == pytest.approx(0.0, abs=1e-12) and ur == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(ModelError) as ei:
        cycle_roots(p, fp.v_f, 0.5)
    assert ei.value.kind == "OUT_OF_RANGE"


@given(st.floats(2.0, 14.0), st.floats(0.0, 0.999))
def test_cycle_roots_against_bisection(chi, frac):
    p = Params(chi=chi)
    fp = fold_point(p)
    h = frac * fp.v_f
    ul, ur = cycle_roots(p, h, 0.0)
    assert ul <= fp.u_f <= ur
    assert critical_manifold(p, ur) == pytest.approx(h, abs=1e-10)
    assert critical_manifold(p, ul) == pytest.approx(h, abs=1e-10)

    def fun(u):
        return critical_manifold(p, u) - h

    assert ur == pytest.approx(bisect(fun, fp.u_f, chi), abs=1e-8)
    assert ul == pytest.approx(bisect(fun, -1 / p.alpha, fp.u_f), abs=1e-8)


def test_exit_point_balances_quadrature():
    p = Params(chi=6.0, delta=0.1444)
    fp = fold_point(p)
    v_ext = exit_point(p)
    assert 0 < v_ext < p.nu / p.beta

    def integrand(v):
        return (p.nu - p.beta * v) / (-p.eta * v - p.delta * v * v)

    assert abs(simpson(integrand, v_ext, fp.v_f)) < 1e-9


@pytest.mark.parametrize("delta", [0.12, 0.1444, 0.17])
def test_exit_point_against_simpson_bisection(delta):
    p = Params(chi=6.0, delta=delta)
    fp = fold_point(p)

    def balance(v):
        return simpson(lambda x: (p.nu - p.beta * x) / (-p.eta * x - p.delta * x * x), v, fp.v_f, 20_000)

    ref = bisect(balance, 1e-3, p.nu / p.beta, it=60)
    assert exit_point(p) == pytest.approx(ref, abs=1e-6)


def test_exit_point_monotone_in_delta():
    vals = [exit_point(Params(chi=6.0, delta=d)) for d in (0.12, 0.1444, 0.17)]
    assert vals[0] < vals[1] < vals[2]


def test_exit_point_tends_to_turning_height():
    # chi just above the value making the fold height equal nu/beta
    turn = 10 / 2.85
    prev = None
    for chi in (1.2, 1.05, 1.01):
        p = Params(chi=chi)
        assert fold_point(p).v_f > turn
        v = exit_point(p)
        assert v < turn
        if prev is not None:
            assert turn - v < turn - prev
        prev = v
    assert turn - prev < 0.1


def test_exit_point_stiff_simulation_oracle():
    p = Params(chi=6.0, delta=0.1444, eps=1e-4)
    fp = fold_point(p)

    def leave(t, u, v):
        return np.log(np.maximum(u, 1e-300)) - np.log(1e-3)

    leave.direction = 1
    tr = integrate(p, (1e-3, fp.v_f), (0.0, 3e4), IntegratorConfig(rtol=1e-10, atol=1e-12), events=[leave])
    t_ev, _, v_ev = tr.events[0]
    assert len(v_ev) >= 1
    assert v_ev[0] == pytest.approx(exit_point(p), abs=2e-2)


def test_no_root_when_fold_below_turning_height():
    with pytest.raises(ModelError) as ei:
        exit_point(Params(chi=1.001, alpha=1.0), v_entry=3.0)
    assert ei.value.kind == "NO_ROOT"


def test_headless_sign_supercritical_side():
    lo, hi = canard_height_range(P6, at_canard_point=True)
    for s in np.linspace(lo, hi, 7)[1:-1]:
        sd = slow_divergence_integral(P6, s)
        assert sd.value < 0 and sd.predicts_stable


def test_headless_sign_subcritical_side():
    lo, hi = canard_height_range(P13, at_canard_point=True)
    s = hi - 0.05 * (hi - lo)  # small cycle near the fold
    sd = slow_divergence_integral(P13, s)
    assert sd.value > 0 and not sd.predicts_stable


def test_headed_integral_adds_trivial_branch():
    lo, hi = canard_height_range(P6, at_canard_point=True)
    s = 0.5 * (lo + hi)
    headed = slow_divergence_integral(P6, s, CycleKind.HEADED)
    assert headed.predicts_stable == (headed.value < 0)
    # on the supercritical side the attracting parts dominate
    assert headed.value < 0


def test_integral_vanishes_as_cycle_collapses():
    lo, hi = canard_height_range(P6, at_canard_point=True)
    vals = [abs(slow_divergence_integral(P6, hi - d).value) for d in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


@pytest.mark.parametrize("p", [P6, P13, Params(chi=8.0, delta=0.12, eps=0.01)])
@pytest.mark.parametrize("frac", [0.2, 0.5, 0.9])
def test_headless_against_simpson(p, frac):
    lo, hi = canard_height_range(p, at_canard_point=True)
    s = lo + frac * (hi - lo)
    q = p.replace(delta=fold_point(p).delta_f)
    v_ext = exit_point(q)
    ul, ur = cycle_roots(q, s, v_ext)
    ref = simpson(raw_integrand(q), ur, ul)
    assert slow_divergence_integral(p, s).value == pytest.approx(ref, abs=1e-6)


def test_headed_against_simpson():
    p = P13
    lo, hi = canard_height_range(p, at_canard_point=True)
    s = lo + 0.4 * (hi - lo)
    q = p.replace(delta=fold_point(p).delta_f)
    v_ext = exit_point(q)
    ul, _ = cycle_roots(q, s, v_ext)
    ur0 = cycle_roots(q, 0.0, v_ext)[1]
    arc = simpson(raw_integrand(q), ur0, ul)
    branch = simpson(lambda v: (q.nu - q.beta * v) / (-q.eta * v - q.delta * v * v), v_ext + s, v_ext)
    assert slow_divergence_integral(p, s, "HeadedCanard").value == pytest.approx(arc + branch, abs=1e-6)


def test_pole_on_path_at_actual_delta():
    lo, hi = canard_height_range(P6)
    with pytest.raises(ModelError) as ei:
        slow_divergence_integral(P6, 0.5 * (lo + hi), at_canard_point=False)
    assert ei.value.kind == "POLE_ON_PATH"


def test_relaxation_has_no_divergence_integral():
    with pytest.raises(ValueError):
        slow_divergence_integral(P6, 1.0, CycleKind.RELAXATION)


def _on_pieces(p, cyc, tol=1e-10):
    for label, a, b in cyc.segments:
        pts = cyc.vertices[a:b]
        if label == "C01":
            assert np.max(np.abs(pts[:, 1] - critical_manifold(p, pts[:, 0]))) < tol
        elif label == "C00":
            assert np.max(np.abs(pts[:, 0])) < tol
        else:
            assert np.ptp(pts[:, 1]) < tol


@pytest.mark.parametrize("kind", list(CycleKind))
def test_singular_cycles_are_closed_and_on_manifolds(kind):
    p = Params(chi=6.0, delta=0.1444)
    lo, hi = canard_height_range(p)
    cyc = singular_cycle(p, 0.5 * (lo + hi), kind)
    assert np.array_equal(cyc.vertices[0], cyc.vertices[-1])
    _on_pieces(p, cyc)
    labels = [s[0] for s in cyc.segments]
    if kind is CycleKind.HEADLESS:
        assert labels == ["C01", "fiber"]
    elif kind is CycleKind.HEADED:
        assert "C00" in labels
    else:
        assert len(labels) == 4
        fp = fold_point(p)
        assert np.any(np.all(np.isclose(cyc.vertices, [fp.u_f, fp.v_f]), axis=1))


def test_headless_cycle_degenerates_at_fold():
    p = Params(chi=6.0, delta=0.1444)
    lo, hi = canard_height_range(p)
    cyc = singular_cycle(p, hi - 1e-9, CycleKind.HEADLESS)
    fp = fold_point(p)
    assert np.max(np.abs(cyc.vertices[:, 0] - fp.u_f)) < 1e-3


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95))
def test_prediction_flag_tracks_sign(frac):
    lo, hi = canard_height_range(P13, at_canard_point=True)
    sd = slow_divergence_integral(P13, lo + frac * (hi - lo))
    assert sd.predicts_stable == (sd.value < 0)
