import numpy as np
import pytest

from bazykin.bifurcation import (
    CurveKind,
    DomainLabel,
    Transition,
    _bisect,
    _l1_from_tensors,
    _tensors,
    classify_domain,
    cycle_scan,
    first_lyapunov,
    fold_curve,
    hopf_curve,
    hopf_threshold,
)
from bazykin.core_model import Params, coexistence, jacobian, reaction_rates
from bazykin.errors import ModelError, UnsettledError
from bazykin.slow_fast import fold_point

P0 = Params()


def analytic_tensors(p, x):
    """Hand-derived second and third derivatives of (f, eps*g)."""
    u, v = x
    a, b = p.alpha, p.beta
    q = 1 + a * u
    d1, d2, d3 = 1 / q**2, -2 * a / q**3, 6 * a * a / q**4
    B = np.zeros((2, 2, 2))
    C = np.zeros((2, 2, 2, 2))
    B[0, 0, 0] = -2 * p.nu / p.chi - b * v * d2
    B[0, 0, 1] = B[0, 1, 0] = -b * d1
    B[1, 0, 0] = p.eps * b * v * d2
    B[1, 0, 1] = B[1, 1, 0] = p.eps * b * d1
    B[1, 1, 1] = -2 * p.eps * p.delta
    C[0, 0, 0, 0] = -b * v * d3
    C[1, 0, 0, 0] = p.eps * b * v * d3
    for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
        C[(0,) + idx] = -b * d2
        C[(1,) + idx] = p.eps * b * d2
    return B, C


def planar_normal_form_a(p):
    """Stability coefficient of the planar Hopf normal form, computed in the
    real eigenbasis where J = [[0, -w], [w, 0]]; same sign as l1."""
    x = np.array(coexistence(p).point)
    A = jacobian(p, x).matrix
    w, V = np.linalg.eig(A)
    i = int(np.argmax(w.imag))
    om, q = w[i].imag, V[:, i]
    P = np.column_stack([q.real, -q.imag])
    Pi = np.linalg.inv(P)
    B, C = analytic_tensors(p, x)
    By = np.einsum("ia,abc,bj,ck->ijk", Pi, B, P, P)
    Cy = np.einsum("ia,abcd,bj,ck,dl->ijkl", Pi, C, P, P, P)
    f2, g2, f3, g3 = By[0], By[1], Cy[0], Cy[1]
    return (f3[0, 0, 0] + f3[0, 1, 1] + g3[0, 0, 1] + g3[1, 1, 1]) / 16 + (
        f2[0, 1] * (f2[0, 0] + f2[1, 1])
        - g2[0, 1] * (g2[0, 0] + g2[1, 1])
        - f2[0, 0] * g2[0, 0]
        + f2[1, 1] * g2[1, 1]
    ) / (16 * om)


# ---------------------------------------------------------------------------
# Hopf thresholds


def test_hopf_thresholds_in_chi():
    h1 = hopf_threshold(P0, "chi", (3.0, 5.0))
    h2 = hopf_threshold(P0, "chi", (11.0, 13.0))
    assert h1.chi == pytest.approx(3.96635, abs=1e-5)
    assert h2.chi == pytest.approx(12.1049, abs=1e-4)
    assert h1.l1 < 0 < h2.l1
    for h in (h1, h2):
        q = P0.replace(chi=h.chi)
        j = jacobian(q, coexistence(q).point)
        assert abs(j.trace) < 1e-9
        assert h.omega == pytest.approx(np.sqrt(j.det), rel=1e-12)


def test_hopf_threshold_in_delta_small_eps():
    h = hopf_threshold(Params(chi=13.0, eps=0.01), "delta", (0.1, 0.12))
    assert h.delta == pytest.approx(0.1090497, abs=1e-7)
    assert h.l1 > 0
    h = hopf_threshold(Params(chi=6.0, eps=0.01), "delta", (0.13, 0.16))
    assert h.delta == pytest.approx(0.1444361, abs=1e-7)
    assert h.l1 < 0


def test_hopf_threshold_errors():
    with pytest.raises(ModelError) as ei:
        hopf_threshold(P0, "chi", (5.0, 6.0))
    assert ei.value.kind == "NO_SIGN_CHANGE"
    with pytest.raises(ValueError):
        hopf_threshold(P0, "nu", (1, 2))


# ---------------------------------------------------------------------------
# first Lyapunov coefficient


def test_tensors_match_analytic_derivatives():
    h = hopf_threshold(P0, "chi", (3.0, 5.0), with_l1=False)
    q = P0.replace(chi=h.chi)
    x = np.array(coexistence(q).point)
    B, C = _tensors(q, x, 1e-3)
    Ba, Ca = analytic_tensors(q, x)
    assert np.allclose(B, Ba, atol=1e-5)
    assert np.allclose(C, Ca, atol=1e-4)


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.01])
def test_l1_matches_analytic_tensor_oracle(eps):
    curve = hopf_curve(Params(eps=eps), (4.0, 13.0), 7)
    for (d, chi), l1 in zip(curve.points, curve.l1):
        q = Params(chi=chi, delta=d, eps=eps)
        x = np.array(coexistence(q).point)
        A = jacobian(q, x).matrix
        Ba, Ca = analytic_tensors(q, x)
        ref = _l1_from_tensors(A, Ba, Ca, np.sqrt(np.linalg.det(A)))
        assert l1 == pytest.approx(ref, rel=1e-5, abs=1e-9)
        assert np.sign(planar_normal_form_a(q)) == np.sign(l1)


def test_l1_step_halving_invariance():
    for h in (hopf_threshold(P0, "chi", (3.0, 5.0)), hopf_threshold(P0, "chi", (11.0, 13.0))):
        a = first_lyapunov(P0, h, step=1e-3)
        b = first_lyapunov(P0, h, step=5e-4)
        assert a == pytest.approx(b, rel=1e-3)
        assert np.sign(a) == np.sign(h.l1)


def test_l1_changes_sign_once_along_hopf_curve():
    """Generalized Hopf point: l1 < 0 at small chi, > 0 at large chi, with
    the zero crossing where the planar normal-form coefficient also flips."""
    for eps, (lo, hi) in ((0.01, (6.0, 7.0)), (1.0, (7.0, 9.0))):
        c = hopf_curve(Params(eps=eps), (4.0, 13.0), 46)
        s = np.sign(c.l1)
        flips = np.nonzero(s[:-1] != s[1:])[0]
        assert len(flips) == 1
        i = flips[0]
        chi_a, chi_b = c.points[i][1], c.points[i + 1][1]
        assert lo <= chi_a < chi_b <= hi
        assert s[0] < 0 < s[-1]
        qa = Params(chi=chi_a, delta=c.points[i][0], eps=eps)
        qb = Params(chi=chi_b, delta=c.points[i + 1][0], eps=eps)
        assert planar_normal_form_a(qa) < 0 < planar_normal_form_a(qb)


# ---------------------------------------------------------------------------
# curves


def test_fold_curve_values_and_gap():
    c = fold_curve(P0, (0.5, 6.0), 12)
    assert c.kind is CurveKind.FOLD_CANARD
    assert [g[0] for g in c.gaps] == [0.5, 1.0]
    d, chi = c.points[-1]
    assert chi == 6.0
    fp = fold_point(Params(chi=6.0, delta=d))
    g = reaction_rates(Params(chi=6.0, delta=d), (fp.u_f, fp.v_f))[1]
    assert abs(g) < 1e-12


def test_hopf_curve_is_smooth():
    c = hopf_curve(Params(eps=0.01), (3.0, 13.0), 41)
    assert not c.gaps
    d = np.array([pt[0] for pt in c.points])
    step = np.abs(np.diff(d))
    # adjacent differences stay within 10x of the neighbouring secant step
    assert np.all(step[1:] < 10 * step[:-1] + 1e-12)
    assert np.all(step[:-1] < 10 * step[1:] + 1e-12)


def test_hopf_approaches_fold_as_eps_shrinks():
    chis = (4.0, 13.0)
    fold = {chi: d for d, chi in fold_curve(P0, chis, 10).points}
    worst = []
    for eps in (1.0, 0.5, 0.01):
        c = hopf_curve(Params(eps=eps), chis, 10)
        gaps = {chi: abs(d - fold[chi]) for d, chi in c.points}
        worst.append(max(gaps.values()))
        if eps == 0.01:
            small = gaps
        if eps == 0.5:
            mid = gaps
    assert worst[0] > worst[1] > worst[2]
    assert all(small[chi] < mid[chi] for chi in small)
    # O(eps): fifty-fold smaller eps gives a much smaller distance
    assert worst[2] < worst[1] / 10


# ---------------------------------------------------------------------------
# scans and bisection


def test_bisect_keeps_a_sign_change():
    seen = []

    def pred(x):
        seen.append(x)
        return x > 0.3

    lo, hi = _bisect(pred, 0.0, 1.0, 1e-6)
    assert lo < 0.3 <= hi and hi - lo <= 1e-6
    assert not pred(lo) and pred(hi)
    with pytest.raises(UnsettledError) as ei:
        _bisect(pred, 0.5, 1.0, 1e-6)
    assert ei.value.kind == "UNRESOLVED"


def test_snlc_in_chi():
    r = cycle_scan(P0, "chi", (12.15, 12.35), 5, tol=1e-5)
    snlc = [t for t in r.transitions if t.kind == "SNLC"]
    assert len(snlc) == 1
    assert snlc[0].location == pytest.approx(12.2523, abs=1e-3)
    assert all(r.eq_stable)
    # far seed finds the big cycle below the transition, nothing above it
    assert r.amp_far[0] > 1 and r.amp_far[-1] == 0
    assert np.all(r.amp_near == 0)


def test_transition_location():
    assert Transition("SNLC", 1.0, 2.0).location == 1.5


# ---------------------------------------------------------------------------
# domains


def test_domain_label_validation():
    with pytest.raises(ValueError):
        DomainLabel(0)
    with pytest.raises(ValueError):
        DomainLabel(8)
    with pytest.raises(ValueError):
        classify_domain(Params(chi=6.0, delta=0.1444, eps=0.5))


@pytest.mark.parametrize(
    "chi, delta, expected",
    [
        (6.0, 0.15, 1),
        (6.0, 0.1445, 2),
        (6.0, 0.1444, 5),
        (6.0, 0.14443, 3),
        (13.0, 0.10907, 6),
        (13.0, 0.1091, 1),
        (13.0, 0.1090657, 7),
    ],
)
def test_classify_domain(chi, delta, expected):
    lab = classify_domain(Params(chi=chi, delta=delta, eps=0.01))
    assert lab.id == expected
    assert set(lab.distances) == {"fold", "hopf"}


def test_classify_domain_on_boundary_is_ambiguous():
    p = Params(chi=6.0, eps=0.01)
    h = hopf_threshold(p, "delta", (0.13, 0.16), with_l1=False)
    with pytest.raises(UnsettledError) as ei:
        classify_domain(p.replace(delta=h.delta))
    assert ei.value.kind == "AMBIGUOUS"
    assert abs(ei.value.info["hopf"]) < 1e-9
