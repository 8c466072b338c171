import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bazykin.core_model import Params
from bazykin.errors import NumericalError, UnsettledError
from bazykin.transients import (
    DiagnosticsSeries,
    PowerLawFit,
    diagnostics,
    powerlaw_fit,
    transient_duration,
    transient_scan,
    write_fit,
    write_scan_csv,
)

fields = arrays(np.float64, st.integers(3, 60), elements=st.floats(0, 10))


def test_homogeneous_field():
    mu, mv, au, av, gu, gv = diagnostics(np.full(9, 2.5), np.full(9, 1.0), 0.5)
    assert (mu, mv) == (2.5, 1.0)
    assert au == av == gu == gv == 0


def test_sine_gradient_norm():
    x = np.linspace(0, 100, 401)
    _, _, au, _, gu, _ = diagnostics(np.sin(2 * np.pi * x / 100), np.zeros_like(x), 0.25)
    # (2 pi / L)^2 * L / 2 under the square root
    assert gu == pytest.approx(np.sqrt((2 * np.pi / 100) ** 2 * 50), abs=1e-3)
    assert gu == pytest.approx(0.444288, abs=1e-3)
    assert au == pytest.approx(2.0, abs=1e-3)


def test_ramp():
    L = 40.0
    x = np.linspace(0, L, 161)
    mu, _, au, _, gu, _ = diagnostics(x, x, x[1])
    assert mu == pytest.approx(L / 2, rel=1e-12)
    assert au == L
    assert gu == pytest.approx(np.sqrt(L), rel=1e-12)


@given(fields, st.floats(0.01, 2.0))
def test_reflection_invariance(u, dx):
    v = np.sqrt(u)
    a = diagnostics(u, v, dx)
    b = diagnostics(u[::-1], v[::-1], dx)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@given(fields, st.floats(0.01, 100.0))
def test_linear_scaling(u, c):
    a = np.array(diagnostics(u, u, 0.3))
    b = np.array(diagnostics(c * u, c * u, 0.3))
    assert np.allclose(b, c * a, rtol=1e-9, atol=1e-9)


def _series(t, mean_u, ampl_u=None, grad_u=None):
    z = np.zeros_like(t)
    return DiagnosticsSeries.from_arrays(
        t, mean_u=mean_u, ampl_u=z + 1 if ampl_u is None else ampl_u, grad_u=z + 1 if grad_u is None else grad_u
    )


def test_constant_series_has_zero_duration():
    t = np.linspace(0, 100, 1001)
    assert transient_duration(_series(t, np.ones_like(t))) == 0.0


@pytest.mark.parametrize("A, tau", [(1.0, 5.0), (3.0, 10.0), (0.5, 2.0)])
def test_exponential_decay_duration(A, tau):
    t = np.linspace(0, 400, 40001)
    s = _series(t, 1 + A * np.exp(-t / tau))
    # relative deviation A e^{-t/tau} / 1 crosses 1e-2 at tau ln(100 A)
    assert transient_duration(s, 1e-2) == pytest.approx(tau * np.log(100 * A), abs=0.02)


@given(st.floats(1e-3, 0.1), st.floats(1e-3, 0.1))
@settings(max_examples=30, deadline=None)
def test_duration_monotone_in_tol(t1, t2):
    t = np.linspace(0, 300, 3001)
    y = 1 + 0.8 * np.exp(-t / 20) * np.cos(t)
    s = _series(t, y)
    lo, hi = sorted((t1, t2))
    assert transient_duration(s, lo) >= transient_duration(s, hi)


@given(st.floats(0.1, 10.0))
@settings(max_examples=20, deadline=None)
def test_duration_invariant_under_joint_scaling(c):
    t = np.linspace(0, 300, 3001)
    base = transient_duration(_series(t, 1 + 0.05 * np.exp(-t / 15)), 1e-3)
    scaled = transient_duration(_series(t, 1 + c * 0.05 * np.exp(-t / 15)), c * 1e-3)
    assert scaled == pytest.approx(base, abs=t[1] - t[0])


def test_oscillatory_final_uses_envelopes():
    t = np.linspace(0, 1000, 20001)
    # oscillation whose amplitude relaxes onto 0.5
    y = 2 + (0.5 + 0.4 * np.exp(-t / 30)) * np.sin(2 * np.pi * t / 10)
    T = transient_duration(_series(t, y), 1e-2)
    # envelope deviation 0.4 e^{-t/30} / 2.5 reaches 1e-2 near t = 30 ln 16
    assert 30 * np.log(16) - 15 < T < 30 * np.log(16) + 15


def test_irregular_final_oscillation_settles():
    # coarse samples of two incommensurate tones: window extrema jitter a few
    # percent forever, yet the decaying offset is the only transient
    t = np.arange(0.0, 20000.0, 1.0)
    y = 5 + 0.4 * np.sin(2 * np.pi * t / 4.16) + 0.2 * np.sin(2 * np.pi * t / (4.16 * 1.618034))
    y = y + 2 * np.exp(-t / 200)
    T = transient_duration(_series(t, y), 1e-2)
    # offset 2 e^{-t/200} / 5.6 drops below 1e-2 near t = 200 ln 35.7
    assert 200 * np.log(35.7) - 100 < T < 200 * np.log(35.7) + 100


def test_drifting_envelope_not_settled():
    t = np.arange(0.0, 5000.0, 0.5)
    y = 3 + (0.5 + 1e-4 * t) * np.sin(2 * np.pi * t / 7)
    with pytest.raises(UnsettledError) as ei:
        transient_duration(_series(t, y), 1e-2)
    assert ei.value.lower_bound >= 4000


def test_not_settled():
    t = np.linspace(0, 100, 1001)
    with pytest.raises(UnsettledError) as ei:
        transient_duration(_series(t, 1 + 0.01 * t), 1e-3)
    assert ei.value.kind == "NOT_SETTLED"
    assert ei.value.lower_bound > 80


def _fit_oracle(x, y):
    # closed-form simple regression, no numpy fitting helpers
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    slope = sxy / sxx
    icpt = my - slope * mx
    ss_res = sum((b - (slope * a + icpt)) ** 2 for a, b in zip(x, y))
    ss_tot = sum((b - my) ** 2 for b in y)
    return slope, np.exp(icpt), 1 - ss_res / ss_tot


def test_exact_power_law():
    s = np.geomspace(0.05, 1.0, 10)
    fit = powerlaw_fit(zip(s, 7 * s**-1.3))
    assert fit.exponent == pytest.approx(-1.3, abs=1e-9)
    assert fit.coefficient == pytest.approx(7, rel=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit(0.5) == pytest.approx(7 * 0.5**-1.3)


@given(
    st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3)), min_size=3, max_size=20)
)
def test_fit_matches_closed_form(pairs):
    x = np.log([a for a, _ in pairs])
    y = np.log([b for _, b in pairs])
    if np.ptp(x) < 1e-6 or np.ptp(y) < 1e-6:
        return
    fit = powerlaw_fit(pairs)
    slope, coef, r2 = _fit_oracle(list(x), list(y))
    assert fit.exponent == pytest.approx(slope, rel=1e-6, abs=1e-9)
    assert fit.coefficient == pytest.approx(coef, rel=1e-6)
    assert fit.r2 == pytest.approx(r2, abs=1e-9)
    assert 0 <= fit.r2 <= 1


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_noise_free_exponent_recovered(k, c):
    s = np.geomspace(0.01, 10, 12)
    assert powerlaw_fit(zip(s, c * s**k)).exponent == pytest.approx(k, abs=1e-9)


def test_ties_and_errors():
    fit = powerlaw_fit([(1.0, 2.0), (1.0, 3.0), (2.0, 1.0), (4.0, 0.5)])
    assert fit.r2 < 1
    with pytest.raises(NumericalError) as ei:
        powerlaw_fit([(1.0, 2.0), (0.0, 3.0), (2.0, 1.0)])
    assert ei.value.kind == "NONPOSITIVE_DATA"
    with pytest.raises(ValueError):
        powerlaw_fit([(1.0, 2.0), (2.0, 1.0)])


def test_scan_plumbing(tmp_path):
    pts = transient_scan(Params(chi=12.25), [7.0, 9.0], L=20, dx=0.5, t_end=100, diag_every=0.5)
    assert [p.d for p in pts] == [7.0, 9.0]
    assert pts[0].distance == pytest.approx(7.0 - 6.5578698, abs=1e-6)
    assert all(p.duration >= 0 for p in pts)
    write_scan_csv(pts, tmp_path / "scan.csv")
    rows = list(csv.reader(open(tmp_path / "scan.csv")))
    assert rows[0] == ["d", "distance", "duration", "settled_flag"] and len(rows) == 3
    write_fit(PowerLawFit(-1.0, 2.0, 0.99), tmp_path / "fit.json")
    assert json.load(open(tmp_path / "fit.json"))["exponent"] == -1.0


def test_series_csv(tmp_path):
    s = _series(np.arange(3.0), np.arange(3.0))
    s.write_csv(tmp_path / "s.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["t", "mean_u", "mean_v", "ampl_u", "ampl_v", "grad_u", "grad_v"]
    assert len(rows) == 4
