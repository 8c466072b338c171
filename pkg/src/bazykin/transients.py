"""Heterogeneity norms, transient duration and its power-law scaling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, UnsettledError

__all__ = [
    "DiagnosticsSeries",
    "PowerLawFit",
    "ScanPoint",
    "diagnostics",
    "transient_duration",
    "powerlaw_fit",
    "transient_scan",
    "write_scan_csv",
    "write_fit",
]

COLUMNS = ("mean_u", "mean_v", "ampl_u", "ampl_v", "grad_u", "grad_v")
REL_FLOOR = 1e-8
ENVELOPE_SPREAD = 0.05  # window extrema must agree to 5% of the final range


def _trapz(y, dx):
    return dx * (np.sum(y) - 0.5 * (y[0] + y[-1]))


def diagnostics(u, v, dx: float) -> tuple:
    """(mean_u, mean_v, ampl_u, ampl_v, grad_u, grad_v) of one snapshot.

    mean is the trapezoid average, ampl = max - min, and grad is the L2
    norm of the central-difference derivative (one-sided at the ends).
    """
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    L = dx * (u.size - 1)
    out = []
    for f in (u, v):
        out.append(_trapz(f, dx) / L)
    for f in (u, v):
        out.append(float(f.max() - f.min()))
    for f in (u, v):
        g = np.gradient(f, dx)
        out.append(float(np.sqrt(_trapz(g * g, dx))))
    return tuple(float(x) for x in out)


@dataclass
class DiagnosticsSeries:
    t: list = field(default_factory=list)
    mean_u: list = field(default_factory=list)
    mean_v: list = field(default_factory=list)
    ampl_u: list = field(default_factory=list)
    ampl_v: list = field(default_factory=list)
    grad_u: list = field(default_factory=list)
    grad_v: list = field(default_factory=list)

    def append(self, t: float, row) -> None:
        self.t.append(float(t))
        for name, x in zip(COLUMNS, row):
            getattr(self, name).append(float(x))

    def __len__(self) -> int:
        return len(self.t)

    def arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k)) for k in ("t",) + COLUMNS}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t",) + COLUMNS)
            for i in range(len(self)):
                w.writerow([repr(self.t[i])] + [repr(getattr(self, k)[i]) for k in COLUMNS])

    @classmethod
    def from_arrays(cls, t, **cols) -> "DiagnosticsSeries":
        s = cls()
        n = len(t)
        for i in range(n):
            s.append(t[i], [np.asarray(cols.get(k, np.zeros(n)))[i] for k in COLUMNS])
        return s


def _period(t, y):
    """Mean spacing of upward mean-crossings, or None."""
    m = y.mean()
    up = np.nonzero((y[:-1] < m) & (y[1:] >= m))[0]
    if up.size < 2:
        return None
    return float(np.mean(np.diff(t[up])))


def _window_extrema(y, n):
    """min and max of y[i:i+n] for every i (shorter at the tail)."""
    n = min(n, y.size)
    pad = np.r_[y, np.full(n - 1, y[-1])]
    win = np.lib.stride_tricks.sliding_window_view(pad, n)
    return win.min(axis=1), win.max(axis=1)


def _envelope_window(y, i0, n, rng):
    """Double n until windowed extrema within the final window agree to
    ENVELOPE_SPREAD of the final range (beats, coarse sampling)."""
    cap = max(2, (y.size - i0) // 2)
    n = min(n, cap)
    while n < cap:
        lo, hi = _window_extrema(y, n)
        sel = slice(i0, y.size - n + 1)
        if max(np.ptp(hi[sel]), np.ptp(lo[sel])) <= ENVELOPE_SPREAD * rng:
            break
        n = min(2 * n, cap)
    return n


def transient_duration(series: DiagnosticsSeries, tol: float = 1e-2, window: float | None = None) -> float:
    """Time after which (mean_u, ampl_u, grad_u) stays within ``tol`` of its
    final behaviour.

    The final window (default 20% of the record) defines the reference:
    its last value for components that are steady there, its min/max
    envelope for components that still oscillate, in which case windowed
    extrema over about one period are compared.  For those, a deviation
    only counts once it exceeds ``tol`` plus the largest deviation inside
    the final window (irregular oscillations never match their own envelope
    exactly), and envelopes of the two halves of the final window must agree
    to ``tol``.  Deviations are relative to the largest magnitude of the
    component in the final window, floored at 1e-8.  Raises ``NOT_SETTLED`` (with the last exceedance time as
    ``lower_bound``) when the deviation reaches into the final window.
    """
    a = series.arrays()
    t = a["t"]
    if t.size < 2:
        return 0.0
    span = t[-1] - t[0]
    window = 0.2 * span if window is None else float(window)
    fin = t >= t[-1] - window
    last = -np.inf
    for name in ("mean_u", "ampl_u", "grad_u"):
        y = a[name]
        yf = y[fin]
        scale = max(np.max(np.abs(yf)), REL_FLOOR)
        lo_f, hi_f = yf.min(), yf.max()
        if (hi_f - lo_f) / scale <= tol:
            dev = np.abs(y - y[-1]) / scale
            floor = 0.0
        else:
            per = _period(t[fin], yf)
            dt = np.median(np.diff(t))
            n = max(2, int(np.ceil(1.5 * (per if per else window / 4) / dt)))
            n = _envelope_window(y, int(np.argmax(fin)), n, hi_f - lo_f)
            lo, hi = _window_extrema(y, n)
            dev = np.maximum(np.abs(lo - lo_f), np.abs(hi - hi_f)) / scale
            # windows running past the record end are incomplete
            dev[t > t[-1] - (n - 1) * dt] = 0.0
            # jitter of the final envelope is part of the final behaviour
            floor = dev[fin].max()
            # ... but the envelope itself must not drift across the final window
            first = fin & (t < t[-1] - window / 2)
            second = t >= t[-1] - window / 2
            if first.any() and second.any():
                drift = max(abs(y[first].min() - y[second].min()), abs(y[first].max() - y[second].max()))
                if drift / scale > tol:
                    last = max(last, t[-1] - window / 2)
        bad = np.nonzero(dev > tol + floor)[0]
        if bad.size:
            last = max(last, t[bad[-1]])
    if last == -np.inf:
        return 0.0
    if last >= t[-1] - window:
        raise UnsettledError("deviation persists into the final window", kind="NOT_SETTLED",
                             lower_bound=float(last - t[0]))
    return float(last - t[0])


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    coefficient: float
    r2: float

    def __call__(self, s):
        return self.coefficient * np.asarray(s, float) ** self.exponent


def powerlaw_fit(pairs) -> PowerLawFit:
    """Least squares line through (log distance, log duration)."""
    pairs = [(float(s), float(T)) for s, T in pairs]
    if len(pairs) < 3:
        raise ValueError("need at least 3 pairs")
    if any(not (s > 0 and T > 0) for s, T in pairs):
        raise NumericalError("distances and durations must be positive", kind="NONPOSITIVE_DATA")
    x = np.log([s for s, _ in pairs])
    y = np.log([T for _, T in pairs])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return PowerLawFit(float(slope), float(np.exp(icpt)), float(min(1.0, max(0.0, r2))))


@dataclass(frozen=True)
class ScanPoint:
    d: float
    distance: float
    duration: float
    settled: bool


def _scan_one(args):
    from .pde import Grid, PdeConfig, initial_condition, simulate

    p, d, L, dx, dt, t_end, stride, tol, window, d_cr = args
    grid = Grid.from_spacing(L, dx)
    cfg = PdeConfig(d=d, dt=dt, t_end=t_end, snapshot_stride=10**9, diag_stride=stride)
    res = simulate(p, cfg, initial_condition("LocalizedBump", p, grid))
    try:
        T, ok = transient_duration(res.diagnostics, tol, window), True
    except UnsettledError as exc:
        T, ok = exc.info["lower_bound"], False
    return ScanPoint(d, abs(d - d_cr), T, ok)


def transient_scan(p, d_values, L: float = 200.0, dx: float = 0.25, dt: float | None = None,
                   t_end: float = 5000.0, diag_every: float = 1.0, tol: float = 1e-2,
                   window: float | None = None, workers: int = 1) -> list:
    """Transient duration from the localized-bump initial state for each d."""
    from .turing import critical_diffusion

    dt = dt if dt is not None else (0.01 if p.eps > 0.1 else 0.002)
    stride = max(1, int(round(diag_every / dt)))
    d_cr = critical_diffusion(p)
    tasks = [(p, float(d), L, dx, dt, t_end, stride, tol, window, d_cr) for d in d_values]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_scan_one, tasks))
    return [_scan_one(a) for a in tasks]


def write_scan_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "distance", "duration", "settled_flag"])
        for s in points:
            w.writerow([repr(s.d), repr(s.distance), repr(s.duration), int(s.settled)])


def write_fit(fit: PowerLawFit, path) -> None:
    with open(path, "w") as fh:
        json.dump({"exponent": fit.exponent, "coefficient": fit.coefficient, "r2": fit.r2}, fh, indent=2)
        fh.write("\n")
