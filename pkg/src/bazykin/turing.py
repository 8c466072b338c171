"""Linear stability of the homogeneous coexistence state under diffusion.

The predator diffuses ``d`` times faster than the prey.  Perturbations
~ cos(kx) e^{lambda t} give M_k = J - diag(k^2, d k^2) and

    h(k^2) = det M_k = d k^4 - (d a11 + a22) k^2 + (a11 a22 - a12 a21).

On [0, L] with zero flux the admissible wavenumbers are k = n pi / L.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core_model import Params, coexistence, jacobian
from .errors import ModelError

__all__ = [
    "TuringAssessment",
    "ModeBoundary",
    "dispersion",
    "instability_band",
    "critical_diffusion",
    "mode_boundary",
    "fastest_mode",
    "turing_curve",
    "critical_curve",
    "write_assessment_csv",
]


def _entries(p: Params):
    # E* moves with every parameter, so it is always re-solved
    return jacobian(p, coexistence(p).point).matrix


@dataclass(frozen=True)
class TuringAssessment:
    kc2: float
    band: tuple
    d_cr: float
    unstable_modes: list
    kmax2: float
    predicted_peaks: float
    d: float = float("nan")
    L: float = float("nan")
    # modes whose k^2 sits on a band edge to within 1e-9 relative
    boundary_modes: list = field(default_factory=list)

    @property
    def r_minus(self) -> float:
        return self.band[0]

    @property
    def r_plus(self) -> float:
        return self.band[1]


@dataclass(frozen=True)
class ModeBoundary:
    n: int
    d: float

    @property
    def feasible(self) -> bool:
        return self.d > 0


def dispersion(p: Params, d: float, k2):
    """h(k^2) and the largest real part of the growth rate at k^2."""
    k2 = np.asarray(k2, float)
    if np.any(k2 < 0):
        raise ValueError("k2 must be >= 0")
    if not d > 0:
        raise ValueError("d must be > 0")
    (a11, a12), (a21, a22) = _entries(p)
    h = d * k2 * k2 - (a11 * d + a22) * k2 + (a11 * a22 - a12 * a21)
    tr = a11 + a22 - (1 + d) * k2
    disc = tr * tr - 4 * h
    root = np.sqrt(np.abs(disc))
    lam = np.where(disc >= 0, 0.5 * (tr + root), 0.5 * tr)
    if lam.ndim == 0:
        return float(h), float(lam)
    return h, lam


def critical_diffusion(p: Params) -> float:
    """Smallest d at which a band of unstable wavenumbers opens.

    The tangency d a11 + a22 = 2 sqrt(d Det) is quadratic in s = sqrt(d):
    a11 s^2 - 2 sqrt(Det) s + a22 = 0.
    """
    (a11, a12), (a21, a22) = _entries(p)
    det = a11 * a22 - a12 * a21
    if a11 <= 0:
        raise ModelError("prey is not self-activating at E* (a11 <= 0)", kind="NO_TURING", a11=a11)
    if a11 + a22 >= 0 or det <= 0:
        raise ModelError("E* is not stable without diffusion", kind="NO_TURING", trace=a11 + a22, det=det)
    s = (np.sqrt(det) + np.sqrt(det - a11 * a22)) / a11
    d = s * s
    res = d * a11 + a22 - 2 * np.sqrt(d * det)
    if abs(res) > 1e-10 * max(1.0, d * a11):
        # polish: h at its vertex is zero exactly at d_cr
        d = optimize.brentq(lambda x: (x * a11 + a22) ** 2 - 4 * x * det, 0.5 * d, 2 * d, xtol=1e-14)
    return float(d)


def instability_band(p: Params, d: float, L: float) -> TuringAssessment:
    """Unstable k^2 interval, admissible modes and the expected peak count."""
    if not (d > 0 and L > 0):
        raise ValueError("d and L must be > 0")
    (a11, a12), (a21, a22) = _entries(p)
    det = a11 * a22 - a12 * a21
    b = a11 * d + a22
    if not (b > 0 and a11 + a22 < 0):
        raise ModelError("need d*a11 + a22 > 0 and a11 + a22 < 0", kind="INFEASIBLE", b=b, trace=a11 + a22)
    disc = b * b - 4 * d * det
    if disc < 0:
        raise ModelError("h(k^2) has no real roots: no unstable band", kind="NO_BAND", disc=disc)
    r_minus = (b - np.sqrt(disc)) / (2 * d)
    r_plus = (b + np.sqrt(disc)) / (2 * d)
    kc2 = b / (2 * d)

    w2 = (np.pi / L) ** 2
    n_hi = int(np.sqrt(r_plus / w2)) + 2
    modes, edge = [], []
    for n in range(1, n_hi + 1):
        k2 = n * n * w2
        if min(abs(k2 - r_minus), abs(k2 - r_plus)) <= 1e-9 * r_plus:
            edge.append(n)
        elif r_minus < k2 < r_plus:
            modes.append(n)

    if r_plus > r_minus:
        res = optimize.minimize_scalar(
            lambda k2: -dispersion(p, d, k2)[1], bracket=(r_minus, kc2, r_plus), method="golden", tol=1e-8
        )
        kmax2 = float(res.x)
    else:
        kmax2 = kc2
    try:
        d_cr = critical_diffusion(p)
    except ModelError:
        d_cr = float("nan")
    peaks = L * np.sqrt(kmax2) / (2 * np.pi)
    return TuringAssessment(float(kc2), (float(r_minus), float(r_plus)), d_cr, modes, kmax2, float(peaks), d, L, edge)


def mode_boundary(p: Params, n: int, L: float) -> ModeBoundary:
    """Diffusion ratio at which mode n is neutral: h((n pi / L)^2) = 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    (a11, a12), (a21, a22) = _entries(p)
    k2 = (n * np.pi / L) ** 2
    den = k2 * (k2 - a11)
    if abs(k2 - a11) <= 1e-14 * max(k2, abs(a11)):
        raise ModelError(f"mode {n} sits on the pole k^2 = a11", kind="SINGULAR_MODE", n=n)
    return ModeBoundary(n, float((k2 * a22 - a11 * a22 + a12 * a21) / den))


def fastest_mode(p: Params, d: float, L: float, n_max: int | None = None) -> int:
    """Admissible mode with the largest growth rate."""
    w2 = (np.pi / L) ** 2
    if n_max is None:
        (a11, _), (_, a22) = _entries(p)
        # beyond k^2 = max(a11, 0) + |a22|/d every mode decays faster
        n_max = int(np.sqrt((max(a11, 0.0) + abs(a22) / d + 1.0) / w2)) + 2
    n = np.arange(1, n_max + 1)
    lam = dispersion(p, d, n * n * w2)[1]
    return int(n[np.argmax(lam)])


def turing_curve(p: Params, deltas, modes, L: float) -> dict:
    """d_T(n) over ``deltas`` for each n in ``modes``; NaN marks a pole or
    a missing equilibrium."""
    deltas = np.asarray(deltas, float)
    out = {}
    for n in modes:
        col = np.full(deltas.shape, np.nan)
        for i, dl in enumerate(deltas):
            try:
                col[i] = mode_boundary(p.replace(delta=float(dl)), int(n), L).d
            except ModelError:
                pass
        out[int(n)] = col
    return out


def critical_curve(p: Params, deltas) -> np.ndarray:
    """d_cr over ``deltas`` (NaN where there is no Turing instability)."""
    vals = []
    for dl in deltas:
        try:
            vals.append(critical_diffusion(p.replace(delta=float(dl))))
        except ModelError:
            vals.append(np.nan)
    return np.asarray(vals)


def write_assessment_csv(rows, path) -> None:
    """rows: iterable of (Params, TuringAssessment)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "d", "eps", "d_cr", "r_minus", "r_plus", "kmax2", "predicted_peaks", "modes"])
        for p, a in rows:
            w.writerow(
                [
                    repr(p.delta),
                    repr(a.d),
                    repr(p.eps),
                    repr(a.d_cr),
                    repr(a.r_minus),
                    repr(a.r_plus),
                    repr(a.kmax2),
                    repr(a.predicted_peaks),
                    ";".join(map(str, a.unstable_modes)),
                ]
            )
