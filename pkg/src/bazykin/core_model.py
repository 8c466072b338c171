"""Bazykin prey-predator kinetics, equilibria and their linearisation.

The temporal model is

    du/dt = f(u, v) = nu*u*(1 - u/chi) - beta*u*v/(1 + alpha*u)
    dv/dt = eps*g(u, v),   g(u, v) = beta*u*v/(1 + alpha*u) - eta*v - delta*v**2

All functions are pure and accept scalars or numpy arrays for the densities.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ModelError

__all__ = [
    "Params",
    "State",
    "Jac2",
    "EquilibriumKind",
    "Stability",
    "Equilibrium",
    "CubicDiagnostics",
    "reaction_rates",
    "jacobian",
    "find_equilibria",
    "coexistence",
    "classify_equilibrium",
    "classify_eigenvalues",
    "nullclines",
    "critical_manifold",
    "upper_bounds",
]

RESIDUAL_TOL = 1e-10
EQUILIBRIUM_CHECK_TOL = 1e-8
NONHYPERBOLIC_TOL = 1e-9
DEGENERATE_GAP = 1e-7


@dataclass(frozen=True)
class Params:
    """The seven model constants.  Defaults are the values used throughout
    the canard and Turing experiments (nu=10, alpha=1, beta=2.85, eta=1)."""

    nu: float = 10.0
    chi: float = 6.0
    alpha: float = 1.0
    beta: float = 2.85
    eta: float = 1.0
    delta: float = 0.11
    eps: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{f.name} must be finite and > 0, got {val!r}")
        if self.eps > 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps!r}")

    def replace(self, **changes) -> Params:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


class State(NamedTuple):
    u: float
    v: float


@dataclass(frozen=True)
class Jac2:
    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def eigenvalues(self) -> tuple[complex, complex]:
        """Roots of the characteristic polynomial in canonical order."""
        tr, det = self.trace, self.det
        disc = tr * tr - 4.0 * det
        if disc >= 0:
            s = np.sqrt(disc)
            # avoid cancellation for the smaller root
            big = 0.5 * (tr + np.copysign(s, tr)) if tr != 0 else 0.5 * s
            small = det / big if big != 0 else 0.5 * (tr - s)
            lam = sorted([big, small], reverse=True)
            return complex(lam[0]), complex(lam[1])
        w = 0.5 * np.sqrt(-disc)
        return complex(0.5 * tr, w), complex(0.5 * tr, -w)


class EquilibriumKind(str, enum.Enum):
    ORIGIN = "Origin"
    PREY_ONLY = "PreyOnly"
    COEXISTENCE = "Coexistence"


class Stability(str, enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_FOCUS = "UnstableFocus"
    SADDLE = "Saddle"
    NON_HYPERBOLIC = "NonHyperbolic"

    @property
    def is_stable(self) -> bool:
        return self in (Stability.STABLE_NODE, Stability.STABLE_FOCUS)


@dataclass(frozen=True)
class Equilibrium:
    kind: EquilibriumKind
    point: State
    eigenvalues: tuple[complex, complex]
    stability: Stability
    residual: float = 0.0
    degenerate: bool = False


@dataclass(frozen=True)
class CubicDiagnostics:
    A: float
    B: float
    Delta: float
    coefficients: tuple[float, float, float, float]


def reaction_rates(p: Params, s) -> tuple:
    """Return ``(f, g)``; ``g`` excludes the timescale factor eps."""
    u, v = s
    pred = p.beta * u * v / (1.0 + p.alpha * u)
    f = p.nu * u * (1.0 - u / p.chi) - pred
    g = pred - p.eta * v - p.delta * v * v
    return f, g


def jacobian(p: Params, s) -> Jac2:
    """Partial derivatives of ``(f, eps*g)`` at an arbitrary state."""
    u, v = float(s[0]), float(s[1])
    q = 1.0 + p.alpha * u
    a11 = p.nu * (1.0 - 2.0 * u / p.chi) - p.beta * v / q**2
    a12 = -p.beta * u / q
    a21 = p.eps * p.beta * v / q**2
    a22 = p.eps * (p.beta * u / q - p.eta - 2.0 * p.delta * v)
    return Jac2(a11, a12, a21, a22)


def nullclines(p: Params, u):
    """Prey nullcline ``F(u)`` (the critical manifold branch) and the predator
    nullcline ``v(u)`` solving g = 0 with v != 0 (may be negative)."""
    F = (p.nu / p.beta) * (1.0 - u / p.chi) * (1.0 + p.alpha * u)
    v_pred = (p.beta * u / (1.0 + p.alpha * u) - p.eta) / p.delta
    return F, v_pred


def critical_manifold(p: Params, u, order: int = 0):
    """``F(u)`` and its derivatives (F is quadratic, so order <= 2 is exact)."""
    c = p.nu / p.beta
    if order == 0:
        return c * (1.0 - u / p.chi) * (1.0 + p.alpha * u)
    if order == 1:
        return c * (p.alpha - 1.0 / p.chi - 2.0 * p.alpha * u / p.chi)
    if order == 2:
        return np.full_like(np.asarray(u, dtype=float), -2.0 * c * p.alpha / p.chi)[()]
    raise ValueError("order must be 0, 1 or 2")


def upper_bounds(p: Params) -> tuple[float, float]:
    """Invariant box ``[0, chi] x [0, (beta*chi - eta)/delta]``."""
    return p.chi, (p.beta * p.chi - p.eta) / p.delta


def cubic_coefficients(p: Params) -> tuple[float, float, float, float]:
    nu, chi, al, be, et, de = p.nu, p.chi, p.alpha, p.beta, p.eta, p.delta
    c3 = al**2 * de * nu
    c2 = de * nu * al * (2.0 - al * chi)
    c1 = be**2 * chi - et * al * be * chi - 2.0 * de * nu * chi * al + de * nu
    c0 = -chi * (de * nu + be * et)
    return c3, c2, c1, c0


def cubic_diagnostics(p: Params) -> CubicDiagnostics:
    nu, chi, al, be, et, de = p.nu, p.chi, p.alpha, p.beta, p.eta, p.delta
    c1 = cubic_coefficients(p)[2]
    A = de**2 * nu**2 * al**2 * (2 - al * chi) ** 2 - 3 * al**2 * de * nu * c1
    B = (
        2 * de**3 * nu**3 * al**3 * (2 - al * chi) ** 3
        - 9 * al**3 * de**2 * nu**2 * (2 - al * chi) * c1
        + 27 * al**4 * de**2 * nu**2 * chi * (de * nu + be * et)
    )
    return CubicDiagnostics(A, B, B * B - 4 * A**3, cubic_coefficients(p))


def _polish(coeffs, x: float) -> float:
    c3, c2, c1, c0 = coeffs
    for _ in range(50):
        val = ((c3 * x + c2) * x + c1) * x + c0
        der = (3 * c3 * x + 2 * c2) * x + c1
        if der == 0:
            break
        step = val / der
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def classify_eigenvalues(eigs) -> Stability:
    re = [e.real for e in eigs]
    if min(abs(r) for r in re) < NONHYPERBOLIC_TOL:
        return Stability.NON_HYPERBOLIC
    focus = abs(eigs[0].imag) > 0
    if all(r < 0 for r in re):
        return Stability.STABLE_FOCUS if focus else Stability.STABLE_NODE
    if all(r > 0 for r in re):
        return Stability.UNSTABLE_FOCUS if focus else Stability.UNSTABLE_NODE
    return Stability.SADDLE


def _make(p: Params, kind, u: float, v: float, degenerate=False) -> Equilibrium:
    eigs = jacobian(p, (u, v)).eigenvalues()
    f, g = reaction_rates(p, (u, v))
    return Equilibrium(
        kind, State(u, v), eigs, classify_eigenvalues(eigs), max(abs(f), abs(g)), degenerate
    )


def find_equilibria(p: Params) -> tuple[list[Equilibrium], CubicDiagnostics]:
    """Extinction, prey-only and every feasible coexistence equilibrium.

    Coexistence prey densities are the positive real roots of the cubic
    obtained by eliminating v from f = g = 0; roots come from the companion
    matrix and are Newton-polished.
    """
    diag = cubic_diagnostics(p)
    coeffs = diag.coefficients
    scale = max(abs(c) for c in coeffs)
    if abs(coeffs[0]) < 1e3 * np.finfo(float).eps * scale:
        raise ModelError("leading cubic coefficient underflows", kind="ILL_CONDITIONED")

    out = [_make(p, EquilibriumKind.ORIGIN, 0.0, 0.0), _make(p, EquilibriumKind.PREY_ONLY, p.chi, 0.0)]
    roots = np.roots(coeffs)
    imag_tol = 1e-7 * max(1.0, np.max(np.abs(roots)))
    cands = sorted(float(_polish(coeffs, r.real)) for r in roots if abs(r.imag) <= imag_tol and r.real > 0)
    # np.roots returns a double root as a conjugate pair with tiny imaginary part
    # or as two nearly equal reals; polishing merges both cases
    for i, u in enumerate(cands):
        v = float(nullclines(p, u)[1])
        if v <= 0:
            continue
        near = [w for j, w in enumerate(cands) if j != i and abs(w - u) < DEGENERATE_GAP]
        eq = _make(p, EquilibriumKind.COEXISTENCE, u, v, degenerate=bool(near))
        if eq.residual >= RESIDUAL_TOL * max(1.0, p.nu * p.chi):
            raise ModelError(f"coexistence residual {eq.residual:.3g} too large", kind="ILL_CONDITIONED")
        out.append(eq)
    return out, diag


def coexistence(p: Params) -> Equilibrium:
    """The unique feasible coexistence equilibrium E*.

    Raises ``NO_COEXISTENCE`` when there is none and ``NOT_UNIQUE`` when the
    cubic has several feasible roots.
    """
    eqs = [e for e in find_equilibria(p)[0] if e.kind is EquilibriumKind.COEXISTENCE]
    if not eqs:
        raise ModelError(f"no feasible coexistence equilibrium for {p}", kind="NO_COEXISTENCE")
    distinct = {round(e.point.u, 6) for e in eqs}
    if len(distinct) > 1:
        raise ModelError(f"{len(distinct)} coexistence equilibria for {p}", kind="NOT_UNIQUE")
    return eqs[0]


def classify_equilibrium(p: Params, e) -> Equilibrium:
    u, v = float(e[0]), float(e[1])
    f, g = reaction_rates(p, (u, v))
    res = max(abs(f), abs(g))
    if not res < EQUILIBRIUM_CHECK_TOL:
        raise ModelError(f"({u}, {v}) is not a fixed point, residual {res:.3g}", kind="NOT_EQUILIBRIUM")
    if u == 0 and v == 0:
        kind = EquilibriumKind.ORIGIN
    elif v == 0:
        kind = EquilibriumKind.PREY_ONLY
    else:
        kind = EquilibriumKind.COEXISTENCE
    return _make(p, kind, u, v)
