"""Slow-fast Bazykin predator-prey model: equilibria, canards, Hopf and
fold curves, Turing analysis, reaction-diffusion runs and transients."""

__version__ = "0.1.0"

from .core_model import Params, coexistence, find_equilibria, jacobian

__all__ = ["Params", "coexistence", "find_equilibria", "jacobian", "__version__"]
