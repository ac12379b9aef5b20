"""Cartan-type operators induced by a structure J_k on flat R^{8n}.

Conventions used throughout:

* a 1-form is its coefficient vector, α = Σ α_a dx_a;
* a 2-form is a matrix A with Φ(X, Y) = Xᵀ A Y, and dx_a ∧ dx_b acts as
  X_a Y_b - X_b Y_a;
* interior product fills the first slot: (i_ξ Φ)_b = Σ_a ξ_a A[a, b].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .expr import Expr, Lagrangian, compile_exprs, neg
from .structures import NBLOCKS, SignedBlockPermutation, apply, builtin_structure

ANTISYMMETRY_TOL = 1e-12


def _relocation(J: SignedBlockPermutation, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate (σ, s): coordinate a = (b, i) maps to (target[b], i) with sign[b]."""
    sigma = np.empty(NBLOCKS * n, dtype=np.intp)
    s = np.empty(NBLOCKS * n, dtype=float)
    for b in range(NBLOCKS):
        sigma[b * n:(b + 1) * n] = J.target[b] * n + np.arange(n)
        s[b * n:(b + 1) * n] = J.sign[b]
    return sigma, s


@dataclass(frozen=True)
class OneForm:
    """Symbolic 1-form: coeffs[a] is the coefficient of dx_a."""

    coeffs: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.coeffs) == 0 or len(self.coeffs) % NBLOCKS:
            raise ValueError("a 1-form on R^{8n} needs 8n coefficients")

    @cached_property
    def _compiled(self):
        return compile_exprs(self.coeffs)

    def evaluate(self, x) -> np.ndarray:
        return self._compiled(x)


@dataclass(frozen=True)
class TwoFormField:
    """State-dependent 2-form, x ↦ A(x) with Φ(X, Y) = Xᵀ A(x) Y."""

    coeff: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, x) -> np.ndarray:
        A = self.coeff(np.asarray(x, dtype=float))
        err = np.max(np.abs(A + A.T), initial=0.0)
        if err > ANTISYMMETRY_TOL:
            raise ArithmeticError(f"2-form lost antisymmetry: max |A + Aᵀ| = {err:.3e}")
        return A

    def pair(self, x, X, Y) -> float:
        return float(np.asarray(X) @ self(x) @ np.asarray(Y))

    def contract(self, x, xi) -> np.ndarray:
        """Coefficients of the 1-form i_ξ Φ at x."""
        return np.asarray(xi, dtype=float) @ self(x)


def vertical_derivation(J: SignedBlockPermutation, form: np.ndarray) -> np.ndarray:
    """i_J on a numeric 1-form (vector) or 2-form (matrix).

    (i_J ω)(X_1, .., X_r) = Σ_i ω(X_1, .., J X_i, .., X_r), for r = 1, 2.
    """
    form = np.asarray(form)
    n = form.shape[0] // NBLOCKS
    M = J.matrix(n)
    if form.ndim == 1:
        return M.T @ form
    if form.ndim == 2:
        return M.T @ form + form @ M
    raise ValueError("i_J is only implemented for 1-forms and 2-forms")


def vertical_differential(L: Lagrangian, k: int) -> OneForm:
    """d_J L = i_J dL, with coefficient a equal to sign · ∂L/∂x_{σ(a)} (that is Jᵀ∇L)."""
    sigma, s = _relocation(builtin_structure(k), L.n)
    coeffs = tuple(
        L.gradient[sigma[a]] if s[a] > 0 else neg(L.gradient[sigma[a]])
        for a in range(L.dim)
    )
    return OneForm(coeffs)


def kaehler_form(L: Lagrangian, k: int) -> TwoFormField:
    """Φ_L = -d(d_J L) as a state-dependent 2-form.

    With c = d_J L, ∂_j c_a = s(a) H[j, σ(a)], and
    A[j, a] = -(∂_j c_a - ∂_a c_j), which equals -(H J + J H).
    """
    sigma, s = _relocation(builtin_structure(k), L.n)

    def coeff(x):
        dc = L.hess(x)[:, sigma] * s
        return -(dc - dc.T)

    return TwoFormField(coeff, L.dim)


def liouville_field(k: int, v) -> np.ndarray:
    """V_J = J(ξ) for the semispray with components v."""
    return apply(builtin_structure(k), np.asarray(v, dtype=float))


def energy(L: Lagrangian, k: int, x, v) -> float:
    """E_L = V_J(L) - L = (J v)·∇L(x) - L(x)."""
    return float(liouville_field(k, v) @ L.grad(x) - L.value(x))


def energy_differential(L: Lagrangian, k: int, v) -> Callable[[np.ndarray], np.ndarray]:
    """x ↦ coefficients of dE_L with v held fixed: H(x) (J v) - ∇L(x)."""
    Jv = liouville_field(k, v)

    def coeffs(x):
        return L.hess(x) @ Jv - L.grad(x)

    return coeffs
