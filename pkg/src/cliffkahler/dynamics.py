"""Semispray solve for i_ξ Φ_L = dE_L and the Euler-Lagrange systems of J1..J6.

Writing the Euler-Lagrange equation of J_k as

    d/dt(∂L/∂x_a) + s(a) ∂L/∂x_{σ(a)} = 0,

with (σ, s) the signed permutation of J_k, and expanding the time derivative
along the flow gives the linear system H(x) v = J_k ∇L(x) for the velocity v.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import dgecon

from .calculus import _relocation, energy_differential, kaehler_form
from .errors import DegenerateLagrangian
from .expr import Lagrangian
from .structures import NBLOCKS, apply, block_symbol, builtin_structure, check_structure_id

# Hessians whose 1-norm condition estimate exceeds this are treated as singular.
CONDITION_LIMIT = 1e12
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SolveReport:
    velocity: np.ndarray
    condition: float
    inverse_norm: float

    @property
    def near_degenerate(self) -> bool:
        """True when either the relative or the absolute conditioning exceeds CONDITION_LIMIT.

        The absolute part (‖H⁻¹‖₁) catches uniformly tiny Hessians such as
        1e-13·Id, whose relative condition number is 1.
        """
        return self.condition > CONDITION_LIMIT or self.inverse_norm > CONDITION_LIMIT


def factor_hessian(H: np.ndarray):
    """LU-factor H and estimate its 1-norm condition number.

    Returns ``(lu_piv, condition, inverse_norm)``; ``lu_piv`` is None when H is
    exactly singular.
    """
    anorm = float(np.abs(H).sum(axis=0).max())
    if anorm == 0.0 or not np.isfinite(anorm):
        return None, np.inf, np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(H, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        return None, np.inf, np.inf
    rcond, _ = dgecon(lu, anorm, norm="1")
    if rcond <= 0.0:
        return None, np.inf, np.inf
    return (lu, piv), 1.0 / rcond, 1.0 / (rcond * anorm)


class SemisprayField:
    """The velocity field x ↦ v(x) solving H(x) v = J_k ∇L(x).

    Each call is independent; the conditioning of a solve is returned with it
    by :meth:`solve` rather than stored on the field.
    """

    def __init__(self, L: Lagrangian, k: int):
        self.L = L
        self.k = check_structure_id(k)
        self.J = builtin_structure(self.k)

    def solve(self, x) -> SolveReport:
        x = np.asarray(x, dtype=float)
        H = self.L.hess(x)
        factor, cond, inv_norm = factor_hessian(H)
        if factor is None or cond > CONDITION_LIMIT:
            raise DegenerateLagrangian(
                f"Hessian is singular at this state (condition estimate {cond:.3e} > {CONDITION_LIMIT:.0e}); "
                "the Lagrangian is not regular here",
                condition=cond,
            )
        rhs = apply(self.J, self.L.grad(x))
        v = lu_solve(factor, rhs, check_finite=False)
        return SolveReport(v, cond, inv_norm)

    def __call__(self, x) -> np.ndarray:
        return self.solve(x).velocity


def solve_semispray(L: Lagrangian, k: int, x) -> np.ndarray:
    return SemisprayField(L, k)(x)


def el_residual(L: Lagrangian, k: int, x, v) -> np.ndarray:
    """residual_a = Σ_b H_ab v_b + s(a) ∂L/∂x_{σ(a)}."""
    sigma, s = _relocation(builtin_structure(k), L.n)
    return L.hess(x) @ np.asarray(v, dtype=float) + s * L.grad(x)[sigma]


def dynamics_residual(L: Lagrangian, k: int, x, v) -> float:
    """‖i_ξ Φ_L - dE_L‖ at (x, ξ = v), assembled from the unreduced operators."""
    lhs = kaehler_form(L, k).contract(x, v)
    rhs = energy_differential(L, k, v)(x)
    return float(np.linalg.norm(lhs - rhs))


@dataclass(frozen=True)
class ELSystem:
    """Block-level pairing of the Euler-Lagrange equations for J_k."""

    k: int
    pairing: tuple[tuple[int, int], ...]  # block b -> (σ(b), s(b))

    def coordinate_pairing(self, n: int) -> list[tuple[int, int]]:
        """(σ(a), s(a)) for each of the 8n coordinates."""
        return [
            (self.pairing[b][0] * n + i, self.pairing[b][1])
            for b in range(NBLOCKS)
            for i in range(n)
        ]

    def lines(self) -> list[str]:
        out = []
        for b, (t, s) in enumerate(self.pairing):
            op = "+" if s > 0 else "-"
            out.append(f"d/dt(dL/dx{_subscript(b)}) {op} dL/dx{_subscript(t)} = 0")
        return out

    def expanded_lines(self, n: int) -> list[str]:
        out = []
        for a, (t, s) in enumerate(self.coordinate_pairing(n)):
            op = "+" if s > 0 else "-"
            out.append(f"d/dt(dL/dx{a}) {op} dL/dx{t} = 0")
        return out

    def render(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _subscript(block: int) -> str:
    sym = block_symbol(block)
    return "_i" if block == 0 else f"_{{{sym}}}"


def derive_el_system(k: int) -> ELSystem:
    J = builtin_structure(k)
    return ELSystem(check_structure_id(k), tuple(zip(J.target, J.sign)))
