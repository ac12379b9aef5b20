import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cliffkahler.dynamics import (
    CONDITION_LIMIT,
    SemisprayField,
    derive_el_system,
    dynamics_residual,
    el_residual,
    solve_semispray,
)
from cliffkahler.errors import DegenerateLagrangian
from cliffkahler.expr import Const, Lagrangian, builtin_lagrangian, parse

from oracles import TABLES, dense_J, random_polynomial_text

ISO = builtin_lagrangian("isotropic", n=1)


def unit(a, dim=8):
    v = np.zeros(dim)
    v[a] = 1.0
    return v


def quadratic(Q):
    """L = ½ xᵀ Q x written out term by term."""
    dim = Q.shape[0]
    terms = [f"{float(0.5 * Q[a, b])!r}*x{a}*x{b}" for a in range(dim) for b in range(dim)]
    return Lagrangian.from_text(" + ".join(terms), dim // 8)


def random_spd(rng, dim=8):
    M = rng.normal(size=(dim, dim))
    return M @ M.T + dim * np.eye(dim)


class TestELSystem:
    @pytest.mark.parametrize("k", range(1, 7))
    def test_pairing_is_the_structure_table(self, k):
        system = derive_el_system(k)
        assert [(s, t) for t, s in system.pairing] == TABLES[k]

    def test_rendered_examples(self):
        assert derive_el_system(4).lines()[0] == "d/dt(dL/dx_i) + dL/dx_{4n+i} = 0"
        assert derive_el_system(5).lines()[5] == "d/dt(dL/dx_{5n+i}) - dL/dx_i = 0"
        assert derive_el_system(1).lines()[1] == "d/dt(dL/dx_{n+i}) - dL/dx_i = 0"
        assert derive_el_system(6).render().count("\n") == 8

    def test_coordinate_pairing(self):
        pairs = derive_el_system(4).coordinate_pairing(2)
        assert pairs[0] == (8, 1) and pairs[1] == (9, 1)
        assert pairs[8] == (0, -1)
        assert derive_el_system(4).expanded_lines(2)[3] == "d/dt(dL/dx3) - dL/dx5 = 0"

    def test_invalid_structure(self):
        with pytest.raises(ValueError):
            derive_el_system(7)


class TestSolve:
    @pytest.mark.parametrize("k", range(1, 7))
    def test_isotropic_velocity_is_Jx(self, k, rng):
        x = rng.normal(size=8)
        np.testing.assert_allclose(solve_semispray(ISO, k, x), dense_J(k) @ x, rtol=0, atol=1e-15)

    def test_example_e0(self):
        np.testing.assert_array_equal(solve_semispray(ISO, 4, unit(0)), unit(4))

    def test_equilibrium(self):
        np.testing.assert_array_equal(solve_semispray(ISO, 2, np.zeros(8)), 0)

    @pytest.mark.parametrize("text", ["3.5", "x0", "x0 + 2*x5 - 1"])
    def test_affine_lagrangians_are_degenerate(self, text):
        L = Lagrangian.from_text(text, 1)
        with pytest.raises(DegenerateLagrangian) as info:
            solve_semispray(L, 1, np.ones(8))
        assert info.value.condition == np.inf

    def test_rank_deficient_hessian(self):
        L = Lagrangian.from_text("0.5*(x0^2 + x1^2 + x2^2 + x3^2 + x4^2 + x5^2 + x6^2)", 1)
        with pytest.raises(DegenerateLagrangian):
            solve_semispray(L, 3, np.ones(8))

    def test_spd_oracle(self, rng):
        for k in range(1, 7):
            Q = random_spd(rng)
            x = rng.normal(size=8)
            expected = np.linalg.solve(Q, dense_J(k) @ Q @ x)
            np.testing.assert_allclose(solve_semispray(quadratic(Q), k, x), expected, rtol=1e-9)

    def test_scaling_invariance(self, rng):
        Q = random_spd(rng)
        x = rng.normal(size=8)
        for k in (1, 4, 6):
            v = solve_semispray(quadratic(Q), k, x)
            np.testing.assert_allclose(solve_semispray(quadratic(7.25 * Q), k, x), v, rtol=1e-12)

    def test_report(self):
        report = SemisprayField(ISO, 4).solve(unit(0))
        assert report.condition == pytest.approx(1.0)
        assert not report.near_degenerate

    def test_near_degenerate_by_absolute_size(self):
        L = Lagrangian.from_text("0.5*1e-13*(" + " + ".join(f"x{a}^2" for a in range(8)) + ")", 1)
        report = SemisprayField(L, 4).solve(unit(0))
        np.testing.assert_allclose(report.velocity, unit(4), rtol=1e-12)
        assert report.condition < CONDITION_LIMIT
        assert report.near_degenerate

    def test_ill_conditioned_is_degenerate(self):
        L = Lagrangian.from_text("0.5*(x0^2 + 1e-14*x1^2 + x2^2 + x3^2 + x4^2 + x5^2 + x6^2 + x7^2)", 1)
        with pytest.raises(DegenerateLagrangian, match="condition"):
            solve_semispray(L, 1, np.ones(8))

    def test_residual_contract_on_random_regular_lagrangians(self, rng):
        checked = 0
        for _ in range(40):
            text = random_polynomial_text(rng, max_degree=3) + " + " + " + ".join(f"x{a}^2" for a in range(8))
            L = Lagrangian.from_text(text, 1)
            x = rng.uniform(-0.3, 0.3, size=8)
            k = int(rng.integers(1, 7))
            try:
                v = solve_semispray(L, k, x)
            except DegenerateLagrangian:
                continue
            bound = 1e-9 * (1 + np.linalg.norm(L.grad(x)))
            assert np.linalg.norm(el_residual(L, k, x, v)) <= bound
            checked += 1
        assert checked >= 30


class TestResiduals:
    def test_el_residual_example(self):
        np.testing.assert_array_equal(el_residual(ISO, 4, unit(0), np.zeros(8)), -unit(4))

    def test_el_residual_equilibrium(self):
        np.testing.assert_array_equal(el_residual(ISO, 3, np.zeros(8), np.zeros(8)), 0)

    def test_el_residual_is_Hv_minus_J_grad(self, rng):
        L = Lagrangian.from_text(random_polynomial_text(rng), 1)
        x, v = rng.normal(size=8), rng.normal(size=8)
        for k in range(1, 7):
            expected = L.hess(x) @ v - dense_J(k) @ L.grad(x)
            np.testing.assert_allclose(el_residual(L, k, x, v), expected, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("k", range(1, 7))
    def test_dynamics_residual_isotropic(self, k, rng):
        x = rng.normal(size=8)
        assert dynamics_residual(ISO, k, x, solve_semispray(ISO, k, x)) <= 1e-9

    def test_dynamics_residual_trivial(self):
        assert dynamics_residual(ISO, 5, np.zeros(8), np.zeros(8)) == 0.0

    def test_dynamics_residual_random_cubic(self, rng):
        # measured rather than assumed: the unreduced identity holds to roundoff
        for k in range(1, 7):
            L = Lagrangian.from_text("x0^3 + 2*x3*x5^2 - x7*x1*x2 + " + " + ".join(f"x{a}^2" for a in range(8)), 1)
            x = rng.uniform(-0.2, 0.2, size=8)
            v = solve_semispray(L, k, x)
            assert dynamics_residual(L, k, x, v) <= 1e-9 * (1 + np.linalg.norm(L.grad(x)))

    def test_dynamics_residual_detects_wrong_velocity(self, rng):
        x = rng.normal(size=8)
        assert dynamics_residual(ISO, 4, x, dense_J(1) @ x) > 1e-3


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_isotropic_velocity_property(k, x):
    v = solve_semispray(ISO, k, x)
    np.testing.assert_allclose(v, dense_J(k) @ np.array(x), atol=1e-14)
    assert abs(v @ np.array(x)) <= 1e-12 * (1 + np.dot(x, x))
