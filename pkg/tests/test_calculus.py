import json
from pathlib import Path

import numpy as np
import pytest

from cliffkahler.calculus import (
    TwoFormField,
    energy,
    energy_differential,
    kaehler_form,
    liouville_field,
    vertical_derivation,
    vertical_differential,
)
from cliffkahler.expr import Const, Lagrangian, Var, builtin_lagrangian, parse
from cliffkahler.structures import builtin_structure

from oracles import TABLES, dense_J, fd_gradient, fd_jacobian, random_polynomial_text

GOLDEN = Path(__file__).parent / "golden"


def unit(a, dim=8):
    v = np.zeros(dim)
    v[a] = 1.0
    return v


def random_lagrangian(rng, n=1):
    return Lagrangian.from_text(random_polynomial_text(rng, nvars=8 * n), n)


class TestVerticalDifferential:
    def test_single_coordinate(self):
        # L = x4 under J4: J4 sends block 0 to +block 4, so dx0 gets +1
        form = vertical_differential(Lagrangian(Var(4), 1), 4)
        np.testing.assert_array_equal(form.evaluate(np.zeros(8)), unit(0))

    def test_isotropic(self):
        L = builtin_lagrangian("isotropic", n=1)
        x = np.arange(8.0)
        for k in range(1, 7):
            np.testing.assert_array_equal(vertical_differential(L, k).evaluate(x), dense_J(k).T @ x)

    @pytest.mark.parametrize("k", range(1, 7))
    def test_is_transpose_J_gradient(self, k, rng):
        for n in (1, 2):
            L = random_lagrangian(rng, n)
            x = rng.uniform(-1, 1, size=8 * n)
            grad = fd_gradient(L.value, x)
            np.testing.assert_allclose(
                vertical_differential(L, k).evaluate(x), dense_J(k, n).T @ grad, rtol=1e-6, atol=1e-9
            )

    def test_constant_has_zero_form(self):
        form = vertical_differential(Lagrangian(Const(3.0), 1), 2)
        np.testing.assert_array_equal(form.evaluate(np.ones(8)), 0)


class TestVerticalDerivation:
    def test_one_form(self, rng):
        w = rng.normal(size=16)
        for k in range(1, 7):
            np.testing.assert_array_equal(vertical_derivation(builtin_structure(k), w), dense_J(k, 2).T @ w)

    def test_two_form(self, rng):
        B = rng.normal(size=(8, 8))
        A = B - B.T
        X, Y = rng.normal(size=8), rng.normal(size=8)
        for k in range(1, 7):
            J = dense_J(k)
            out = vertical_derivation(builtin_structure(k), A)
            assert X @ out @ Y == pytest.approx((J @ X) @ A @ Y + X @ A @ (J @ Y), rel=1e-12)

    def test_rejects_higher_rank(self):
        with pytest.raises(ValueError):
            vertical_derivation(builtin_structure(1), np.zeros((8, 8, 8)))


class TestKaehlerForm:
    @pytest.mark.parametrize("k", range(1, 7))
    def test_isotropic_is_constant_multiple_of_J(self, k):
        A = kaehler_form(builtin_lagrangian("isotropic", n=1), k)(np.ones(8))
        np.testing.assert_array_equal(A, -2 * dense_J(k))

    @pytest.mark.parametrize("k", range(1, 7))
    def test_matches_hessian_formula(self, k, rng):
        for n in (1, 2):
            L = random_lagrangian(rng, n)
            x = rng.uniform(-1, 1, size=8 * n)
            H, J = L.hess(x), dense_J(k, n)
            A = kaehler_form(L, k)(x)
            assert np.max(np.abs(A + A.T)) <= 1e-12
            np.testing.assert_allclose(A, -(H @ J + J @ H), rtol=1e-12, atol=1e-12)

    def test_exterior_derivative_of_vertical_differential(self, rng):
        # -d(d_J L) assembled from finite differences of the 1-form coefficients
        L = random_lagrangian(rng)
        x = rng.uniform(-1, 1, size=8)
        for k in range(1, 7):
            c = vertical_differential(L, k)
            D = fd_jacobian(c.evaluate, x)  # D[a, j] = d c_a / d x_j
            expected = -(D.T - D)
            np.testing.assert_allclose(kaehler_form(L, k)(x), expected, rtol=1e-6, atol=1e-8)

    def test_block_expansion_for_J4(self, rng):
        data = json.loads((GOLDEN / "phi_j4_display.json").read_text())
        terms = {(p, r): (q, s) for p, r, q, s in data["terms"]}
        fixed = {tuple(d["term"]): d["systematic_q"] for d in data["divergences"]}
        # the displayed expansion repeats one column pattern in every row
        # except at the recorded slips
        pattern = {r: terms[0, r] for r in range(8)}
        slips = {key for key, (q, s) in terms.items() if (q, s) != pattern[key[1]]}
        assert slips == set(fixed)
        assert all(pattern[r][0] == fixed[p, r] for p, r in fixed)
        # column r pairs with the image of block r under J4, sign flipped
        assert [pattern[r] for r in range(8)] == [(t, -s) for s, t in TABLES[4]]

        n = 2
        L = random_lagrangian(rng, n)
        x = rng.uniform(-1, 1, size=8 * n)
        H = L.hess(x)
        B = np.zeros((8 * n, 8 * n))
        for p in range(8):
            for r in range(8):
                q, s = pattern[r]
                for j in range(n):
                    for i in range(n):
                        B[p * n + j, r * n + i] = s * H[p * n + j, q * n + i]
        np.testing.assert_allclose(kaehler_form(L, 4)(x), B - B.T, rtol=1e-12, atol=1e-12)

    def test_contract_fills_first_slot(self, rng):
        L = random_lagrangian(rng)
        x, xi, Y = (rng.uniform(-1, 1, size=8) for _ in range(3))
        phi = kaehler_form(L, 3)
        assert phi.contract(x, xi) @ Y == pytest.approx(phi.pair(x, xi, Y), rel=1e-12)

    def test_antisymmetry_guard(self):
        broken = TwoFormField(lambda x: np.eye(8), 8)
        with pytest.raises(ArithmeticError, match="antisymmetry"):
            broken(np.zeros(8))


class TestLiouvilleAndEnergy:
    def test_liouville_examples(self):
        np.testing.assert_array_equal(liouville_field(4, unit(0)), unit(4))
        np.testing.assert_array_equal(liouville_field(5, unit(1)), -unit(3))

    def test_energy_examples(self):
        L = builtin_lagrangian("isotropic", n=1)
        x = unit(0) + 2 * unit(4)
        # v = J4 x = -2 e0 + e4, J4 v = -x, E = -|x|^2 - |x|^2 / 2
        v = dense_J(4) @ x
        assert energy(L, 4, x, v) == pytest.approx(-7.5)
        assert energy(L, 1, unit(0), unit(1)) == pytest.approx(-1.5)
        assert energy(L, 4, unit(0), unit(4)) == -1.5
        assert energy(L, 6, np.zeros(8), np.arange(8.0)) == 0.0
        c = Lagrangian(Const(2.5), 1)
        assert energy(c, 3, np.ones(8), np.ones(8)) == -2.5

    def test_isotropic_energy_differential(self, rng):
        L = builtin_lagrangian("isotropic", n=1)
        x, v = rng.normal(size=8), rng.normal(size=8)
        for k in range(1, 7):
            np.testing.assert_allclose(energy_differential(L, k, v)(x), dense_J(k) @ v - x, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("k", range(1, 7))
    def test_energy_differential_matches_finite_differences(self, k, rng):
        L = random_lagrangian(rng)
        x, v = rng.uniform(-1, 1, size=8), rng.uniform(-1, 1, size=8)
        fd = fd_gradient(lambda y: energy(L, k, y, v), x)
        np.testing.assert_allclose(energy_differential(L, k, v)(x), fd, rtol=1e-6, atol=1e-9)
