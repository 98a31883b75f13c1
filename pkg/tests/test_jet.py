import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liejet import _kernels
from liejet.errors import ContextMismatchError, JetDomainError
from liejet.jet import (
    Jet,
    JetContext,
    compose,
    extract_derivative,
    jet_const,
    jet_div,
    jet_elem,
    jet_mul,
    jet_var,
)

from polyoracle import (
    poly_add,
    poly_const,
    poly_derivative_at_zero,
    poly_mul,
    poly_var,
)


def coeffs_of(jet, *alphas):
    return [float(jet.coeff(a)[0]) for a in alphas]


class TestConstructors:
    def test_const(self):
        ctx = JetContext.get(1, 2)
        j = jet_const(3.0, ctx)
        assert j.value()[0] == 3.0
        assert np.count_nonzero(j.coeffs) == 1

    def test_var(self):
        ctx = JetContext.get(1, 2)
        j = jet_var(0, 0.5, ctx)
        assert coeffs_of(j, (0, 0), (1, 0), (0, 1)) == [0.5, 1.0, 0.0]

    def test_time_var(self):
        ctx = JetContext.get(1, 1)
        j = jet_var(1, 0.0, ctx)
        assert coeffs_of(j, (0, 0), (0, 1)) == [0.0, 1.0]

    def test_var_index_out_of_range(self):
        ctx = JetContext.get(2, 2)
        with pytest.raises(JetDomainError):
            jet_var(3, 0.0, ctx)


class TestArithmetic:
    def test_binomial_square(self):
        ctx = JetContext.get(1, 2)
        x = jet_var(0, 0.0, ctx)
        p = (1 + x) * (1 + x)
        assert coeffs_of(p, (0, 0), (1, 0), (2, 0)) == [1.0, 2.0, 1.0]

    def test_truncation_at_order_one(self):
        ctx = JetContext.get(1, 1)
        x = jet_var(0, 0.0, ctx)
        p = (1 + x) * (1 + x)
        assert coeffs_of(p, (0, 0), (1, 0)) == [1.0, 2.0]

    def test_geometric_series(self):
        # oracle: symbolic expansion of 1/(1-x) = 1 + x + x^2 + x^3
        ctx = JetContext.get(1, 3)
        x = jet_var(0, 0.0, ctx)
        g = 1 / (1 - x)
        assert coeffs_of(g, (0, 0), (1, 0), (2, 0), (3, 0)) == pytest.approx(
            [1.0, 1.0, 1.0, 1.0], rel=1e-12
        )

    def test_context_mismatch(self):
        a = jet_var(0, 0.0, JetContext.get(1, 2))
        b = jet_var(0, 0.0, JetContext.get(1, 3))
        with pytest.raises(ContextMismatchError):
            jet_mul(a, b)

    def test_division_by_zero_value(self):
        ctx = JetContext.get(1, 2)
        x = jet_var(0, 0.0, ctx)
        with pytest.raises(ZeroDivisionError):
            jet_div(jet_const(1.0, ctx), x)

    def test_batched_division_poisons(self):
        ctx = JetContext.get(1, 2)
        x = jet_var(0, np.array([1.0, 0.0]), ctx)
        out = jet_div(jet_const(np.array([1.0, 1.0]), ctx), x)
        assert out.value()[0] == 1.0
        assert np.isnan(out.value()[1])

    @given(
        a=st.integers(-40, 40),
        b=st.integers(-40, 40),
        c=st.integers(-40, 40),
    )
    @settings(max_examples=60, deadline=None)
    def test_ring_laws_exact_on_dyadics(self, a, b, c):
        # coefficients picked from small integers over 8: products and sums
        # stay exactly representable, so the laws hold with zero tolerance
        ctx = JetContext.get(2, 3)
        x = jet_var(0, a / 8, ctx)
        y = jet_var(1, b / 8, ctx)
        z = jet_var(2, c / 8, ctx)
        assert np.array_equal((x + y).coeffs, (y + x).coeffs)
        assert np.array_equal((x * y).coeffs, (y * x).coeffs)
        assert np.array_equal(((x + y) + z).coeffs, (x + (y + z)).coeffs)
        assert np.array_equal((x * (y + z)).coeffs, (x * y + x * z).coeffs)

    def test_mul_associativity_truncated(self):
        rng = np.random.default_rng(3)
        ctx = JetContext.get(2, 4)
        jets = []
        for _ in range(3):
            j = jet_const(0.0, ctx)
            j.coeffs[:] = rng.uniform(-1, 1, size=j.coeffs.shape)
            jets.append(j)
        a, b, c = jets
        lhs = (a * b) * c
        rhs = a * (b * c)
        assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-13)


class TestAgainstPolynomialOracle:
    @pytest.mark.parametrize("m,order", [(1, 2), (2, 3), (3, 4), (2, 6)])
    def test_random_polynomials(self, m, order):
        rng = np.random.default_rng(100 * m + order)
        ctx = JetContext.get(m, order)
        n = ctx.n_vars
        for _ in range(25):
            jet = jet_const(rng.uniform(-1, 1), ctx)
            poly = poly_const(float(jet.value()[0]), n)
            # random sequence of adds and truncated multiplies by linear factors
            for _ in range(rng.integers(2, 6)):
                v = int(rng.integers(0, n))
                c = float(rng.uniform(-1, 1))
                lin_jet = jet_var(v, 0.0, ctx) * c
                lin_poly = poly_scale_var(v, c, n)
                if rng.integers(0, 2):
                    jet = jet + lin_jet
                    poly = poly_add(poly, lin_poly)
                else:
                    jet = jet * lin_jet
                    poly = poly_mul(poly, lin_poly, max_degree=order)
            for alpha in ctx.indices:
                want = poly_derivative_at_zero(poly, alpha)
                got = extract_derivative(jet, alpha)
                assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_x_squared_second_derivative(self):
        ctx = JetContext.get(1, 2)
        x = jet_var(0, 0.0, ctx)
        assert extract_derivative(x * x, (2, 0)) == pytest.approx(2.0)

    def test_exp_t_times_x(self):
        ctx = JetContext.get(1, 1)
        x = jet_var(0, 3.0, ctx)
        t = jet_var(1, 0.0, ctx)
        j = jet_elem("exp", t) * x
        assert extract_derivative(j, (0, 1)) == pytest.approx(3.0)

    def test_sin_tx_third_time_derivative(self):
        # symbolic oracle: sin(tx) = tx - (tx)^3/6 + ..., so d^3/dt^3 = -x^3
        ctx = JetContext.get(1, 3)
        x = jet_var(0, 2.0, ctx)
        t = jet_var(1, 0.0, ctx)
        j = jet_elem("sin", x * t)
        assert extract_derivative(j, (0, 3)) == pytest.approx(-8.0, rel=1e-12)

    def test_order_exceeds_truncation(self):
        ctx = JetContext.get(1, 2)
        with pytest.raises(JetDomainError):
            extract_derivative(jet_var(0, 0.0, ctx), (3, 0))


def poly_scale_var(v, c, n):
    return {tuple(1 if j == v else 0 for j in range(n)): c}


class TestElementary:
    def test_exp_series(self):
        ctx = JetContext.get(1, 3)
        e = jet_elem("exp", jet_var(0, 0.0, ctx))
        assert coeffs_of(e, (0, 0), (1, 0), (2, 0), (3, 0)) == pytest.approx(
            [1.0, 1.0, 0.5, 1 / 6]
        )

    def test_sin_series(self):
        ctx = JetContext.get(1, 3)
        s = jet_elem("sin", jet_var(1, 0.0, ctx))
        assert coeffs_of(s, (0, 0), (0, 1), (0, 2), (0, 3)) == pytest.approx(
            [0.0, 1.0, 0.0, -1 / 6]
        )

    def test_binomial_half_power(self):
        # binomial-series oracle: (1+x)^0.5 = 1 + x/2 - x^2/8
        ctx = JetContext.get(1, 2)
        x = jet_var(0, 0.0, ctx)
        h = jet_elem("pow", 1 + x, exponent=0.5)
        assert coeffs_of(h, (0, 0), (1, 0), (2, 0)) == pytest.approx([1.0, 0.5, -0.125])

    def test_integer_power_allows_negative_base(self):
        ctx = JetContext.get(1, 2)
        x = jet_var(0, -2.0, ctx)
        p = x**3
        assert p.value()[0] == pytest.approx(-8.0)
        assert extract_derivative(p, (1, 0)) == pytest.approx(12.0)

    def test_log_domain(self):
        ctx = JetContext.get(1, 2)
        with pytest.raises(JetDomainError):
            jet_elem("log", jet_var(0, -1.0, ctx))

    def test_abs_at_zero(self):
        ctx = JetContext.get(1, 2)
        with pytest.raises(JetDomainError):
            jet_elem("abs", jet_var(0, 0.0, ctx))

    def test_abs_is_signed_copy(self):
        ctx = JetContext.get(1, 2)
        x = jet_var(0, -0.5, ctx)
        assert np.allclose(jet_elem("abs", x).coeffs, (-x).coeffs)

    @pytest.mark.parametrize("value", [0.3, 1.7, 4.0])
    def test_exp_log_roundtrip(self, value):
        ctx = JetContext.get(2, 4)
        rng = np.random.default_rng(int(value * 10))
        a = jet_const(value, ctx)
        a.coeffs[:, 1:] = rng.uniform(-0.5, 0.5, size=ctx.n_terms - 1)
        back = jet_elem("exp", jet_elem("log", a))
        assert np.allclose(back.coeffs, a.coeffs, rtol=1e-10, atol=1e-10)

    def test_div_mul_roundtrip(self):
        rng = np.random.default_rng(11)
        ctx = JetContext.get(2, 4)
        for _ in range(20):
            a = jet_const(rng.uniform(-2, 2), ctx)
            a.coeffs[:] = rng.uniform(-1, 1, size=a.coeffs.shape)
            b = jet_const(0.0, ctx)
            b.coeffs[:] = rng.uniform(-1, 1, size=b.coeffs.shape)
            b.coeffs[:, 0] = rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0])
            back = jet_div(jet_mul(a, b), b)
            assert np.allclose(back.coeffs, a.coeffs, rtol=1e-12, atol=1e-12)


class TestCalculusOps:
    def test_derivative_shift(self):
        ctx = JetContext.get(1, 3)
        x = jet_var(0, 0.0, ctx)
        p = x * x * x  # x^3 -> derivative 3x^2
        d = p.derivative(0)
        assert extract_derivative(d, (2, 0)) == pytest.approx(6.0)

    def test_t_block(self):
        ctx = JetContext.get(1, 3)
        x = jet_var(0, 2.0, ctx)
        t = jet_var(1, 0.0, ctx)
        j = x * x * t * t  # x^2 t^2
        blk = j.t_block(2)  # spatial jet of x^2
        assert blk.value()[0] == pytest.approx(4.0)
        assert extract_derivative(blk, (1, 0)) == pytest.approx(4.0)
        assert float(blk.coeff((0, 1))[0]) == 0.0

    def test_convert_roundtrip(self):
        ctx3 = JetContext.get(2, 3)
        ctx2 = JetContext.get(2, 2)
        rng = np.random.default_rng(8)
        j = jet_const(1.0, ctx3)
        j.coeffs[:] = rng.uniform(-1, 1, size=j.coeffs.shape)
        down = j.convert(ctx2)
        for alpha in ctx2.indices:
            assert down.coeff(alpha)[0] == j.coeff(alpha)[0]

    def test_compose_exact(self):
        # compose x^2 + t with arguments (u^2, u t): exact truncated result
        ctx = JetContext.get(1, 4)
        x = jet_var(0, 0.0, ctx)
        t = jet_var(1, 0.0, ctx)
        poly = x * x + t
        args = [x * x, x * t]
        direct = (x * x) * (x * x) + x * t
        composed = compose(poly, args)
        assert np.allclose(composed.coeffs, direct.coeffs, atol=1e-14)


class TestKernelBackends:
    def test_backends_agree(self):
        rng = np.random.default_rng(21)
        ctx = JetContext.get(3, 4)
        a = jet_const(0.0, ctx, batch=7)
        b = jet_const(0.0, ctx, batch=7)
        a.coeffs[:] = rng.uniform(-1, 1, size=a.coeffs.shape)
        b.coeffs[:] = rng.uniform(-1, 1, size=b.coeffs.shape)
        start = _kernels.current_backend()
        try:
            _kernels.select_backend("numpy")
            got_np = (a * b).coeffs
            try:
                _kernels.select_backend("numba")
            except RuntimeError:
                pytest.skip("numba unavailable")
            got_nb = (a * b).coeffs
        finally:
            _kernels.select_backend(start)
        assert np.allclose(got_np, got_nb, rtol=1e-14, atol=1e-15)
