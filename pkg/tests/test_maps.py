import math

import numpy as np
import pytest

from liejet.errors import ConvergenceError, DomainError, SingularJacobianError
from liejet.jet import JetContext, compose, extract_derivative, jet_var
from liejet.maps import DiffeoCurve, Domain, SmoothMap, VectorField, compose_maps


@pytest.fixture
def box10():
    return Domain([(-10.0, 10.0)])


@pytest.fixture
def exp_curve(box10):
    return DiffeoCurve.from_strings(["exp(t)*x1"], 1, box10, through_identity=True)


class TestDomain:
    def test_contains_guard_band(self):
        dom = Domain([(0.0, 1.0)])
        assert dom.contains(np.array([[0.5]]))[0]
        assert not dom.contains(np.array([[1.0]]))[0]
        assert not dom.contains(np.array([[np.nan]]))[0]

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            Domain([(1.0, 1.0)])

    def test_sample_inside(self):
        dom = Domain([(-1.0, 1.0), (0.0, 4.0)])
        pts = dom.sample(np.random.default_rng(0), 50)
        assert dom.contains(pts).all()


class TestEvaluate:
    def test_identity_at_zero(self, exp_curve):
        assert exp_curve.evaluate(0.0, np.array([3.0]))[0] == pytest.approx(3.0)

    def test_closed_form(self, exp_curve):
        assert exp_curve.evaluate(math.log(2.0), np.array([3.0]))[0] == pytest.approx(6.0)

    def test_domain_error(self, exp_curve):
        with pytest.raises(DomainError):
            exp_curve.evaluate(0.0, np.array([11.0]))

    def test_unknown_variable_rejected(self, box10):
        with pytest.raises(ValueError):
            SmoothMap.from_strings(["x1 + x2"], 1, box10)


class TestJets:
    def test_polynomial_readoff(self, box10):
        f = DiffeoCurve.from_strings(["x1 + t^2*x1^2"], 1, box10)
        jets = f.jet_at(0.0, np.array([1.0]), 2)
        assert extract_derivative(jets[0], (0, 2)) == pytest.approx(2.0)

    def test_exp_time_coefficient(self, exp_curve):
        jets = exp_curve.jet_at(0.0, np.array([0.7]), 1)
        assert jets[0].coeff((0, 1))[0] == pytest.approx(0.7)

    def test_sin_tx_symbolic(self, box10):
        f = SmoothMap.from_strings(["sin(t*x1)"], 1, box10, time_dependent=True)
        assert f.time_derivative(0.0, np.array([2.0]), 3)[0] == pytest.approx(-8.0)

    def test_spatial_jacobian_closed_form(self, exp_curve):
        J = exp_curve.spatial_jacobian(0.5, np.array([2.0]))
        assert J[0, 0] == pytest.approx(math.exp(0.5))

    def test_time_derivative_of_static_map(self, box10):
        f = DiffeoCurve.from_strings(["x1 + 0*t"], 1, box10)
        assert f.time_derivative(0.3, np.array([2.0]), 1)[0] == 0.0

    def test_cubic_time_readoff(self, box10):
        f = DiffeoCurve.from_strings(["x1 + t^3*x1^2"], 1, box10)
        assert f.time_derivative(0.0, np.array([2.0]), 3)[0] == pytest.approx(24.0)

    def test_identity_jacobian_through_identity(self, box10):
        f = DiffeoCurve.from_strings(
            ["x1 + t*(0.3*x1^2 - 0.1*sin(x1))"], 1, box10, through_identity=True
        )
        pts = np.linspace(-2, 2, 7)[:, None]
        J = f.spatial_jacobian(0.0, pts)
        assert np.max(np.abs(J - 1.0)) <= 1e-12
        assert f.identity_defect(pts) <= 1e-12


class TestInversion:
    def test_linear(self, box10):
        f = DiffeoCurve.from_strings(["2*x1 + 0*t"], 1, box10)
        assert f.invert_at(0.0, np.array([6.0]))[0] == pytest.approx(3.0)

    def test_against_bisection_oracle(self, box10):
        f = DiffeoCurve.from_strings(["x1 + 0.1*sin(x1)"], 1, box10)
        got = f.invert_at(0.0, np.array([1.0]))[0]

        # independent oracle: bisection on x + 0.1 sin x = 1
        lo, hi = 0.0, 2.0
        for _ in range(80):
            mid = (lo + hi) / 2
            if mid + 0.1 * math.sin(mid) < 1.0:
                lo = mid
            else:
                hi = mid
        assert got == pytest.approx((lo + hi) / 2, abs=1e-12)
        assert abs(got + 0.1 * math.sin(got) - 1.0) <= 1e-12

    def test_not_a_diffeo_near_zero(self):
        f = DiffeoCurve.from_strings(["x1^2 + 0*t"], 1, Domain([(-2.0, 2.0)]))
        with pytest.raises((SingularJacobianError, DomainError, ConvergenceError)):
            f.invert_at(0.0, np.array([0.0]), guess=np.array([0.0]))

    def test_batched_residuals(self, box10):
        f = DiffeoCurve.from_strings(["x1 + t*x1^2"], 1, box10)
        ys = np.array([[0.5], [0.8], [1.1]])
        xs = f.invert_at(0.1, ys)
        assert np.max(np.abs(f.evaluate(0.1, xs) - ys)) <= 1e-12


class TestInverseJets:
    def test_exp_curve_closed_form(self, exp_curve):
        psi = exp_curve.inverse_jet_at(0.0, np.array([2.0]), 2)
        assert psi[0].value()[0] == pytest.approx(2.0)
        assert extract_derivative(psi[0], (0, 1)) == pytest.approx(-2.0)

    def test_identity_curve(self, box10):
        f = DiffeoCurve.from_strings(["x1 + 0*t"], 1, box10)
        psi = f.inverse_jet_at(0.2, np.array([0.4]), 2)
        assert psi[0].value()[0] == pytest.approx(0.4)
        assert psi[0].coeff((1, 0))[0] == pytest.approx(1.0)
        assert extract_derivative(psi[0], (0, 1)) == pytest.approx(0.0)

    def test_implicit_function_oracle(self, box10):
        # y = psi + t psi^2 differentiated in t at (0, 1): psi_t = -1
        f = DiffeoCurve.from_strings(["x1 + t*x1^2"], 1, box10)
        psi = f.inverse_jet_at(0.0, np.array([1.0]), 2)
        assert extract_derivative(psi[0], (0, 1)) == pytest.approx(-1.0)

    def test_methods_agree(self, box10):
        f = DiffeoCurve.from_strings(["x1 + t*(0.2*x1^2 + 0.1*sin(x1))"], 1, box10)
        a = f.inverse_jet_at(0.1, np.array([0.7]), 3, method="newton")
        b = f.inverse_jet_at(0.1, np.array([0.7]), 3, method="poly")
        assert np.allclose(a[0].coeffs, b[0].coeffs, atol=1e-12)

    def test_inverse_composed_with_forward_is_identity(self):
        dom = Domain([(-3.0, 3.0), (-3.0, 3.0)])
        f = DiffeoCurve.from_strings(
            ["x1 + t*(0.2*x2^2 + 0.1*sin(x1))", "x2 - t*0.15*x1*x2"], 2, dom
        )
        rng = np.random.default_rng(4)
        y0 = rng.uniform(-0.8, 0.8, size=(6, 2))
        order = 3
        psi = f.inverse_jet_at(0.12, y0, order)
        ctx = psi[0].ctx
        x_star = np.stack([p.value() for p in psi], axis=1)
        fwd = f.jet_at(0.12, x_star, order, ctx=ctx)
        args = [psi[i] - x_star[:, i] for i in range(2)]
        args.append(jet_var(2, np.full(6, 0.12), ctx) - 0.12)
        comp = [compose(fwd[a], args) for a in range(2)]
        ident = [jet_var(i, y0[:, i], ctx) for i in range(2)]
        err = max(np.max(np.abs(comp[a].coeffs - ident[a].coeffs)) for a in range(2))
        assert err <= 1e-10


class TestTimeDerivativeAgainstFiniteDifferences:
    def test_richardson_agreement(self):
        rng = np.random.default_rng(17)
        dom = Domain([(-2.0, 2.0), (-2.0, 2.0)])
        f = SmoothMap.from_strings(
            ["x1 + t*(0.3*sin(x2) + 0.1*x1) + t^2*0.2*x2",
             "x2*exp(0.2*t) - t*0.1*x1^2"],
            2, dom, time_dependent=True,
        )
        for _ in range(10):
            t0 = float(rng.uniform(-0.2, 0.2))
            x = rng.uniform(-1.0, 1.0, size=(1, 2))
            exact = f.time_derivative(t0, x, 1)
            h = 1e-3
            d1 = (f.evaluate(t0 + h, x) - f.evaluate(t0 - h, x)) / (2 * h)
            d2 = (f.evaluate(t0 + h / 2, x) - f.evaluate(t0 - h / 2, x)) / h
            richardson = (4 * d2 - d1) / 3
            rel = np.max(np.abs(exact - richardson)) / max(np.max(np.abs(exact)), 1e-9)
            assert rel <= 1e-7


class TestCurveNaturalityProperty:
    def test_vanishing_lower_orders_push_through_diffeos(self):
        # curves with c^(j)(0) = 0 for j < k: order-k coefficient maps by the
        # Jacobian of a diffeomorphism
        rng = np.random.default_rng(23)
        dom = Domain([(-4.0, 4.0), (-4.0, 4.0)])
        psi = SmoothMap.from_strings(
            ["x1 + 0.3*sin(x2)", "x2 + 0.2*x1^2"], 2, dom
        )
        for k in (1, 2, 3):
            v = rng.uniform(-1, 1, size=2)
            path = SmoothMap.from_strings(
                [f"t^{k}*({float(v[0])!r})", f"t^{k}*({float(v[1])!r})"],
                0, dom, time_dependent=True,
            )
            ctx = JetContext.get(2, k)
            t_jet = jet_var(2, np.zeros(1), ctx)
            c_jets = path.eval_jet(t_jet, [])
            comp = psi.eval_jet(None, c_jets)
            kfac = math.factorial(k)
            chain = np.array([extract_derivative(c, (0, 0, k)) for c in comp])
            c0 = np.array([[c.value()[0] for c in c_jets]])
            J = psi.spatial_jacobian(None, c0)[0]
            want = J @ (kfac * v)
            rel = np.max(np.abs(chain - want)) / max(np.max(np.abs(want)), 1e-12)
            assert rel <= 1e-9


class TestComposeMaps:
    def test_expression_composition(self):
        dom = Domain([(-5.0, 5.0), (-5.0, 5.0)])
        inner = SmoothMap.from_strings(["x1 + t*x2", "x2"], 2, dom, time_dependent=True)
        outer = SmoothMap.from_strings(["x1^2", "x1 + x2"], 2, dom)
        comp = compose_maps(outer, inner)
        x = np.array([[1.0, 2.0]])
        got = comp.evaluate(0.5, x)
        assert got[0] == pytest.approx([4.0, 4.0])
