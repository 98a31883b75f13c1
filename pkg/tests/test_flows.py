import math

import numpy as np
import pytest

from liejet.errors import ConvergenceError, DomainError
from liejet.flows import FlowCurve, flow, flow_curve
from liejet.jet import extract_derivative
from liejet.maps import Domain, VectorField


@pytest.fixture
def linear_field():
    return VectorField.from_strings(["x1"], 1, Domain([(-10.0, 10.0)]))


class TestFlow:
    def test_exponential(self, linear_field):
        res = flow(linear_field, 0.0, 1.0, np.array([1.0]), tol=1e-10)
        assert res.endpoint[0] == pytest.approx(math.e, abs=2e-10)
        assert res.est_error <= 1e-10

    def test_constant_field_exact(self):
        field = VectorField.from_strings(["2.5"], 1, Domain([(-10.0, 10.0)]))
        res = flow(field, 0.0, 0.4, np.array([0.0]))
        assert res.endpoint[0] == 1.0  # RK4 integrates constants exactly

    def test_blowup_leaves_domain(self):
        field = VectorField.from_strings(["x1^2"], 1, Domain([(-10.0, 10.0)]))
        with pytest.raises((DomainError, ConvergenceError)):
            flow(field, 0.0, 1.0, np.array([1.0]))

    def test_group_law(self, linear_field):
        tol = 1e-10
        x = np.array([0.7])
        for s, t in [(0.3, 0.45), (0.2, -0.1), (-0.25, -0.3)]:
            ab = flow(linear_field, 0.0, s + t, x, tol=tol).endpoint
            b = flow(linear_field, 0.0, t, x, tol=tol).endpoint
            a_of_b = flow(linear_field, 0.0, s, b, tol=tol).endpoint
            assert abs(ab[0] - a_of_b[0]) <= 2 * tol

    def test_time_dependent_field(self):
        field = VectorField.from_strings(["t*x1"], 1, Domain([(-10.0, 10.0)]),
                                         time_dependent=True)
        res = flow(field, 0.0, 1.0, np.array([1.0]), tol=1e-11)
        assert res.endpoint[0] == pytest.approx(math.exp(0.5), abs=1e-9)

    def test_backward_integration(self, linear_field):
        res = flow(linear_field, 0.5, 0.0, np.array([2.0]), tol=1e-11)
        assert res.endpoint[0] == pytest.approx(2.0 * math.exp(-0.5), abs=1e-9)

    def test_convergence_order_at_least_3_7(self, linear_field):
        errs = []
        steps = [0.1, 0.05, 0.025]
        for h in steps:
            res = flow(linear_field, 0.0, 1.0, np.array([1.0]), fixed_step=h)
            errs.append(abs(res.endpoint[0] - math.e))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert min(orders) >= 3.7


class TestFlowCurve:
    def test_first_time_jet_equals_field_exactly(self):
        # the Taylor recurrence reads the field itself at order 1
        dom = Domain([(-5.0, 5.0), (-5.0, 5.0)])
        field = VectorField.from_strings(["0.3*x2 + 0.1*sin(x1)", "(-0.2)*x1"], 2, dom)
        fc = flow_curve(field)
        x = np.array([[0.4, -0.6], [0.1, 0.9]])
        jets = fc.jet_at(0.0, x, 1)
        dt = np.stack([extract_derivative(j, (0, 0, 1)) for j in jets], axis=1)
        assert np.array_equal(dt, field.evaluate(None, x))

    def test_exponential_jets(self, linear_field):
        fc = flow_curve(linear_field)
        jets = fc.jet_at(0.2, np.array([2.0]), 2)
        e = math.exp(0.2)
        assert jets[0].value()[0] == pytest.approx(2 * e, abs=1e-10)
        assert extract_derivative(jets[0], (0, 1)) == pytest.approx(2 * e, abs=1e-10)
        assert extract_derivative(jets[0], (1, 0)) == pytest.approx(e, abs=1e-10)
        assert extract_derivative(jets[0], (0, 2)) == pytest.approx(2 * e, abs=1e-10)

    def test_zero_field_is_identity_curve(self):
        field = VectorField.from_strings(["0"], 1, Domain([(-10.0, 10.0)]))
        fc = flow_curve(field)
        jets = fc.jet_at(0.1, np.array([1.5]), 2)
        assert jets[0].value()[0] == 1.5
        assert jets[0].coeff((1, 0))[0] == 1.0
        assert extract_derivative(jets[0], (0, 1)) == 0.0

    def test_translation_second_derivative_vanishes(self):
        field = VectorField.from_strings(["1"], 1, Domain([(-10.0, 10.0)]))
        jets = flow_curve(field).jet_at(0.0, np.array([1.0]), 2)
        assert extract_derivative(jets[0], (0, 1)) == pytest.approx(1.0)
        assert extract_derivative(jets[0], (0, 2)) == pytest.approx(0.0, abs=1e-12)

    def test_inverse_by_backward_flow(self, linear_field):
        fc = flow_curve(linear_field)
        got = fc.invert_at(0.3, np.array([2.0]))
        assert got[0] == pytest.approx(2.0 * math.exp(-0.3), abs=1e-10)

    def test_inverse_jets(self, linear_field):
        fc = flow_curve(linear_field)
        psi = fc.inverse_jet_at(0.0, np.array([2.0]), 2)
        assert extract_derivative(psi[0], (0, 1)) == pytest.approx(-2.0, abs=1e-9)
