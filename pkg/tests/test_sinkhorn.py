import numpy as np
import pytest

from ewca import (
    ConfigError,
    CostMatrix,
    DataMatrix,
    DimensionError,
    NonConvergenceWarning,
    NumericalUnderflowError,
    StiefelBasis,
    entropic_ot_value,
    projection_cost,
    sinkhorn_knopp,
    squared_l2_cost,
    uniform_histogram,
    validate_transport_plan,
)

from conftest import rng_for


def closed_form_2x2(epsilon):
    """Scaling solution for cost [[0,1],[1,0]] with uniform marginals: by
    symmetry u = v = c 1 and the plan is c^2 [[1, kappa], [kappa, 1]] with
    kappa = exp(-1/eps); row sums force c^2 = 1 / (2 (1 + kappa))."""
    kappa = np.exp(-1.0 / epsilon)
    q = 1.0 / (2.0 * (1.0 + kappa))
    r = kappa / (2.0 * (1.0 + kappa))
    return np.array([[q, r], [r, q]])


class TestSquaredL2Cost:
    def test_single_identical_point(self):
        x = DataMatrix(np.array([[1.0], [2.0]]))
        np.testing.assert_allclose(squared_l2_cost(x, x).values, [[0.0]])

    def test_3_4_5_triangle(self):
        x = DataMatrix(np.array([[0.0], [0.0]]))
        y = DataMatrix(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(squared_l2_cost(x, y).values, [[25.0]])

    def test_two_unit_points(self):
        # ||e1 - e1||^2 = 0, ||e1 - e2||^2 = 2
        x = DataMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_allclose(squared_l2_cost(x, x).values, [[0.0, 2.0], [2.0, 0.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            squared_l2_cost(DataMatrix(np.ones((2, 1))), DataMatrix(np.ones((3, 1))))

    def test_no_negative_entries_on_cancellation(self):
        rng = rng_for(7)
        base = rng.standard_normal((4, 1))
        x = DataMatrix(np.hstack([base, base + 1e-9]))
        assert squared_l2_cost(x, x).values.min() >= 0.0


class TestProjectionCost:
    def test_hand_projection(self):
        # x_1 = (1,0), x_2 = (0,0), U = e1: projections are (1,0) and (0,0),
        # so C_ij = ||x_i - P x_j||^2 gives [[0,1],[1,0]]
        basis = StiefelBasis(np.array([[1.0], [0.0]]))
        data = DataMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
        np.testing.assert_allclose(
            projection_cost(data, basis).values, [[0.0, 1.0], [1.0, 0.0]], atol=1e-15
        )

    def test_zero_data(self):
        basis = StiefelBasis(np.array([[1.0], [0.0], [0.0]]))
        data = DataMatrix(np.zeros((3, 4)))
        assert np.all(projection_cost(data, basis).values == 0.0)

    def test_data_inside_span_matches_plain_cost(self, rng):
        basis = StiefelBasis(np.linalg.qr(rng.standard_normal((5, 2)))[0])
        coeffs = rng.standard_normal((2, 6))
        data = DataMatrix(basis.values @ coeffs)
        np.testing.assert_allclose(
            projection_cost(data, basis).values,
            squared_l2_cost(data, data).values,
            atol=1e-10,
        )

    def test_matches_dense_projector(self, rng):
        data = DataMatrix(rng.standard_normal((6, 5)))
        basis = StiefelBasis(np.linalg.qr(rng.standard_normal((6, 2)))[0])
        proj = basis.values @ basis.values.T
        expected = np.empty((5, 5))
        for i in range(5):
            for j in range(5):
                diff = data.values[:, i] - proj @ data.values[:, j]
                expected[i, j] = diff @ diff
        np.testing.assert_allclose(projection_cost(data, basis).values, expected, atol=1e-12)


class TestSinkhornKnopp:
    def test_constant_cost_gives_product_plan(self):
        cost = CostMatrix(np.full((2, 2), 3.7))
        u = uniform_histogram(2)
        plan, state = sinkhorn_knopp(cost, u, u, epsilon=1.0)
        np.testing.assert_allclose(plan.values, 0.25, atol=1e-12)
        assert state.converged

    def test_single_point(self):
        one = uniform_histogram(1)
        plan, _ = sinkhorn_knopp(CostMatrix(np.array([[2.0]])), one, one, epsilon=0.5)
        np.testing.assert_allclose(plan.values, [[1.0]], atol=1e-15)

    @pytest.mark.parametrize("log_domain", [False, True])
    def test_2x2_closed_form(self, log_domain):
        cost = CostMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        u = uniform_histogram(2)
        plan, _ = sinkhorn_knopp(
            cost, u, u, epsilon=0.1, tol=1e-13, log_domain=log_domain
        )
        assert np.abs(plan.values - closed_form_2x2(0.1)).max() <= 1e-12

    def test_converged_plans_meet_tolerance(self, rng):
        data = DataMatrix(rng.standard_normal((4, 9)))
        cost = squared_l2_cost(data, data)
        u = uniform_histogram(9)
        plan, state = sinkhorn_knopp(cost, u, u, epsilon=2.0, tol=1e-9)
        assert state.converged
        assert plan.marginal_error() <= 1e-9
        validate_transport_plan(plan, tol=1e-9)

    def test_symmetric_cost_gives_symmetric_plan(self, rng):
        points = DataMatrix(rng.standard_normal((3, 7)))
        cost = squared_l2_cost(points, points)
        u = uniform_histogram(7)
        tol = 1e-10
        plan, _ = sinkhorn_knopp(cost, u, u, epsilon=1.0, tol=tol)
        assert np.abs(plan.values - plan.values.T).max() <= 10 * tol

    def test_marginal_error_trace_non_increasing(self, rng):
        data = DataMatrix(rng.standard_normal((3, 8)))
        cost = squared_l2_cost(data, data)
        u = uniform_histogram(8)
        _, state = sinkhorn_knopp(cost, u, u, epsilon=1.0, tol=1e-12)
        trace = state.error_trace
        assert np.all(trace[1:] <= trace[:-1] * (1 + 1e-9) + 1e-15)

    def test_modes_agree_on_well_conditioned_problem(self, rng):
        data = DataMatrix(rng.standard_normal((4, 6)))
        cost = squared_l2_cost(data, data)
        epsilon = float(np.median(cost.values))
        u = uniform_histogram(6)
        plan_std, state_std = sinkhorn_knopp(cost, u, u, epsilon, tol=1e-12, log_domain=False)
        plan_log, state_log = sinkhorn_knopp(cost, u, u, epsilon, tol=1e-12, log_domain=True)
        assert state_std.converged and state_log.converged
        assert np.abs(plan_std.values - plan_log.values).max() <= 1e-8

    def test_large_epsilon_limit_is_product_plan(self, rng):
        data = DataMatrix(rng.standard_normal((3, 5)))
        cost = squared_l2_cost(data, data)
        epsilon = 1e6 * float(cost.values.max())
        u = uniform_histogram(5)
        plan, _ = sinkhorn_knopp(cost, u, u, epsilon, tol=1e-12)
        product = np.outer(u.weights, u.weights)
        assert np.abs(plan.values - product).max() <= 1e-6

    def test_warm_start_skips_the_work(self, rng):
        data = DataMatrix(rng.standard_normal((3, 6)))
        cost = squared_l2_cost(data, data)
        epsilon = 0.5 * float(cost.values.max())
        u = uniform_histogram(6)
        plan_cold, state_cold = sinkhorn_knopp(cost, u, u, epsilon, tol=1e-11)
        plan_warm, state_warm = sinkhorn_knopp(
            cost, u, u, epsilon, tol=1e-11, init=state_cold
        )
        assert state_cold.converged
        assert state_warm.iterations < state_cold.iterations
        assert np.abs(plan_warm.values - plan_cold.values).max() <= 1e-10

    def test_underflow_raises_in_standard_domain_only(self):
        cost = CostMatrix(np.array([[1e4, 1e4], [0.0, 1.0]]))
        u = uniform_histogram(2)
        with pytest.raises(NumericalUnderflowError):
            sinkhorn_knopp(cost, u, u, epsilon=1.0, log_domain=False)
        plan, state = sinkhorn_knopp(cost, u, u, epsilon=1.0)  # auto goes log
        assert state.converged
        validate_transport_plan(plan)

    def test_nonconvergence_warns_and_flags(self, rng):
        data = DataMatrix(rng.standard_normal((3, 6)))
        cost = squared_l2_cost(data, data)
        u = uniform_histogram(6)
        with pytest.warns(NonConvergenceWarning):
            plan, state = sinkhorn_knopp(cost, u, u, epsilon=1.0, tol=1e-12, max_iter=2)
        assert not state.converged
        assert state.marginal_error > 1e-12
        validate_transport_plan(plan)  # invariant holds at the recorded tolerance

    def test_zero_weight_histograms_rejected(self):
        cost = CostMatrix(np.zeros((2, 2)))
        from ewca import Histogram

        degenerate = Histogram(np.array([1.0, 0.0]))
        with pytest.raises(ConfigError):
            sinkhorn_knopp(cost, degenerate, degenerate, epsilon=1.0)

    def test_histogram_length_mismatch(self):
        cost = CostMatrix(np.zeros((2, 3)))
        with pytest.raises(DimensionError):
            sinkhorn_knopp(cost, uniform_histogram(2), uniform_histogram(2), epsilon=1.0)


class TestEntropicOtValue:
    def test_product_plan_has_zero_entropy_term(self, rng):
        u = uniform_histogram(3)
        from ewca import TransportPlan

        plan = TransportPlan(np.outer(u.weights, u.weights), u, u)
        cost = CostMatrix(np.abs(rng.standard_normal((3, 3))))
        expected = float((plan.values * cost.values).sum())
        for epsilon in (0.1, 1.0, 10.0):
            assert entropic_ot_value(plan, cost, u, u, epsilon) == pytest.approx(
                expected, abs=1e-14
            )

    def test_single_coupling(self):
        one = uniform_histogram(1)
        from ewca import TransportPlan

        plan = TransportPlan(np.array([[1.0]]), one, one)
        cost = CostMatrix(np.array([[5.0]]))
        assert entropic_ot_value(plan, cost, one, one, 3.0) == pytest.approx(5.0)

    def test_direct_summation_and_dual_oracles(self):
        cost = CostMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        u = uniform_histogram(2)
        epsilon = 0.1
        plan, state = sinkhorn_knopp(cost, u, u, epsilon, tol=1e-14)
        value = entropic_ot_value(plan, cost, u, u, epsilon)

        # oracle 1: naive double loop over the definition
        direct = 0.0
        for i in range(2):
            for j in range(2):
                pi = plan.values[i, j]
                direct += cost.values[i, j] * pi
                if pi > 0:
                    direct += epsilon * pi * np.log(pi / (u.weights[i] * u.weights[j]))
        assert value == pytest.approx(direct, abs=1e-15)

        # oracle 2: at the Sinkhorn fixed point the primal value collapses to
        # eps * (sum_i a_i log(u_i/a_i) + sum_j b_j log(v_j/b_j))
        dual = epsilon * (
            float(u.weights @ (state.log_u - np.log(u.weights)))
            + float(u.weights @ (state.log_v - np.log(u.weights)))
        )
        assert value == pytest.approx(dual, abs=1e-12)
