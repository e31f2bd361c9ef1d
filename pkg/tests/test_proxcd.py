import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from otmtr.proxcd import CdState, ProxParams, cd_update, column_lipschitz, \
    make_state, prox_g

finite = dict(allow_nan=False, allow_infinity=False)


class TestProxG:
    def test_stationary_point(self):
        # (x - 1) + 1 - 1/x = 0 at x = 1
        assert prox_g(1.0, 1.0, 1.0, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_soft_threshold_limit(self):
        assert prox_g(5.0, 1.0, 0.0, 1.0) == 3.0
        assert prox_g(1.0, 1.0, 0.0, 1.0) == 0.0

    def test_against_golden_section(self):
        # alpha=0.5, a=2, b=1, y=3
        got = prox_g(3.0, 0.5, 2.0, 1.0)
        want = oracles.prox_argmin(3.0, 0.5, 2.0, 1.0)
        assert got == pytest.approx(want, abs=1e-9)

    def test_vectorized(self):
        y = np.array([-1.0, 0.0, 2.0])
        a = np.array([0.0, 1.0, 0.5])
        out = prox_g(y, 0.3, a, 0.2)
        for i in range(3):
            assert out[i] == prox_g(float(y[i]), 0.3, float(a[i]), 0.2)

    @given(y=st.floats(-20, 20, **finite), alpha=st.floats(0, 5, **finite),
           a=st.floats(0, 5, **finite), b=st.floats(0, 5, **finite))
    @settings(max_examples=300, deadline=None)
    def test_positivity(self, y, alpha, a, b):
        assume(alpha * a == 0.0 or alpha * a > 1e-250)
        out = prox_g(y, alpha, a, b)
        if alpha * a > 0:
            assert out > 0
        else:
            assert out >= 0

    @given(y1=st.floats(-20, 20, **finite), dy=st.floats(0, 10, **finite),
           alpha=st.floats(0, 5, **finite), a=st.floats(0, 5, **finite),
           b=st.floats(0, 5, **finite))
    @settings(max_examples=300, deadline=None)
    def test_monotone_and_nonexpansive(self, y1, dy, alpha, a, b):
        lo = prox_g(y1, alpha, a, b)
        hi = prox_g(y1 + dy, alpha, a, b)
        assert hi >= lo - 1e-12
        assert hi - lo <= dy + 1e-9 * (1 + dy)


class TestColumnLipschitz:
    def test_zero_column_replacement(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0]])
        lip = column_lipschitz(X)
        assert lip[0] == 5.0
        assert lip[1] == 5.0

    def test_all_zero_raises(self):
        with pytest.raises(ValueError):
            column_lipschitz(np.zeros((3, 2)))


class TestCdUpdate:
    def test_orthogonal_design_one_sweep(self):
        # for X = I the coordinate subproblem is the scalar prox scaled by
        # n (the 1/(2n) quadratic normalization divides the curvature)
        rng = np.random.default_rng(0)
        p = 6
        X = np.asfortranarray(np.eye(p))
        y = rng.random(p) * 3
        a = rng.random(p) + 0.1
        prox = ProxParams(alpha=0.3, a=a, b=0.5)
        state = make_state(X, y)
        state, _, converged = cd_update(X, y, state, prox, tol=1e-14)
        assert converged
        expected = prox_g(y, 0.3 * p, a, 0.5)
        assert np.abs(state.theta - expected).max() < 1e-12

    def test_mu_zero_is_lasso_update(self):
        rng = np.random.default_rng(1)
        X = np.asfortranarray(rng.standard_normal((12, 7)))
        y = rng.standard_normal(12)
        prox = ProxParams.from_hyperparams(mu=0.0, lam=0.1, gamma=1.0,
                                           n_tasks=3,
                                           marginal=np.full(7, 0.2))
        assert prox.alpha == 0.1 and prox.b == 0.0
        assert np.all(prox.a == 0.0)
        state = make_state(X, y)
        state, _, _ = cd_update(X, y, state, prox, tol=1e-13,
                                max_iter=50000)
        from otmtr.baselines import fit_lasso
        ref = fit_lasso(X, y, 0.1, positive=True, tol=1e-13)
        assert np.abs(state.theta - ref).max() < 1e-10

    def test_matches_projected_gradient_oracle(self):
        rng = np.random.default_rng(2)
        X = np.asfortranarray(rng.standard_normal((8, 5)))
        y = rng.standard_normal(8) * 2
        a = rng.random(5) + 0.2
        prox = ProxParams(alpha=0.2, a=a, b=0.5)
        state = make_state(X, y)
        state, obj, _ = cd_update(X, y, state, prox, tol=1e-14,
                                  max_iter=100000)
        lin = prox.linear_coefficient
        loga = prox.alpha * a
        _, oracle_obj = oracles.coef_subproblem_gradient_descent(
            np.asarray(X), y, lin, loga)
        assert obj == pytest.approx(oracle_obj, abs=1e-6)

    def test_objective_monotone_across_sweeps(self):
        rng = np.random.default_rng(3)
        X = np.asfortranarray(rng.standard_normal((10, 8)))
        y = rng.standard_normal(10)
        a = rng.random(8) + 0.1
        prox = ProxParams(alpha=0.4, a=a, b=0.3)
        state = make_state(X, y)
        lin, loga = prox.linear_coefficient, prox.alpha * a
        values = [oracles.coef_subproblem_objective(np.asarray(X), y,
                                                    state.theta, lin, loga)]
        for _ in range(15):
            state, obj, _ = cd_update(X, y, state, prox, max_iter=1,
                                      tol=0.0)
            values.append(obj)
        diffs = np.diff(values)
        assert np.all(diffs <= 1e-12)

    def test_residual_integrity(self):
        rng = np.random.default_rng(4)
        X = np.asfortranarray(rng.standard_normal((9, 6)))
        y = rng.standard_normal(9)
        prox = ProxParams(alpha=0.2, a=rng.random(6) + 0.1, b=0.1)
        state = make_state(X, y)
        for _ in range(5):
            state, _, _ = cd_update(X, y, state, prox, max_iter=3, tol=0.0)
            assert np.abs(state.residual
                          - (X @ state.theta - y)).max() < 1e-8

    def test_finite_difference_stationarity(self):
        rng = np.random.default_rng(5)
        X = np.asfortranarray(rng.standard_normal((10, 6)))
        y = rng.standard_normal(10)
        a = rng.random(6) + 0.2
        prox = ProxParams(alpha=0.3, a=a, b=0.4)
        state = make_state(X, y)
        state, _, converged = cd_update(X, y, state, prox, tol=1e-13,
                                        max_iter=100000)
        assert converged
        lin, loga = prox.linear_coefficient, prox.alpha * a
        h = 1e-6
        for j in range(6):
            if state.theta[j] <= 1e-4:
                continue
            for direction in (1.0, -1.0):
                theta = state.theta.copy()
                theta_m = theta.copy()
                theta[j] += direction * h
                theta_m[j] -= direction * h
                f_p = oracles.coef_subproblem_objective(np.asarray(X), y,
                                                        theta, lin, loga)
                f_m = oracles.coef_subproblem_objective(np.asarray(X), y,
                                                        theta_m, lin, loga)
                assert (f_p - f_m) / (2 * h) * direction >= -1e-4

    def test_strictly_positive_output(self):
        rng = np.random.default_rng(6)
        X = np.asfortranarray(rng.standard_normal((7, 9)))
        y = rng.standard_normal(7) * 5
        prox = ProxParams(alpha=0.5, a=rng.random(9) + 0.05, b=0.2)
        state = make_state(X, y)
        state, _, _ = cd_update(X, y, state, prox, tol=1e-10)
        assert (state.theta > 0).all()

    def test_public_call_syncs_residual(self):
        rng = np.random.default_rng(7)
        X = np.asfortranarray(rng.standard_normal((6, 4)))
        y = rng.standard_normal(6)
        state = CdState(theta=np.full(4, 0.25),
                        residual=np.zeros(6),   # deliberately stale
                        lipschitz=column_lipschitz(X))
        prox = ProxParams(alpha=0.1, a=np.full(4, 0.3), b=0.0)
        state, _, _ = cd_update(X, y, state, prox, tol=1e-12)
        assert np.abs(state.residual - (X @ state.theta - y)).max() < 1e-10
