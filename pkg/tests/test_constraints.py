import math

import numpy as np
import pytest

from wellopt.cma import SearchDistribution, StrategyParams
from wellopt.constraints import (MAX_RESAMPLES, PenaltyState, SumConstraint,
                                 constraint_violation, maybe_increase_gammas,
                                 maybe_set_gammas, mean_is_feasible, penalize,
                                 sample_with_rejection, should_reject)


def make_dist(n, sigma=1.0, covariance=None, generation=0):
    C = np.eye(n) if covariance is None else np.asarray(covariance, float)
    return SearchDistribution(mean=np.zeros(n), step_size=sigma, covariance=C,
                              path_sigma=np.zeros(n), path_c=np.zeros(n),
                              generation=generation)


def make_params(lam, mu, weights):
    weights = np.asarray(weights, float)
    return StrategyParams(lam=lam, mu=mu, weights=weights,
                          mu_eff=1.0 / np.sum(weights ** 2), c_sigma=0.3,
                          d_sigma=1.0, c_c=0.3, c_1=0.01, c_mu=0.01,
                          chi_n=1.0, max_generations=100)


class TestSumConstraint:
    def test_validation(self):
        with pytest.raises(ValueError):
            SumConstraint(indices=(), lower=0.0, upper=1.0)
        with pytest.raises(ValueError):
            SumConstraint(indices=(0,), lower=1.0, upper=1.0)
        with pytest.raises(ValueError):
            SumConstraint(indices=(-1,), lower=0.0, upper=1.0)

    def test_violation_feasible(self):
        c = SumConstraint(indices=(0, 1), lower=0.0, upper=5.0)
        assert constraint_violation(np.array([1.0, 2.0, 9.0]), c) == (3.0, 3.0, 0.0)

    def test_violation_clamped(self):
        c = SumConstraint(indices=(0, 1), lower=0.0, upper=5.0)
        assert constraint_violation(np.array([4.0, 4.0, 0.0]), c) == (8.0, 5.0, 3.0)

    def test_violation_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            size = int(rng.integers(1, n + 1))
            indices = tuple(rng.choice(n, size=size, replace=False))
            lo = float(rng.uniform(-3, 0))
            hi = float(rng.uniform(0.5, 3))
            c = SumConstraint(indices=indices, lower=lo, upper=hi)
            x = rng.uniform(-5, 5, n)
            q = 0.0
            for p in indices:
                q += x[p]
            q_feas = q
            if q_feas < lo:
                q_feas = lo
            if q_feas > hi:
                q_feas = hi
            got = constraint_violation(x, c)
            assert got[0] == pytest.approx(q, rel=1e-14)
            assert got[1] == pytest.approx(q_feas, rel=1e-14)
            assert got[2] == pytest.approx(abs(q - q_feas), abs=1e-14)


class TestRejection:
    def test_far_violation_rejects(self):
        assert should_reject(100.0, 70.0, 0.2)

    def test_marginal_violation_kept(self):
        assert not should_reject(100.0, 90.0, 0.2)

    def test_zero_q_edge_always_rejects(self):
        assert should_reject(0.0, 1.0, 0.2)

    def test_nonpositive_fraction_invalid(self):
        with pytest.raises(ValueError):
            should_reject(1.0, 1.0, 0.0)

    def test_sampler_counts_and_caps(self):
        c = SumConstraint(indices=(0,), lower=0.0, upper=1.0)
        # draws alternate far outside / inside the acceptance band
        sequence = iter([np.array([50.0]), np.array([50.0]), np.array([0.5])])
        x, resamples = sample_with_rejection(lambda: next(sequence), [c], 0.2)
        assert x[0] == 0.5 and resamples == 2

        always_bad = lambda: np.array([50.0])
        x, resamples = sample_with_rejection(always_bad, [c], 0.2)
        assert resamples == MAX_RESAMPLES and x[0] == 50.0

    def test_no_constraints_single_draw(self):
        x, resamples = sample_with_rejection(lambda: np.array([9.9]), [], 0.2)
        assert x[0] == 9.9 and resamples == 0


class TestGammaInitialization:
    def test_feasible_mean_keeps_gammas_zero(self):
        c = SumConstraint(indices=(0, 1), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=2, lam=4)
        state.record_generation(np.array([1.0, 2.0, 3.0, 4.0]))
        dist = make_dist(2, generation=3)   # mean zero -> feasible
        maybe_set_gammas(state, dist, [c])
        assert not state.gammas_initialized
        assert np.all(state.gammas == 0.0)

    def test_formula_arithmetic(self):
        # delta_fit = 10, sigma = 2, mean diag C = 1 -> gamma = 2*10/4 = 5
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=3, lam=4)
        state.fitness_history.append(10.0)
        dist = make_dist(3, sigma=2.0, generation=2)
        dist.mean = np.array([5.0, 0.0, 0.0])   # q=5 unfeasible
        maybe_set_gammas(state, dist, [c])
        assert state.gammas_initialized
        assert state.gammas[0] == pytest.approx(5.0, rel=1e-14)

    def test_first_generation_never_initializes(self):
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=2, lam=4)
        state.fitness_history.append(1.0)
        dist = make_dist(2, generation=0)
        dist.mean = np.array([5.0, 0.0])
        maybe_set_gammas(state, dist, [c])
        assert not state.gammas_initialized

    def test_one_time_initialization(self):
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=2, lam=4)
        state.fitness_history.append(4.0)
        dist = make_dist(2, generation=2)
        dist.mean = np.array([5.0, 0.0])
        maybe_set_gammas(state, dist, [c])
        first = state.gammas.copy()
        state.fitness_history.append(400.0)
        maybe_set_gammas(state, dist, [c])
        assert np.array_equal(state.gammas, first)

    def test_median_of_stored_iqrs_with_independent_oracle(self):
        # store raw per-generation objective batches, recompute IQRs and
        # the median without numpy's percentile machinery
        state = PenaltyState(n_constraints=2, dim=12, lam=4)
        assert state.history_capacity == math.ceil((20 + 3 * 12) / 4)
        rng = np.random.default_rng(0)
        batches = [rng.uniform(0, s, 21) for s in (1.0, 3.0, 100.0)]

        def quantile_linear(sorted_values, fraction):
            pos = fraction * (len(sorted_values) - 1)
            lo = int(math.floor(pos))
            hi = int(math.ceil(pos))
            return sorted_values[lo] + (pos - lo) * (sorted_values[hi]
                                                     - sorted_values[lo])

        iqrs = []
        for batch in batches:
            state.record_generation(batch)
            ordered = sorted(batch.tolist())
            iqrs.append(quantile_linear(ordered, 0.75)
                        - quantile_linear(ordered, 0.25))
        expected_median = sorted(iqrs)[1]
        assert state.median_iqr() == pytest.approx(expected_median, rel=1e-12)

    def test_history_ring_buffer_capacity(self):
        state = PenaltyState(n_constraints=1, dim=5, lam=20)
        cap = math.ceil((20 + 15) / 20)
        assert state.history_capacity == cap
        for i in range(10):
            state.record_generation(np.arange(4.0) * (i + 1))
        assert len(state.fitness_history) == cap


class TestGammaIncrease:
    def test_in_bounds_mean_unchanged(self):
        c = SumConstraint(indices=(0, 1), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=4, lam=4)
        state.gammas[:] = 2.0
        state.gammas_initialized = True
        params = make_params(4, 2, [0.5, 0.5])
        maybe_increase_gammas(state, make_dist(4), [c], params,
                              np.array([0.0]))
        assert state.gammas[0] == 2.0

    def test_hand_evaluated_threshold_and_factor(self):
        # C = I, sigma = 1, card(P)=2, n=4, mu_eff=2:
        # threshold = 1 * sqrt(1) * max(1, sqrt(4)/2) = 1
        # mu_eff/(10n) = 0.05 <= 1 -> multiplier exactly 1.1
        c = SumConstraint(indices=(0, 1), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=4, lam=4)
        state.gammas[:] = 3.0
        state.gammas_initialized = True
        params = make_params(4, 2, [0.5, 0.5])
        assert params.mu_eff == pytest.approx(2.0)

        dist = make_dist(4)
        maybe_increase_gammas(state, dist, [c], params, np.array([2.5]))
        assert state.gammas[0] == pytest.approx(3.0 * 1.1, rel=1e-14)
        # out of bounds by less than the threshold: no change
        state.gammas[:] = 3.0
        maybe_increase_gammas(state, dist, [c], params, np.array([1.5]))
        assert state.gammas[0] == 3.0

    def test_large_mu_eff_exponent_branch(self):
        # mu_eff/(10n) > 1 raises the growth factor above 1.1
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=1, lam=64)
        state.gammas[:] = 1.0
        state.gammas_initialized = True
        weights = np.full(32, 1.0 / 32)
        params = make_params(64, 32, weights)
        assert params.mu_eff / 10.0 > 1.0
        maybe_increase_gammas(state, make_dist(1), [c], params,
                              np.array([100.0]))
        assert state.gammas[0] == pytest.approx(1.1 ** (params.mu_eff / 10.0),
                                                rel=1e-12)

    def test_only_triggered_constraints_grow(self):
        c1 = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        c2 = SumConstraint(indices=(1,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=2, dim=2, lam=4)
        state.gammas[:] = 1.0
        state.gammas_initialized = True
        params = make_params(4, 2, [0.5, 0.5])
        maybe_increase_gammas(state, make_dist(2), [c1, c2], params,
                              np.array([50.0, 0.0]))
        assert state.gammas[0] > 1.0
        assert state.gammas[1] == 1.0

    def test_requires_initialization(self):
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=1, lam=4)
        params = make_params(4, 2, [0.5, 0.5])
        maybe_increase_gammas(state, make_dist(1), [c], params,
                              np.array([50.0]))
        assert np.all(state.gammas == 0.0)


def eq8_oracle(x, raw, gammas, constraints, C):
    """Term-by-term duplicate implementation of the penalized objective."""
    n = C.shape[0]
    m = len(constraints)
    total = 0.0
    for j, c in enumerate(constraints):
        q = sum(x[p] for p in c.indices)
        q_feas = min(max(q, c.lower), c.upper)
        card = len(c.indices)
        mean_log_subset = sum(math.log(C[p, p]) for p in c.indices) / card
        mean_log_all = sum(math.log(C[i, i]) for i in range(n)) / n
        xi = math.exp(0.9 * (mean_log_subset - mean_log_all))
        total += gammas[j] * (q_feas - q) ** 2 / xi
    return raw + total / m


class TestPenalize:
    def test_feasible_returns_raw_exactly(self):
        c = SumConstraint(indices=(0, 1), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=2, lam=4)
        state.gammas[:] = 123.0
        raw = 0.7071067811865476
        out = penalize(np.array([0.2, 0.3]), raw, state, [c], make_dist(2))
        assert out == raw

    def test_identity_covariance_arithmetic(self):
        # xi = exp(0.9*(0-0)) = 1; gamma=5, distance=2 -> raw + 5*4/1
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=3, lam=4)
        state.gammas[:] = 5.0
        out = penalize(np.array([3.0, 0.0, 0.0]), 1.5, state, [c],
                       make_dist(3))
        assert out == pytest.approx(1.5 + 20.0, rel=1e-14)

    def test_matches_eq8_oracle_on_random_inputs(self):
        rng = np.random.default_rng(12)
        for _ in range(300):
            n = int(rng.integers(2, 9))
            m = int(rng.integers(1, 5))
            constraints = []
            for _ in range(m):
                size = int(rng.integers(1, n + 1))
                indices = tuple(rng.choice(n, size=size, replace=False))
                lo = float(rng.uniform(-2, 0))
                constraints.append(SumConstraint(indices=indices, lower=lo,
                                                 upper=lo + rng.uniform(0.5, 2)))
            C = np.diag(rng.uniform(0.1, 10.0, n))
            dist = make_dist(n, covariance=C)
            state = PenaltyState(n_constraints=m, dim=n, lam=8)
            state.gammas[:] = rng.uniform(0, 50, m)
            x = rng.uniform(-4, 4, n)
            raw = float(rng.standard_normal())
            expected = eq8_oracle(x, raw, state.gammas, constraints, C)
            got = penalize(x, raw, state, constraints, dist)
            assert got == pytest.approx(expected, rel=1e-12)

    def test_nonfinite_raw_propagates(self):
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=1, lam=4)
        assert math.isnan(penalize(np.array([5.0]), float("nan"), state, [c],
                                   make_dist(1)))
        assert penalize(np.array([5.0]), float("inf"), state, [c],
                        make_dist(1)) == float("inf")

    def test_penalty_positive_outside_and_monotone_in_distance(self):
        c = SumConstraint(indices=(0,), lower=-1.0, upper=1.0)
        state = PenaltyState(n_constraints=1, dim=1, lam=4)
        state.gammas[:] = 2.0
        dist = make_dist(1)
        previous = 0.0
        for q in np.linspace(1.01, 6.0, 25):
            penalty = penalize(np.array([q]), 0.0, state, [c], dist)
            assert penalty > previous
            previous = penalty

    def test_mean_feasibility_helper(self):
        c = SumConstraint(indices=(0, 1), lower=-1.0, upper=1.0)
        assert mean_is_feasible(np.array([0.2, 0.3]), [c])
        assert not mean_is_feasible(np.array([2.0, 3.0]), [c])
