"""Two-stage weight updates and the analytic tail representation."""

import math

import numpy as np
import pytest

from driftcast.distributions import Distribution, log_mix, relative_entropy
from driftcast.priors import PriorWeights, prior_weight
from driftcast.weights import (
    DecayingShareMixing,
    ExponentialMixing,
    FixedShareMixing,
    GeneralMixing,
    PosteriorHistory,
    WeightState,
    loss_update,
    materialize_expert,
    mixing_update,
    normalized_initialized,
)

W1_ORACLE = 0.49327552623603016


def make_state(prior, weights, tail_fraction):
    """State with the given explicit weights and total tail mass."""
    weights = np.asarray(weights, dtype=np.float64)
    kappa = tail_fraction / prior.tail_mass(len(weights))
    return WeightState(prior, np.log(weights), math.log(kappa))


class EagerUniverse:
    """Explicit-array twin of WeightState for cross-checking the tail.

    Materializes every expert up to ``size`` from the start; the prior
    mass above ``size`` rides along as one remainder scalar.
    """

    def __init__(self, prior, size=10_000):
        self.prior = prior
        self.size = size
        self.w = prior.weight(np.arange(1, size + 1))
        self.remainder = prior.tail_mass(size)
        self.step = 0

    @classmethod
    def from_state(cls, state, size=10_000):
        out = cls(state.prior, size)
        out.step = state.step
        out.w = state.tail_coefficient * out.w
        out.w[: state.step] = state.weights
        out.remainder = state.tail_coefficient * state.prior.tail_mass(size)
        return out

    def materialize(self):
        self.step += 1  # already explicit; only the boundary moves

    def loss_update(self, losses, predictor_loss, eta):
        factors = np.full(self.size, math.exp(-eta * predictor_loss))
        factors[: self.step] = np.exp(-eta * np.asarray(losses))
        scaled = self.w * factors
        rem = self.remainder * math.exp(-eta * predictor_loss)
        z = float(np.sum(scaled)) + rem
        self.w = scaled / z
        self.remainder = rem / z

    def mixing_update(self, alpha):
        self.w = alpha * self.prior.weight(np.arange(1, self.size + 1)) + (1 - alpha) * self.w
        self.remainder = alpha * self.prior.tail_mass(self.size) + (1 - alpha) * self.remainder

    def max_deviation(self, state):
        expanded = state.tail_coefficient * self.prior.weight(np.arange(1, self.size + 1))
        expanded[: state.step] = state.weights
        dev = float(np.max(np.abs(expanded - self.w)))
        rem = state.tail_coefficient * self.prior.tail_mass(self.size)
        return max(dev, abs(rem - self.remainder))


class TestMaterialize:
    def test_first_expert_gets_prior_weight(self, prior):
        state = materialize_expert(WeightState.initial(prior), 1)
        assert state.weights[0] == pytest.approx(W1_ORACLE, abs=1e-10)
        assert state.total_mass() == pytest.approx(1.0, abs=1e-14)

    def test_out_of_order_rejected(self, prior):
        with pytest.raises(ValueError):
            materialize_expert(WeightState.initial(prior), 2)

    def test_mass_conserved_over_long_chains(self, prior):
        state = WeightState.initial(prior)
        for i in range(1, 301):
            state = materialize_expert(state, i)
            assert abs(state.total_mass() - 1.0) < 1e-12

    def test_plain_chain_reproduces_prior(self, prior):
        state = WeightState.initial(prior)
        for i in range(1, 51):
            state = materialize_expert(state, i)
        np.testing.assert_allclose(state.weights, prior.weight(np.arange(1, 51)), rtol=1e-13)
        assert state.tail_coefficient == pytest.approx(1.0, abs=1e-14)


class TestLossUpdate:
    def test_uniform_losses_change_nothing(self, prior):
        state = make_state(prior, [0.4, 0.3], 0.3)
        out = loss_update(state, [0.7, 0.7], 0.7, eta=2.0)
        np.testing.assert_allclose(out.weights, state.weights, rtol=1e-12)
        assert out.tail_coefficient == pytest.approx(state.tail_coefficient, rel=1e-12)

    def test_empty_state_is_fixed_point(self, prior):
        state = WeightState.initial(prior)
        out = loss_update(state, [], 1.3, eta=2.0)
        assert out.step == 0
        assert out.tail_coefficient == pytest.approx(1.0, abs=1e-14)

    def test_worked_example_matches_eager_universe(self, prior):
        state = make_state(prior, [0.4, 0.3], 0.3)
        eager = EagerUniverse.from_state(state)
        out = loss_update(state, [0.0, 1.0], 0.5, eta=2.0)
        eager.loss_update([0.0, 1.0], 0.5, eta=2.0)
        assert eager.max_deviation(out) < 1e-9

    def test_contract_errors(self, prior):
        state = make_state(prior, [0.5, 0.3], 0.2)
        with pytest.raises(ValueError):
            loss_update(state, [0.1], 0.5, eta=2.0)  # missing loss
        with pytest.raises(ValueError):
            loss_update(state, [0.1, -0.2], 0.5, eta=2.0)
        with pytest.raises(ValueError):
            loss_update(state, [0.1, 0.2], 0.5, eta=0.0)


class TestMixingUpdate:
    def test_exponential_is_identity(self, prior):
        state = make_state(prior, [0.6, 0.2], 0.2)
        out = mixing_update(state, ExponentialMixing())
        np.testing.assert_array_equal(out.log_weights, state.log_weights)
        assert out.log_tail == state.log_tail

    def test_alpha_zero_and_one_endpoints(self, prior):
        state = make_state(prior, [0.6, 0.2], 0.2)
        out0 = mixing_update(state, FixedShareMixing(0.0))
        np.testing.assert_array_equal(out0.log_weights, state.log_weights)
        out1 = mixing_update(state, FixedShareMixing(1.0))
        np.testing.assert_allclose(out1.weights, prior.weight(np.array([1, 2])), rtol=1e-13)
        assert out1.tail_coefficient == pytest.approx(1.0, abs=1e-13)

    def test_decaying_share_alpha_schedule(self, prior):
        scheme = DecayingShareMixing()
        assert scheme.alpha_at(3) == pytest.approx(0.25)
        state = make_state(prior, [0.6, 0.2], 0.2)
        out = mixing_update(state, scheme, t=3)
        expected = 0.25 * prior.weight(np.array([1, 2])) + 0.75 * state.weights
        np.testing.assert_allclose(out.weights, expected, rtol=1e-12)
        eager = EagerUniverse.from_state(state)
        eager.mixing_update(0.25)
        assert eager.max_deviation(out) < 1e-9

    def test_general_scheme_needs_history(self, prior):
        state = make_state(prior, [0.6, 0.2], 0.2)
        with pytest.raises(ValueError):
            mixing_update(state, GeneralMixing(lambda t: np.ones(t + 1) / (t + 1)))

    def test_general_matches_fixed_share_closed_form(self, prior, rng):
        # beta = (alpha, 0, ..., 0, 1 - alpha) over the stored posteriors
        alpha = 0.3
        history = PosteriorHistory()
        history.append(WeightState.initial(prior))  # posterior 0: the prior
        state = WeightState.initial(prior)
        for s in range(1, 4):
            state = materialize_expert(state, s)
            state = loss_update(state, rng.uniform(0, 2, s), float(rng.uniform(0, 2)), 2.0)
            if s < 3:
                history.append(state)

        def beta(t):
            b = np.zeros(t + 1)
            b[0] = alpha
            b[t] = 1.0 - alpha
            return b

        via_general = mixing_update(state, GeneralMixing(beta), history, t=3)
        via_closed = mixing_update(state, FixedShareMixing(alpha), t=3)
        np.testing.assert_allclose(via_general.weights, via_closed.weights, rtol=1e-12)
        assert via_general.tail_coefficient == pytest.approx(
            via_closed.tail_coefficient, rel=1e-12
        )

    def test_general_scheme_rejects_bad_beta(self, prior):
        state = make_state(prior, [0.5], 0.5)
        history = PosteriorHistory()
        history.append(WeightState.initial(prior))
        with pytest.raises(ValueError):
            mixing_update(state, GeneralMixing(lambda t: np.array([0.5, 0.4])), history, t=1)
        with pytest.raises(ValueError):
            mixing_update(state, GeneralMixing(lambda t: np.array([-0.1, 1.1])), history, t=1)


class TestNormalizedInitialized:
    def test_examples(self, prior):
        single = make_state(prior, [0.7], 0.3)
        np.testing.assert_allclose(normalized_initialized(single).masses, [1.0])
        pair = make_state(prior, [0.2, 0.2], 0.6)
        np.testing.assert_allclose(normalized_initialized(pair).masses, [0.5, 0.5])
        skew = make_state(prior, [0.4, 0.1], 0.5)
        np.testing.assert_allclose(normalized_initialized(skew).masses, [0.8, 0.2])

    def test_empty_state_rejected(self, prior):
        with pytest.raises(ValueError):
            normalized_initialized(WeightState.initial(prior))


class TestTailClosure:
    def test_random_interleavings_match_eager_universe(self, prior, rng):
        """kappa bookkeeping is lossless against a 10^4-expert universe."""
        state = WeightState.initial(prior)
        eager = EagerUniverse(prior)
        eta = 0.9
        for step in range(1, 41):
            state = materialize_expert(state, step)
            eager.materialize()
            losses = rng.uniform(0, 2.5, step)
            h = float(rng.uniform(0, 2.5))
            state = loss_update(state, losses, h, eta)
            eager.loss_update(losses, h, eta)
            alpha = float(rng.uniform(0.0, 0.5))
            state = mixing_update(state, FixedShareMixing(alpha), t=step)
            eager.mixing_update(alpha)
            assert eager.max_deviation(state) < 1e-9
            assert abs(state.total_mass() - 1.0) < 1e-12


class TestPerStepMixlossBound:
    def test_loss_update_divergence_identity(self, prior, rng):
        """m = q.l + (D(q||w) - D(q||w~)) / eta, exactly, for any q."""
        for _ in range(300):
            t = int(rng.integers(1, 9))
            parts = rng.dirichlet(np.ones(t + 1))
            state = make_state(prior, parts[:t], parts[t])
            losses = rng.uniform(0, 3, t)
            h = float(rng.uniform(0, 3))
            eta = float(rng.uniform(0.05, 3))
            m = log_mix(state.as_distribution(), losses, eta, tail_exponent=h)
            tilde = loss_update(state, losses, h, eta)
            mask = rng.random(t) < 0.7
            if not mask.any():
                mask[rng.integers(t)] = True
            qm = np.where(mask, rng.random(t), 0.0)
            q = Distribution(np.arange(1, t + 1), qm / qm.sum())
            rhs = float(q.masses @ losses) + (
                relative_entropy(q, state.as_distribution())
                - relative_entropy(q, tilde.as_distribution())
            ) / eta
            assert m <= rhs + 1e-10
            assert m == pytest.approx(rhs, abs=1e-10)

    def test_mixing_penalty_bound(self, prior, rng):
        """Against any stored posterior s with beta_s > 0:
        m <= q.l + (D(q||w~_s) - D(q||w~_t) + ln(1/beta_s)) / eta."""
        for _ in range(100):
            t = int(rng.integers(2, 7))
            history = PosteriorHistory()
            history.append(WeightState.initial(prior))
            state = WeightState.initial(prior)
            for s in range(1, t):
                state = materialize_expert(state, s)
                state = loss_update(
                    state, rng.uniform(0, 2, s), float(rng.uniform(0, 2)), 1.5
                )
                if s < t - 1:
                    history.append(state)
            beta = rng.dirichlet(np.ones(t))
            mixed = mixing_update(state, GeneralMixing(lambda _t: beta), history, t=t - 1)
            snapshots = list(history.snapshots) + [state]
            losses = rng.uniform(0, 2, mixed.step)
            h = float(rng.uniform(0, 2))
            eta = 1.5
            m = log_mix(mixed.as_distribution(), losses, eta, tail_exponent=h)
            tilde = loss_update(mixed, losses, h, eta)
            qm = rng.dirichlet(np.ones(mixed.step))
            q = Distribution(np.arange(1, mixed.step + 1), qm)
            ql = float(qm @ losses)
            d_tilde = relative_entropy(q, tilde.as_distribution())
            for s, snap in enumerate(snapshots):
                if beta[s] <= 1e-12:
                    continue
                rhs = ql + (
                    relative_entropy(q, snap.as_distribution())
                    - d_tilde
                    + math.log(1.0 / beta[s])
                ) / eta
                assert m <= rhs + 1e-10


class TestExponentialTelescoping:
    def test_cumulative_mixloss_bounded_by_static_comparator(self, prior, rng):
        """Over T steps with a constant comparison vector q:
        M_T <= sum_t q.l_t + D(q||w_1) / eta."""
        for _ in range(20):
            eta = float(rng.uniform(0.2, 2.0))
            state = WeightState.initial(prior)
            T = 30
            total_m = 0.0
            total_ql = 0.0
            qm = rng.dirichlet(np.ones(5))
            q = Distribution(np.arange(1, 6), qm)
            d_initial = None
            for step in range(1, T + 1):
                state = materialize_expert(state, step)
                if step == 5:
                    d_initial = relative_entropy(q, state.as_distribution())
                losses = rng.uniform(0, 2, step)
                h = float(rng.uniform(0, 2))
                if step >= 5:
                    total_m += log_mix(state.as_distribution(), losses, eta, tail_exponent=h)
                    total_ql += float(qm @ losses[:5])
                state = loss_update(state, losses, h, eta)
            assert total_m <= total_ql + d_initial / eta + 1e-9
