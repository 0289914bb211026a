import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coinconf.updaters import (
    ONS_GAIN,
    FixedState,
    KTState,
    ONSState,
    OGDState,
    SFOGDState,
    kt_step,
    ogd_step,
    ons_step,
    reset,
    sfogd_step,
    update,
    wealth_of,
)

ALPHA = 0.1
coins = st.lists(st.sampled_from([ALPHA, ALPHA - 1]), min_size=1, max_size=300)
any_coin = st.lists(st.floats(-1, 1), min_size=1, max_size=300)


def run(state, gs):
    states = [state]
    for g in gs:
        states.append(update(states[-1], g))
    return states


def kt_transcription(gs):
    """The KT recursion written out line by line, kept separate from kt_step."""
    W_prev = 1.0
    lam = 0.0
    s = 0.0
    t = 1
    for g in gs:
        W = W_prev - g * s
        lam = t / (t + 1) * lam - 1 / (t + 1) * g
        s = lam * W
        W_prev = W
        t += 1
    return W_prev, lam, s


class TestReset:
    def test_kt(self):
        st_ = reset("kt")
        assert (st_.radius, st_.wealth, st_.fraction, st_.t) == (0.0, 1.0, 0.0, 1)

    def test_ons(self):
        st_ = reset("ons")
        assert (st_.accumulator, st_.fraction, st_.wealth, st_.radius) == (1.0, 0.0, 1.0, 0.0)

    @pytest.mark.parametrize("strategy", ["ogd", "sfogd"])
    @pytest.mark.parametrize("eta", [0, -1, None])
    def test_gradient_methods_need_positive_eta(self, strategy, eta):
        with pytest.raises(ValueError):
            reset(strategy, eta=eta)

    def test_fixed_and_unknown(self):
        assert reset("fixed", radius=2.5).radius == 2.5
        with pytest.raises(ValueError):
            reset("adam")

    def test_batched_shape(self):
        st_ = reset("ons", shape=(3,))
        assert st_.wealth.shape == (3,)


class TestKT:
    def test_first_round_miss(self):
        nxt = kt_step(KTState(), -0.9)
        assert (nxt.wealth, nxt.fraction, nxt.radius) == (1.0, 0.45, 0.45)

    def test_first_round_covered(self):
        nxt = kt_step(KTState(), 0.1)
        assert nxt.wealth == 1.0
        assert nxt.fraction == pytest.approx(-0.05, abs=1e-16)
        assert nxt.radius == pytest.approx(-0.05, abs=1e-16)

    def test_alternating_stream_matches_transcription_bitwise(self):
        gs = [0.1, -0.9] * 5
        final = run(reset("kt"), gs)[-1]
        assert (final.wealth, final.fraction, final.radius) == kt_transcription(gs)

    def test_rejects_large_coin(self):
        with pytest.raises(ValueError):
            kt_step(KTState(), 1.5)
        with pytest.raises(ValueError):
            kt_step(reset("kt", shape=(2,)), np.array([0.1, -1.01]))

    @given(any_coin)
    def test_closed_form_fraction(self, gs):
        final = run(reset("kt"), gs)[-1]
        assert abs(final.fraction + sum(gs) / (len(gs) + 1)) < 1e-9

    @given(any_coin)
    def test_wealth_identity_and_invariants(self, gs):
        states = run(reset("kt"), gs)
        acc = 0.0
        for prev, nxt, g in zip(states, states[1:], gs):
            acc += g * prev.radius
            assert abs(nxt.wealth - (1 - acc)) < 1e-9 * (1 + abs(acc))
            assert nxt.wealth >= 0
            assert nxt.radius == nxt.fraction * nxt.wealth
            assert abs(nxt.fraction) <= 1


class TestONS:
    def test_first_step_miss_clips(self):
        nxt = ons_step(ONSState(), -0.9)
        assert nxt.accumulator == pytest.approx(1.81, abs=1e-15)
        assert nxt.fraction == 0.5 and nxt.radius == 0.5
        assert ONS_GAIN * 0.9 / 1.81 == pytest.approx(1.1032712401327401, abs=1e-12)

    def test_first_step_covered(self):
        nxt = ons_step(ONSState(), 0.1)
        assert nxt.accumulator == pytest.approx(1.01, abs=1e-15)
        assert nxt.fraction == pytest.approx(-0.21968327223765232, abs=1e-12)
        assert nxt.radius == pytest.approx(-0.21968327223765232, abs=1e-12)

    def test_two_step_hand_trace(self):
        # 40-digit values from an mpmath transcription of the update
        s1 = ons_step(ONSState(), -0.9)
        s2 = ons_step(s1, 0.1)
        assert abs(s2.wealth - 0.95) < 1e-12
        assert abs(s2.accumulator - 1.821080332409972299168975069252077562327) < 1e-12
        assert abs(s2.fraction - 0.3717475549735918839329789094467184329378) < 1e-12
        assert abs(s2.radius - 0.3531601772249122897363299639743825112909) < 1e-12

    def test_zero_gradient_fixed_point(self):
        state = ONSState(wealth=2.0, fraction=0.3, accumulator=4.0, radius=0.6)
        nxt = ons_step(state, 0.0)
        assert (nxt.wealth, nxt.fraction, nxt.accumulator, nxt.radius) == (2.0, 0.3, 4.0, 0.6)

    def test_natural_log_gain(self):
        assert ONS_GAIN == 2 / (2 - math.log(3))

    @given(any_coin)
    def test_fraction_clipped_accumulator_monotone(self, gs):
        states = run(reset("ons"), gs)
        for prev, nxt in zip(states, states[1:]):
            assert -0.5 <= nxt.fraction <= 0.5
            assert nxt.accumulator >= prev.accumulator >= 1
            assert nxt.radius == nxt.fraction * nxt.wealth

    def test_rejects_large_coin(self):
        with pytest.raises(ValueError):
            ons_step(ONSState(), -2.0)


class TestGradientMethods:
    @pytest.mark.parametrize("g, expected", [(-0.9, 1.09), (0.1, 0.99)])
    def test_ogd(self, g, expected):
        assert ogd_step(OGDState(radius=1.0, eta=0.1), g).radius == pytest.approx(expected, abs=1e-15)

    def test_ogd_zero(self):
        assert ogd_step(OGDState(radius=0.0, eta=1.0), 0.0).radius == 0.0

    def test_sfogd_first_step_normalised(self):
        assert sfogd_step(SFOGDState(radius=0.0, eta=1.0), -0.9).radius == 1.0

    def test_sfogd_hand_arithmetic(self):
        nxt = sfogd_step(SFOGDState(radius=0.5, eta=0.1, grad_sq_sum=0.81), 0.1)
        assert abs(nxt.grad_sq_sum - 0.82) < 1e-15
        assert abs(nxt.radius - 0.4889568473925153455773490144305072360816) < 1e-12

    def test_sfogd_zero_gradient(self):
        state = SFOGDState(radius=0.3, eta=0.5, grad_sq_sum=1.0)
        nxt = sfogd_step(state, 0.0)
        assert (nxt.radius, nxt.grad_sq_sum) == (0.3, 1.0)
        fresh = sfogd_step(SFOGDState(radius=0.3, eta=0.5), 0.0)
        assert fresh.radius == 0.3 and fresh.grad_sq_sum == 0.0
        batch = sfogd_step(reset("sfogd", eta=0.5, shape=(2,)), np.array([0.0, 0.1]))
        np.testing.assert_array_equal(batch.radius, [0.0, -0.5])

    @given(any_coin, st.floats(1e-3, 10))
    def test_sfogd_step_at_most_eta(self, gs, eta):
        states = run(reset("sfogd", eta=eta), gs)
        for prev, nxt in zip(states, states[1:]):
            assert abs(nxt.radius - prev.radius) <= eta * (1 + 1e-12)
            assert nxt.grad_sq_sum >= prev.grad_sq_sum

    def test_fixed_never_moves(self):
        state = FixedState(radius=0.7)
        assert update(state, -0.9) is state
        assert wealth_of(state) is None


class TestDeterminismAndBatching:
    PARAMS = [("kt", {}), ("ons", {}), ("ogd", {"eta": 0.3}), ("sfogd", {"eta": 0.3}),
              ("fixed", {"radius": 0.4})]

    @pytest.mark.parametrize("name, params", PARAMS)
    def test_identical_inputs_identical_states(self, name, params, rng):
        gs = rng.choice([ALPHA, ALPHA - 1], size=500).tolist()
        a = [s.radius for s in run(reset(name, **params), gs)]
        b = [s.radius for s in run(reset(name, **params), gs)]
        assert a == b

    @pytest.mark.parametrize("name, params", PARAMS)
    def test_batch_matches_scalar_bitwise(self, name, params, rng):
        gs = rng.choice([ALPHA, ALPHA - 1], size=(4, 300))
        batch = reset(name, shape=(4,), **params)
        radii = [batch.radius.copy()]
        for t in range(gs.shape[1]):
            batch = update(batch, gs[:, t])
            radii.append(batch.radius.copy())
        radii = np.array(radii)
        for j in range(4):
            single = [s.radius for s in run(reset(name, **params), gs[j].tolist())]
            assert radii[:, j].tolist() == single
