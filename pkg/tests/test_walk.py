import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qwtopo.errors import ValidationError
from qwtopo.walk import (
    L_COIN, QWP_MATRIX, R_COIN, CoinState, LatticeState, ProbabilityDistribution, StepParams,
    apply_qplate, apply_qwp, coin_expectations, distribution, evolve, moments, propagate,
    sample_counts, sampled_moments, step,
)

S = 1 / math.sqrt(2)

deltas = st.floats(0.0, 2 * math.pi)
qs = st.sampled_from([0.5, 1.0])


@st.composite
def coins(draw):
    re = draw(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
    v = np.array([re[0] + 1j * re[1], re[2] + 1j * re[3]])
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        return L_COIN
    return CoinState(*(v / norm))


def amps_at(state, site):
    return state.amplitude(site)


# ---------------------------------------------------------------- types

def test_coin_state_rejects_unnormalized():
    with pytest.raises(ValidationError):
        CoinState(1.0, 1.0)


def test_coin_normalized_and_meridian():
    c = CoinState.normalized(1, 1)
    assert abs(c.alpha - S) < 1e-15 and abs(c.beta - S) < 1e-15
    m = CoinState.meridian(math.pi)
    assert abs(m.alpha) < 1e-15 and abs(m.beta - 1) < 1e-15


def test_step_params_reduction_and_shift():
    p = StepParams(2 * math.pi + 0.5)
    assert p.delta == pytest.approx(0.5)
    assert StepParams(-0.5).delta == pytest.approx(2 * math.pi - 0.5)
    assert StepParams(1.0, q=1.5).shift == 3
    with pytest.raises(ValidationError):
        StepParams(1.0, q=0.3)
    with pytest.raises(ValidationError):
        StepParams(math.nan)


def test_lattice_state_is_read_only():
    s = LatticeState.localized(L_COIN)
    with pytest.raises(ValueError):
        s.amps[0, 0] = 2.0
    with pytest.raises(ValidationError):
        LatticeState(0, np.array([[1.0, 1.0]]))


def test_distribution_validation():
    with pytest.raises(ValidationError):
        ProbabilityDistribution(0, [0.5, 0.6])
    with pytest.raises(ValidationError):
        ProbabilityDistribution(0, [1.5, -0.5])


# ---------------------------------------------------------------- operators

def test_qwp_matrix_is_unitary():
    assert np.allclose(QWP_MATRIX @ QWP_MATRIX.conj().T, np.eye(2), atol=1e-15)


def test_apply_qwp_on_L():
    out = apply_qwp(LatticeState.localized(L_COIN))
    assert out.min_site == 0
    assert np.allclose(out.amps[0], [S, -1j * S], atol=1e-15)


def test_apply_qwp_twice_maps_L_to_R():
    out = apply_qwp(apply_qwp(LatticeState.localized(L_COIN)))
    assert np.allclose(out.amps[0], [0, -1j], atol=1e-15)
    assert out.norm() == pytest.approx(1.0, abs=1e-15)


@given(coins())
def test_apply_qwp_preserves_norm(coin):
    assert abs(apply_qwp(LatticeState.localized(coin, 3)).norm() - 1) < 1e-12


@given(coins())
def test_qplate_delta_zero_is_identity(coin):
    s = LatticeState.localized(coin, 2)
    out = apply_qplate(s, StepParams(0.0))
    assert np.array_equal(out.window(-5, 5), s.window(-5, 5))


def test_qplate_delta_pi_on_L():
    out = apply_qplate(LatticeState.localized(L_COIN), StepParams(math.pi))
    assert np.allclose(out.amplitude(1), [0, 1j], atol=1e-15)
    assert np.allclose(out.amplitude(0), [0, 0], atol=1e-15)


def test_qplate_half_pi_on_R():
    out = apply_qplate(LatticeState.localized(R_COIN), StepParams(math.pi / 2))
    assert np.allclose(out.amplitude(0), [0, S], atol=1e-15)
    assert np.allclose(out.amplitude(-1), [1j * S, 0], atol=1e-15)
    assert distribution(out).as_dict() == pytest.approx({-1: 0.5, 0: 0.5})


def test_qplate_grows_only_when_needed():
    s = LatticeState.localized(L_COIN)
    out = apply_qplate(s, StepParams(1.0))
    assert out.min_site == 0 and out.max_site == 1


def test_step_delta_pi_from_L():
    out = step(LatticeState.localized(L_COIN), StepParams(math.pi))
    assert np.allclose(out.amplitude(-1), [S, 0], atol=1e-15)
    assert np.allclose(out.amplitude(1), [0, 1j * S], atol=1e-15)
    probs = {m: p for m, p in distribution(out).as_dict().items() if p > 1e-30}
    assert probs == pytest.approx({-1: 0.5, 1: 0.5})


@given(coins(), deltas, qs)
def test_step_is_qplate_after_qwp(coin, delta, q):
    s = LatticeState.localized(coin)
    p = StepParams(delta, q)
    a = step(s, p)
    b = apply_qplate(apply_qwp(s), p)
    lo, hi = -2, 2
    assert np.allclose(a.window(lo, hi), b.window(lo, hi), atol=1e-15)


def test_evolve_n_zero():
    s = LatticeState.localized(L_COIN)
    out = evolve(s, StepParams(1.0), 0)
    assert len(out) == 1 and np.array_equal(out[0].amps, s.amps)


def test_evolve_rejects_negative():
    with pytest.raises(ValidationError):
        evolve(LatticeState.localized(L_COIN), StepParams(1.0), -1)


def test_evolve_six_steps_support():
    s = LatticeState.localized(CoinState.normalized(1, 1))
    d = distribution(evolve(s, StepParams(2.95), 6)[-1]).as_dict()
    assert min(d) >= -6 and max(d) <= 6
    assert sum(d.values()) == pytest.approx(1.0, abs=1e-12)


def test_evolve_fifty_steps_at_pi():
    rep = moments(distribution(propagate(LatticeState.localized(R_COIN), StepParams(math.pi), 50)), 50)
    assert abs(rep.M2_over_n2 - (1 - S)) < 0.02


def test_evolve_matches_repeated_step():
    s = LatticeState.localized(CoinState.normalized(1, 1j))
    p = StepParams(1.1)
    hist = evolve(s, p, 5)
    cur = s
    for i in range(1, 6):
        cur = step(cur, p)
        assert np.allclose(hist[i].window(-6, 6), cur.window(-6, 6), atol=1e-14)


# ---------------------------------------------------------------- invariants

@given(coins(), deltas, qs, st.integers(0, 100))
def test_unitarity(coin, delta, q, n):
    hist = evolve(LatticeState.localized(coin), StepParams(delta, q), n)
    drift = [abs(h.norm() - 1.0) for h in hist]
    assert max(drift) < 1e-12 * max(n, 1)


@given(coins(), deltas, qs, st.integers(0, 60))
def test_support_bound(coin, delta, q, n):
    p = StepParams(delta, q)
    d = distribution(propagate(LatticeState.localized(coin), p, n))
    sites = d.sites()
    assert np.all(d.probs[np.abs(sites) > p.shift * n] == 0.0)


@given(coins(), st.integers(0, 40))
def test_delta_zero_locality(coin, n):
    d = distribution(propagate(LatticeState.localized(coin), StepParams(0.0), n))
    probs = d.as_dict()
    assert list(probs) == [0] and abs(probs[0] - 1.0) < 1e-12


@given(coins(), deltas, st.integers(0, 20), st.integers(0, 20))
def test_composition_bitwise(coin, delta, a, b):
    s = LatticeState.localized(coin)
    p = StepParams(delta)
    whole = propagate(s, p, a + b)
    parts = propagate(propagate(s, p, a), p, b)
    lo, hi = -(a + b), a + b
    assert np.array_equal(whole.window(lo, hi), parts.window(lo, hi))


@given(coins(), deltas, st.integers(1, 60))
def test_variance_non_negative_and_ballistic_bound(coin, delta, n):
    rep = moments(distribution(propagate(LatticeState.localized(coin), StepParams(delta), n)), n)
    assert rep.variance >= -1e-12
    assert rep.M2 <= n ** 2 * (1 + 1e-12)


@given(coins(), deltas, st.integers(0, 30))
def test_distribution_sums_to_one(coin, delta, n):
    d = distribution(propagate(LatticeState.localized(coin), StepParams(delta), n))
    assert abs(d.probs.sum() - 1) < 1e-10 and np.all(d.probs >= 0)


# ---------------------------------------------------------------- observables

def test_distribution_of_localized():
    assert distribution(LatticeState.localized(L_COIN)).as_dict() == {0: 1.0}


@pytest.mark.parametrize("dist, n, m1, m2", [
    ({-1: 0.25, 0: 0.5, 1: 0.25}, 1, 0.0, 0.5),
    ({-1: 0.5, 1: 0.5}, 1, 0.0, 1.0),
    ({2: 1.0}, 2, 2.0, 4.0),
])
def test_moments_examples(dist, n, m1, m2):
    rep = moments(ProbabilityDistribution.from_dict(dist), n)
    assert rep.M1 == pytest.approx(m1, abs=1e-15)
    assert rep.M2 == pytest.approx(m2, abs=1e-15)
    assert rep.M1_over_n == pytest.approx(m1 / n)
    assert rep.M2_over_n2 == pytest.approx(m2 / n ** 2)


def test_moments_rejects_n_zero():
    with pytest.raises(ValidationError):
        moments(ProbabilityDistribution.from_dict({0: 1.0}), 0)


@pytest.mark.parametrize("coin, expected", [
    (L_COIN, (0, 0, 1)),
    (CoinState.normalized(1, 1), (1, 0, 0)),
    (R_COIN, (0, 0, -1)),
    (CoinState.normalized(1, 1j), (0, 1, 0)),
])
def test_coin_expectations(coin, expected):
    assert coin_expectations(coin) == pytest.approx(expected, abs=1e-15)


@given(coins())
def test_coin_expectations_unit_length(coin):
    assert abs(sum(x * x for x in coin_expectations(coin)) - 1) < 1e-12


def test_coin_expectations_rejects_unnormalized():
    with pytest.raises(ValidationError):
        coin_expectations((1.0, 1.0))


# ---------------------------------------------------------------- sampling

def test_sample_zero_shots():
    c = sample_counts(ProbabilityDistribution.from_dict({-1: 0.5, 1: 0.5}), 0, 1)
    assert c.shots == 0 and not c.counts.any()


def test_sample_deterministic_distribution():
    c = sample_counts(ProbabilityDistribution.from_dict({0: 1.0}), 100, 3)
    assert c.as_dict() == {0: 100}


def test_sample_rejects_negative_shots():
    with pytest.raises(ValidationError):
        sample_counts(ProbabilityDistribution.from_dict({0: 1.0}), -1, 0)


@given(st.integers(0, 2 ** 32), st.integers(1, 5000))
def test_sample_seed_determinism_and_total(seed, shots):
    d = distribution(propagate(LatticeState.localized(R_COIN), StepParams(2.0), 8))
    a = sample_counts(d, shots, seed)
    b = sample_counts(d, shots, seed)
    assert np.array_equal(a.counts, b.counts)
    assert a.shots == shots
    assert np.all(a.counts[d.probs == 0] == 0)


def test_sampled_m2_binomial_oracle():
    d = ProbabilityDistribution.from_dict({-1: 0.5, 1: 0.5})
    hits = 0
    for seed in range(1000):
        est = sampled_moments(sample_counts(d, 10_000, seed))
        # m^2 = 1 on both sites: M2 is exactly 1 with zero spread
        hits += abs(est.M2 - 1.0) <= 3 * est.M2_err + 1e-15
    assert hits >= 990


def test_sampled_m1_error_is_binomial():
    d = ProbabilityDistribution.from_dict({-1: 0.5, 1: 0.5})
    ests = [sampled_moments(sample_counts(d, 10_000, s)) for s in range(400)]
    m1 = np.array([e.M1 for e in ests])
    # M1 = 2 f - 1 with f binomial: sd = 2 sqrt(p(1-p)/S) = 0.01
    assert abs(m1.std() - 0.01) < 0.0015
    assert np.mean([e.M1_err for e in ests]) == pytest.approx(0.01, rel=0.02)
    within = np.mean(np.abs(m1) <= 3 * np.array([e.M1_err for e in ests]))
    assert within >= 0.99


def test_sampled_moments_rejects_empty():
    c = sample_counts(ProbabilityDistribution.from_dict({0: 1.0}), 0, 0)
    with pytest.raises(ValidationError):
        sampled_moments(c)
