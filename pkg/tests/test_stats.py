import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import binom

from surfmem.errors import InvalidParameterError, NoDataError
from surfmem.stats import (
    Done,
    Estimate,
    ScheduleStep,
    ShotStats,
    default_ladder,
    estimate_per_d_rounds,
    likelihood_interval,
    mle,
    next_schedule_step,
    per_d_rounds,
    xor_probability,
)


def test_zero_errors_one_sided():
    e = mle(ShotStats(1000, 0))
    assert e.p_hat == 0 and e.interval_low == 0 and e.interval_high > 0
    # L(p) = (1-p)^n drops by 1000 at p = 1 - 1000^(-1/n)
    assert e.interval_high == pytest.approx(1 - 1000 ** (-1 / 1000), rel=1e-9)


def test_point_estimate_and_rmse():
    e = mle(ShotStats(10**6, 100))
    assert e.p_hat == 1e-4
    assert e.rmse == pytest.approx(math.sqrt(1e-4 * (1 - 1e-4) / 1e6))


def test_interval_matches_independent_root_finder():
    k, n = 100, 10**6
    ll = lambda p: binom.logpmf(k, n, p)  # noqa: E731
    target = ll(k / n) - math.log(1000)
    lo = brentq(lambda p: ll(p) - target, 1e-9, k / n, xtol=1e-16)
    hi = brentq(lambda p: ll(p) - target, k / n, 1e-2, xtol=1e-16)
    e = mle(ShotStats(n, k))
    assert e.interval_low == pytest.approx(lo, rel=1e-8)
    assert e.interval_high == pytest.approx(hi, rel=1e-8)


def test_all_errors():
    e = mle(ShotStats(50, 50))
    assert e.p_hat == 1 and e.interval_high == 1 and e.interval_low < 1


def test_no_shots():
    with pytest.raises(NoDataError):
        mle(ShotStats(0, 0))


@pytest.mark.parametrize("n, k", [(-1, 0), (10, 11), (10, -1)])
def test_invalid_counts(n, k):
    with pytest.raises(InvalidParameterError):
        ShotStats(n, k)


def test_estimate_invariant():
    with pytest.raises(InvalidParameterError):
        Estimate(0.2, 0.3, 0.4, 0.01)


def test_interval_calibration():
    n, p = 10**5, 1e-3
    ks = np.random.default_rng(2024).binomial(n, p, size=2000)
    covered = 0
    cache = {}
    for k in ks:
        if k not in cache:
            cache[k] = likelihood_interval(int(k), n)
        lo, hi = cache[k]
        covered += lo <= p <= hi
    assert covered / len(ks) >= 0.99


@given(st.integers(0, 10**7), st.integers(0, 10**7), st.integers(0, 10**7), st.integers(0, 10**7))
def test_pooling_commutes_with_mle(n1, k1, n2, k2):
    k1, k2 = min(k1, n1), min(k2, n2)
    a, b = ShotStats(n1, k1), ShotStats(n2, k2)
    if n1 + n2 == 0:
        return
    pooled = mle(a + b)
    direct = mle(ShotStats(n1 + n2, k1 + k2))
    assert pooled == direct


@pytest.mark.parametrize("p_3d, expected", [(0.0, 0.0), (0.244, 0.1), (0.5, 0.5)])
def test_per_d_rounds_examples(p_3d, expected):
    assert per_d_rounds(p_3d) == pytest.approx(expected, abs=1e-12)


def test_forward_map_is_three_way_xor():
    p = 0.1
    assert xor_probability(p, 3) == pytest.approx(3 * p * (1 - p) ** 2 + p**3, abs=1e-15)
    assert xor_probability(p, 3) == pytest.approx(0.244, abs=1e-15)


@pytest.mark.parametrize("bad", [0.5000001, 0.7, -0.1])
def test_per_d_rounds_domain(bad):
    with pytest.raises(InvalidParameterError):
        per_d_rounds(bad)


@given(st.floats(0.0, 0.4999, allow_subnormal=False))
def test_per_d_rounds_inverse_to_twelve_digits(p):
    back = xor_probability(per_d_rounds(p), 3)
    assert back == pytest.approx(p, rel=1e-12, abs=1e-300)


@given(st.floats(0.0, 0.4999), st.floats(0.0, 0.4999))
def test_per_d_rounds_increasing(a, b):
    if a < b:
        assert per_d_rounds(a) < per_d_rounds(b)


def test_estimate_conversion_maps_interval():
    est = mle(ShotStats(10**5, 3000))
    conv = estimate_per_d_rounds(est)
    assert conv.p_hat == pytest.approx(per_d_rounds(0.03))
    assert conv.interval_low == pytest.approx(per_d_rounds(est.interval_low))
    assert conv.interval_high == pytest.approx(per_d_rounds(est.interval_high))
    assert conv.interval_low <= conv.p_hat <= conv.interval_high


def test_empty_history_starts_at_first_ceiling():
    assert next_schedule_step([]) == ScheduleStep(10**6, 10**5)


def test_ladder_shape():
    ladder = default_ladder(10**8, 20)
    assert ladder[0] == ScheduleStep(10**6, 10**5)
    assert ladder[-1] == ScheduleStep(10**8, 20)
    assert all(a.max_shots <= b.max_shots and a.max_errors >= b.max_errors for a, b in zip(ladder, ladder[1:]))


def test_final_rung_with_enough_errors_is_done():
    ladder = default_ladder(10**8, 20)
    history = [ShotStats(s.max_shots, 5) for s in ladder[:-1]] + [ShotStats(10**8, 25)]
    assert isinstance(next_schedule_step(history, ladder), Done)


def test_budget_exhausted_with_zero_errors():
    out = next_schedule_step([ShotStats(10**6, 0), ShotStats(10**7, 0), ShotStats(10**8, 0)])
    assert out == Done(zero_errors=True, budget_exhausted=True)


def test_many_errors_finishes_early():
    assert isinstance(next_schedule_step([ShotStats(200_000, 10**5)]), Done)


def test_few_errors_climbs_ladder():
    assert next_schedule_step([ShotStats(10**6, 3)]) == default_ladder()[1]


def test_custom_budget():
    assert next_schedule_step([ShotStats(10**6, 3)], budget=10**6) == Done(budget_exhausted=True)
