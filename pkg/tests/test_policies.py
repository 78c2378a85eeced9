import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehtrain.dwf import SuffixHull, dwf_suffix, training_split
from ehtrain.energy_model import (
    ChannelParams,
    EnergyProfile,
    RngSpec,
    check_energy_neutral,
    constant_profile,
    generate_poisson_profile,
)
from ehtrain.policies import (
    Eq5Context,
    FixedMode,
    ModelDomainError,
    asymptotic_training_period,
    constant_rate_objective,
    constant_rate_optimum,
    fixed_policy,
    golden_section_max,
    optimal_exhaustive,
    suboptimal_constant_rate,
    suboptimal_dwf_rate,
    upper_bound_non_eh,
    upper_bound_perfect_csi,
)
from ehtrain.special_fns import exp_e1
from ehtrain.throughput import LOG2E, block_throughput

P1 = ChannelParams()
EXP_E1_3 = 0.262083740255318496188718606022
small_profiles = st.lists(st.integers(0, 5).map(float), min_size=2, max_size=12)


def _brute_exhaustive(profile, params, grid):
    """Plain double loop over n_t and the e_te grid, scalar evaluation only."""
    best = (-1.0, None, None)
    for n_t in range(1, profile.n):
        last = float(profile.energies[n_t - 1])
        points = np.linspace(0.0, 1.0, grid) * last if last > 0 else [0.0]
        for e in points:
            d = training_split(profile, n_t, float(e), params)
            r = block_throughput(profile, d, dwf_suffix(profile, n_t, float(e), params), params).bits_per_slot
            if r > best[0]:
                best = (r, n_t, float(e))
    return best


def _all_policies(profile, params):
    hull = SuffixHull(profile)
    return [
        suboptimal_dwf_rate(profile, params, hull=hull),
        suboptimal_constant_rate(profile, params, hull=hull),
        fixed_policy(profile, params, FixedMode("fixed_slots", 30), hull=hull),
        fixed_policy(profile, params, FixedMode("fixed_ratio", 0.04), hull=hull),
        fixed_policy(profile, params, FixedMode("one_slot"), hull=hull),
    ]


# ---------------------------------------------------------------- exhaustive


def test_optimal_two_slot_example():
    out = optimal_exhaustive(EnergyProfile([2.0, 0.0]), P1)
    assert (out.n_t, out.e_te) == (1, 1.0)
    assert out.rate == pytest.approx(0.5 * LOG2E * EXP_E1_3, rel=1e-13)
    assert upper_bound_non_eh(2.0, 2, P1) == pytest.approx(out.rate, rel=1e-12)


def test_optimal_saves_energy_when_forced():
    out = optimal_exhaustive(EnergyProfile([8.0, 0.0, 0.0, 0.0]), P1)
    assert out.n_t == 1 and out.e_te > 0
    # independent 1-D oracle over e_te on a fine grid
    grid = np.linspace(0.0, 8.0, 4001)
    vals = [block_throughput(EnergyProfile([8.0, 0, 0, 0]),
                             training_split(EnergyProfile([8.0, 0, 0, 0]), 1, e, P1),
                             dwf_suffix(EnergyProfile([8.0, 0, 0, 0]), 1, e, P1), P1).bits_per_slot
            for e in grid]
    assert out.e_te == pytest.approx(grid[int(np.argmax(vals))], abs=2 * 8.0 / 4000)
    assert out.rate >= max(vals) - 1e-12


@settings(max_examples=60)
@given(small_profiles, st.sampled_from([2, 3, 9]))
def test_optimal_matches_brute_force(es, grid):
    profile = EnergyProfile(es)
    out = optimal_exhaustive(profile, P1, grid, refine=False)
    rate, n_t, e = _brute_exhaustive(profile, P1, grid)
    assert out.rate == rate
    assert (out.n_t, out.e_te) == (n_t, e)


def test_optimal_brute_force_poisson_with_pruning():
    for t in range(15):
        profile = generate_poisson_profile(60, 1.0, RngSpec(8, t))
        out = optimal_exhaustive(profile, P1, 5, refine=False)
        assert out.info["n_t_searched"] < profile.n - 1
        assert (out.rate, out.n_t, out.e_te) == _brute_exhaustive(profile, P1, 5)


@given(small_profiles)
def test_refinement_never_hurts(es):
    profile = EnergyProfile(es)
    assert optimal_exhaustive(profile, P1, 9).rate >= optimal_exhaustive(profile, P1, 9, refine=False).rate


def test_optimal_rejects_bad_args():
    with pytest.raises(ValueError):
        optimal_exhaustive(EnergyProfile([1.0]), P1)
    with pytest.raises(ValueError):
        optimal_exhaustive(EnergyProfile([1.0, 1.0]), P1, 1)


def test_golden_section():
    x, fx = golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert fx == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------- dominance


@given(small_profiles, st.sampled_from([0.3, 1.0, 4.0]))
def test_dominance_chain_small(es, a):
    params = ChannelParams(1.0, a)
    profile = EnergyProfile(es)
    opt = optimal_exhaustive(profile, params, 9)
    assert upper_bound_perfect_csi(profile, params) >= opt.rate
    assert upper_bound_non_eh(profile.total_energy, profile.n, params) >= opt.rate
    for out in _all_policies(profile, params):
        assert opt.rate >= out.rate, out.policy_id


def test_dominance_chain_poisson():
    for t in range(200):
        n = (50, 120, 300)[t % 3]
        profile = generate_poisson_profile(n, 1.0, RngSpec(17, t))
        opt = optimal_exhaustive(profile, P1, 17)
        assert upper_bound_perfect_csi(profile, P1) >= opt.rate
        assert upper_bound_non_eh(profile.total_energy, n, P1) >= opt.rate
        for out in _all_policies(profile, P1):
            assert opt.rate >= out.rate
            assert 1 <= out.n_t <= n - 1


@given(small_profiles)
def test_outcome_invariants(es):
    profile = EnergyProfile(es)
    for out in [optimal_exhaustive(profile, P1, 5), *_all_policies(profile, P1)]:
        assert isinstance(out.n_t, int) and 1 <= out.n_t <= profile.n - 1
        assert out.rate >= 0
        # data stage: slot n_t+1 may use the leftover plus E_{n_t}
        data_profile = EnergyProfile([out.e_te + es[out.n_t], *es[out.n_t + 1:]])
        assert check_energy_neutral(data_profile, out.data_alloc.per_slot(), P1).ok


# ---------------------------------------------------------------- sub-optimal 1


def test_stationarity_is_scaled_negative_slope():
    profile = generate_poisson_profile(200, 1.0, RngSpec(3, 3))
    ctx = Eq5Context.from_profile(profile, P1)
    h = 1e-5
    for nt in (3.0, 10.0, 50.0):
        slope = (ctx.objective(nt + h) - ctx.objective(nt - h)) / (2 * h)
        assert ctx.stationarity(nt) == pytest.approx(-profile.n * slope, rel=1e-6)


def test_unimodal_simplified_objective():
    for t in range(100):
        profile = generate_poisson_profile(200, 1.0, RngSpec(21, t))
        ctx = Eq5Context.from_profile(profile, P1)
        vals = np.array([ctx.objective(float(k)) for k in range(1, 200)])
        d = np.sign(np.diff(vals))
        d = d[d != 0]
        # plateau-tolerant: at most one change from rising to falling
        assert np.sum((d[:-1] > 0) & (d[1:] < 0)) <= 1
        assert np.sum((d[:-1] < 0) & (d[1:] > 0)) == 0


def test_sub1_degenerate_and_tiny():
    out = suboptimal_dwf_rate(EnergyProfile([0.0, 0.0, 0.0]), P1)
    assert (out.n_t, out.rate) == (1, 0.0)
    assert suboptimal_dwf_rate(EnergyProfile([3.0, 1.0]), P1).n_t == 1


def test_sub1_picks_best_neighbour_of_root():
    profile = generate_poisson_profile(400, 1.0, RngSpec(4, 4))
    out = suboptimal_dwf_rate(profile, P1)
    ctx = Eq5Context.from_profile(profile, P1)
    root = out.info["continuous_n_t"]
    assert abs(ctx.stationarity(root)) < 1e-6 * profile.n
    assert out.n_t in (math.floor(root), math.ceil(root))


@pytest.mark.parametrize("n", [10, 100, 1250])
def test_constant_profile_collapse(n):
    scan = [constant_rate_objective(k, 1.0, n, P1) for k in range(1, n)]
    want = 1 + int(np.argmax(scan))
    profile = constant_profile(n, 1.0)
    assert suboptimal_constant_rate(profile, P1).n_t == want
    assert suboptimal_dwf_rate(profile, P1).n_t == want
    assert constant_rate_optimum(1.0, n, P1) == want


def test_constant_profile_powers_equal_harvest_rate():
    # on a constant profile no leftover is kept: training and data power both equal P_H
    for n in (10, 100, 400):
        out = optimal_exhaustive(constant_profile(n, 1.0), P1, 33)
        assert out.e_te == 0.0
        assert out.data_alloc.powers == (1.0,)
        assert out.n_t == constant_rate_optimum(1.0, n, P1)


# ---------------------------------------------------------------- asymptotics


def test_asymptotic_converges_to_root():
    errs, alphas, nts = [], [], []
    for n in (10**3, 10**4, 10**5):
        profile = constant_profile(n, 1.0)
        asym = asymptotic_training_period(profile, P1)
        root = suboptimal_dwf_rate(profile, P1).info["continuous_n_t"]
        errs.append(abs(asym.n_t / root - 1.0))
        alphas.append(asym.alpha)
        nts.append(asym.n_t)
        assert 0 < asym.alpha < 1 and asym.w > 0
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.1
    assert alphas[0] > alphas[1] > alphas[2]
    assert nts[0] < nts[1] < nts[2]


def test_asymptotic_alpha_decreasing_for_fixed_w():
    profile = constant_profile(50, 2.0)
    w = asymptotic_training_period(profile, P1).w
    alphas = [2.0 / (1.0 + math.sqrt(1.0 + 4.0 * n * w)) for n in (10, 100, 1000)]
    assert alphas == sorted(alphas, reverse=True)


def test_asymptotic_domain_error():
    with pytest.raises(ModelDomainError):
        asymptotic_training_period(EnergyProfile([0.0, 0.0]), P1)


def test_asymptotic_w_positive_on_poisson():
    for t in range(20):
        asym = asymptotic_training_period(generate_poisson_profile(300, 1.0, RngSpec(6, t)), P1)
        assert math.isfinite(asym.w) and asym.w > 0


# ---------------------------------------------------------------- sub-optimal 2


def test_constant_rate_optimum_trends():
    nts = [constant_rate_optimum(1.0, n, P1) for n in (10, 100, 1000, 10000)]
    assert nts == sorted(nts)
    alphas = [k / n for k, n in zip(nts, (10, 100, 1000, 10000))]
    assert alphas == sorted(alphas, reverse=True)
    assert constant_rate_optimum(1.0, 2, P1) == 1
    with pytest.raises(ValueError):
        constant_rate_optimum(0.0, 10, P1)


def test_constant_rate_objective_value():
    k = 3 * 1.0 / (1 + 1 + 3)
    assert constant_rate_objective(3, 1.0, 10, P1) == pytest.approx(0.7 * exp_e1(1 / k), rel=1e-14)


def test_sub2_depends_only_on_total():
    a = EnergyProfile([5.0, 0.0, 1.0, 2.0, 0.0, 4.0, 0.0, 0.0])
    b = EnergyProfile([0.0, 0.0, 0.0, 0.0, 4.0, 4.0, 2.0, 2.0])
    assert suboptimal_constant_rate(a, P1).n_t == suboptimal_constant_rate(b, P1).n_t


def test_sub2_constant_profile_uses_harvest_rate():
    profile = constant_profile(200, 1.5)
    out = suboptimal_constant_rate(profile, P1)
    assert out.n_t == constant_rate_optimum(1.5, 200, P1)
    assert out.e_te == 0.0


def test_sub2_degenerate():
    out = suboptimal_constant_rate(EnergyProfile([0.0, 0.0]), P1)
    assert (out.n_t, out.rate) == (1, 0.0)


# ---------------------------------------------------------------- fixed


def test_fixed_modes():
    p50 = generate_poisson_profile(50, 1.0, RngSpec(1, 0))
    out = fixed_policy(p50, P1, FixedMode("fixed_slots", 30))
    assert (out.n_t, out.clamped, out.policy_id) == (30, False, "fixed_30")
    assert out.data_alloc.lengths().sum() == 20
    assert out.rate < optimal_exhaustive(p50, P1, 17).rate * 0.9
    p1250 = constant_profile(1250, 1.0)
    assert fixed_policy(p1250, P1, FixedMode("fixed_ratio", 0.04)).n_t == 50
    assert fixed_policy(p50, P1, FixedMode("one_slot")).n_t == 1
    short = fixed_policy(constant_profile(20, 1.0), P1, FixedMode("fixed_slots", 30))
    assert (short.n_t, short.clamped, short.info["requested_n_t"]) == (19, True, 30)
    tiny = fixed_policy(constant_profile(10, 1.0), P1, FixedMode("fixed_ratio", 0.04))
    assert (tiny.n_t, tiny.clamped) == (1, True)


@pytest.mark.parametrize("kind, value", [("fixed_slots", 0), ("fixed_slots", 2.5), ("fixed_ratio", 0.0),
                                         ("fixed_ratio", 1.0), ("bogus", 1)])
def test_fixed_mode_validation(kind, value):
    with pytest.raises(ValueError):
        FixedMode(kind, value)


# ---------------------------------------------------------------- bounds


def test_upper_bound_examples():
    assert upper_bound_perfect_csi(constant_profile(8, 1.0), P1) == pytest.approx(0.86035, abs=5e-6)
    assert upper_bound_perfect_csi(EnergyProfile([0.0, 0.0]), P1) == 0.0
    assert upper_bound_non_eh(0.0, 5, P1) == 0.0
    rates = [upper_bound_non_eh(e, 10, P1) for e in (1.0, 1e2, 1e4, 1e6)]
    assert rates == sorted(rates) and rates[-1] > 2 * rates[1]
    with pytest.raises(ValueError):
        upper_bound_non_eh(-1.0, 5, P1)
    with pytest.raises(ValueError):
        upper_bound_non_eh(1.0, 1, P1)


def test_non_eh_bound_two_slots_split_in_half():
    # S + P = 2 and K = S P / (1 + P + S): best at S = P = 1
    rate = upper_bound_non_eh(2.0, 2, P1)
    assert rate == pytest.approx(0.5 * LOG2E * EXP_E1_3, rel=1e-13)
