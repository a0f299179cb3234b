"""Signaling cost, migration cost, and the TCP disruption-time model."""

import random
from dataclasses import replace

import pytest

from edgemig import chain as cm
from edgemig import costs
from edgemig import hexgrid as hg


def stationary(k):
    agg = cm.aggregate(hg.build_full_walk(k), hg.orbit_partition(k))
    return cm.steady_state(agg)


# --- signaling cost -------------------------------------------------------

def test_signaling_cost_three_messages():
    assert costs.signaling_cost(costs.TransferParams(objects_size=0, sig_size=100)) == 300


def test_signaling_cost_payload_only():
    assert costs.signaling_cost(costs.TransferParams(objects_size=1e9, sig_size=0)) == 1e9


def test_signaling_cost_combined():
    got = costs.signaling_cost(costs.TransferParams(objects_size=1e9, sig_size=1e3))
    assert got == 1_000_003_000.0


def test_signaling_cost_affine():
    rng = random.Random(7)
    for _ in range(50):
        a, b = rng.uniform(0, 1e9), rng.uniform(0, 1e6)
        base = costs.signaling_cost(costs.TransferParams(objects_size=a, sig_size=b))
        assert costs.signaling_cost(costs.TransferParams(objects_size=a + 1, sig_size=b)) == base + 1
        assert costs.signaling_cost(costs.TransferParams(objects_size=a, sig_size=b + 1)) == base + 3


# --- migration cost -------------------------------------------------------

def test_migration_cost_k2_bracket():
    # ring-1 cells exit with probability 3/6, and pi1 = 0.6
    dist = stationary(2)
    assert costs.migration_probability(dist, 2) == pytest.approx(0.3, abs=1e-12)
    assert costs.migration_cost(dist, 2, 1000.0) == pytest.approx(300.0, abs=1e-9)


def test_migration_cost_zero_cost():
    assert costs.migration_cost(stationary(3), 3, 0.0) == 0.0


def test_migration_cost_mu_scaling():
    dist = stationary(2)
    per_jump = costs.migration_cost(dist, 2, 100.0)
    assert costs.migration_cost(dist, 2, 100.0, mu=2.5) == pytest.approx(2.5 * per_jump)


@pytest.mark.parametrize("k", range(2, 9))
def test_migration_bracket_is_probability(k):
    bracket = costs.migration_probability(stationary(k), k)
    assert 0.0 <= bracket <= 1.0
    assert costs.migration_cost(stationary(k), k, 1.0) <= 1.0


def test_migration_cost_decreasing_in_k():
    cost = costs.signaling_cost(costs.TransferParams())
    mcs = [costs.migration_cost(stationary(k), k, cost) for k in range(2, 8)]
    assert all(a > b for a, b in zip(mcs, mcs[1:]))


def test_migration_cost_requires_edge_ring():
    with pytest.raises(ValueError):
        costs.migration_cost(stationary(3), 5, 1.0)


# --- service disruption time ----------------------------------------------

def test_sdt_no_payload_is_conversion_only():
    p = costs.TransferParams(objects_size=0.0, t_vm_conversion=2.5)
    assert costs.service_disruption_time(p) == 2.5


def test_sdt_zero_rtt_is_conversion_only():
    p = costs.TransferParams(objects_size=1e9, rtt=0.0, t_vm_conversion=1.25)
    assert costs.service_disruption_time(p) == 1.25


def test_sdt_golden_values():
    """Frozen from an independent high-precision transcription of the model."""
    cases = [
        (costs.TransferParams(objects_size=1e9, mss=1460, w_max=512, p_loss=0.0, rtt=0.01), 171.67109891977477),
        (costs.TransferParams(objects_size=1e8, mss=1460, w_max=64, p_loss=0.02, rtt=0.05, t_vm_conversion=1.5), 516.03979913828557),
        (costs.TransferParams(objects_size=5e8, mss=1200, w_max=256, p_loss=0.001, rtt=0.02, t_vm_conversion=0.25), 168.59472332805931),
    ]
    for params, want in cases:
        assert costs.service_disruption_time(params) == pytest.approx(want, rel=1e-12)


def test_sdt_full_beats_partial_migration():
    base = costs.TransferParams(objects_size=1e9, rtt=0.01)
    full = costs.service_disruption_time(base)
    half = costs.service_disruption_time(base.scaled(0.5))
    tenth = costs.service_disruption_time(base.scaled(0.1))
    assert full > half > tenth


def test_sdt_monotone_in_each_parameter():
    """Randomized monotonicity over the model's operating domain."""
    rng = random.Random(20260810)
    for _ in range(300):
        p = costs.TransferParams(
            objects_size=rng.uniform(1e6, 2e9),
            mss=rng.choice([536, 1200, 1460]),
            w_max=rng.choice([16, 64, 256, 512]),
            p_loss=rng.uniform(0.0, 0.5),
            rtt=rng.uniform(1e-4, 0.5),
            t_vm_conversion=rng.uniform(0.0, 5.0),
        )
        base = costs.service_disruption_time(p)
        bumped_rtt = replace(p, rtt=min(0.5, p.rtt * (1 + rng.uniform(0.01, 0.5))))
        assert costs.service_disruption_time(bumped_rtt) >= base - 1e-9
        bumped_loss = replace(p, p_loss=min(0.9, p.p_loss + rng.uniform(0.001, 0.2)))
        assert costs.service_disruption_time(bumped_loss) >= base - 1e-9
        bumped_size = replace(p, objects_size=p.objects_size * (1 + rng.uniform(0.01, 1.0)))
        assert costs.service_disruption_time(bumped_size) >= base - 1e-9


def test_sdt_rejects_certain_loss():
    with pytest.raises(costs.DomainError):
        costs.TransferParams(p_loss=1.0)


def test_slow_start_rounds_clamped():
    assert costs._slow_start_rounds(1) == 0.0
    assert costs._slow_start_rounds(0) == 0.0
    assert costs._slow_start_rounds(2) > 0.0


# --- sdt_vs_k ---------------------------------------------------------------

def test_sdt_vs_k_feeds_squared_distance_rtt():
    dist = stationary(2)
    params = costs.TransferParams(objects_size=1e9)
    got = costs.sdt_vs_k(2, dist, costs.RttModel(coeff=0.01), params)
    want = costs.service_disruption_time(replace(params, rtt=0.01))
    assert got == want


def test_sdt_vs_k_zero_coeff():
    params = costs.TransferParams(objects_size=1e9, t_vm_conversion=3.0)
    assert costs.sdt_vs_k(4, stationary(4), costs.RttModel(coeff=0.0), params) == 3.0


def test_sdt_vs_k_increasing():
    params = costs.TransferParams(objects_size=1e9)
    rm = costs.RttModel()
    vals = [costs.sdt_vs_k(k, stationary(k), rm, params) for k in range(2, 8)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_sdt_vs_k_k7_exceeds_k2():
    params = costs.TransferParams(objects_size=1e9)
    rm = costs.RttModel()
    assert costs.sdt_vs_k(7, stationary(7), rm, params) > costs.sdt_vs_k(2, stationary(2), rm, params)
