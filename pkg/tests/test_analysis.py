"""Closed-form engine vs exact rational enumeration, plus structural checks."""

import math
from fractions import Fraction as F

import pytest

from relaysim import analysis
from relaysim.model import default_collision_params, half_clusters

from oracles import (
    enum_clustered_upper,
    enum_dominant_rates,
    enum_q_min,
    enum_relay_arrival,
    enum_upper_bound,
    table1_like,
)

TOL = 1e-12


def rel_err(x, exact):
    exact = float(exact)
    if exact == 0.0:
        return abs(x)
    return abs(x - exact) / abs(exact)


def asym_params():
    # Deliberately heterogeneous so symmetric cancellations cannot hide bugs.
    p = default_collision_params(3)
    p.q_user = [0.2, 0.35, 0.1]
    p.p_user_dest = [0.3, 0.15, 0.5]
    p.p_user_relay = [[0.9, 0.6], [0.5, 0.8], [0.7, 0.7]]
    p.q_relay = [0.6, 0.45]
    p.p_relay_dest = [0.85, 0.7]
    return p


def asym_fracs():
    return {
        "qu": [F(1, 5), F(7, 20), F(1, 10)],
        "pud": [F(3, 10), F(3, 20), F(1, 2)],
        "pur": [[F(9, 10), F(3, 5)], [F(1, 2), F(4, 5)], [F(7, 10), F(7, 10)]],
        "qr": [F(3, 5), F(9, 20)],
        "prd": [F(17, 20), F(7, 10)],
    }


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_dominant_s1_matches_enumeration(n):
    t = table1_like(n)
    p = default_collision_params(n)
    got = analysis.dominant_rates_s1(p)
    exact = enum_dominant_rates(t["qu"], t["pud"], t["pur"], t["qr"], t["prd"], 1)
    for key in ("lambda_0", "lambda_1", "mu", "p_empty", "lam"):
        assert rel_err(getattr(got, key), exact[key]) <= TOL


def test_dominant_rates_asymmetric_both_systems():
    p = asym_params()
    t = asym_fracs()
    for dummy, fn in [(1, analysis.dominant_rates_s1), (2, analysis.dominant_rates_s2)]:
        got = fn(p)
        exact = enum_dominant_rates(t["qu"], t["pud"], t["pur"], t["qr"], t["prd"], dummy)
        for key in ("lambda_0", "lambda_1", "mu", "p_empty", "lam"):
            assert rel_err(getattr(got, key), exact[key]) <= TOL


def test_formula_matches_joint_enumeration_exactly():
    # The per-user summand formula must equal the outcome-space enumeration
    # as rationals, with zero tolerance.
    t = asym_fracs()
    for relay in (1, 2):
        s = F(0)
        for i in range(3):
            others = F(1)
            for m in range(3):
                if m != i:
                    others *= 1 - t["qu"][m]
            j, k = relay - 1, 2 - relay
            s += (
                t["qu"][i]
                * t["pur"][i][j]
                * (1 - t["pud"][i])
                * ((1 - t["pur"][i][k]) + F(1, 2) * t["pur"][i][k])
                * others
            )
        assert s == enum_relay_arrival(t["qu"], t["pud"], t["pur"], relay)


def test_stock_two_user_values():
    # Frozen spot values for the stock 2-user setup.
    p = default_collision_params(2)
    s1 = analysis.dominant_rates_s1(p)
    assert abs(s1.lambda_0 - 0.0208828125) <= 1e-12
    assert abs(s1.lam - 0.01637867647058824) <= 1e-12
    assert abs(analysis.q_min(p, 1) - 0.21568627450980393) <= 1e-12
    b = analysis.throughput_bounds(p, 1)
    assert abs(b.per_user_upper - 0.18609375) <= 1e-12
    assert abs(b.per_user_lower - 0.0041871093749999975) <= 1e-12
    pc = default_collision_params(2, clustered=True)
    bc = analysis.throughput_bounds(pc, 1)
    assert abs(bc.per_user_upper - 0.215625) <= 1e-12


def test_service_rates_closed_form():
    p = asym_params()
    silent = (1 - 0.2) * (1 - 0.35) * (1 - 0.1)
    mu1, mu2 = analysis.service_rates(p, p_busy_r1=0.4, p_busy_r2=0.25)
    assert math.isclose(mu1, 0.6 * 0.85 * (1 - 0.45 * 0.25) * silent, rel_tol=TOL)
    assert math.isclose(mu2, 0.45 * 0.7 * (1 - 0.6 * 0.4) * silent, rel_tol=TOL)
    with pytest.raises(ValueError):
        analysis.service_rates(p, 1.5, 0.0)


def test_service_rate_edge_cases():
    p = default_collision_params(2)
    p.q_relay = [0.0, 0.85]
    mu1, _ = analysis.service_rates(p, 1.0, 1.0)
    assert mu1 == 0.0
    p.q_relay = [1.0, 1.0]
    mu1, mu2 = analysis.service_rates(p, 1.0, 1.0)
    assert mu1 == 0.0 and mu2 == 0.0


def test_direct_delivery_kills_relay_arrivals():
    p = default_collision_params(3)
    p.p_user_dest = [1.0, 1.0, 1.0]
    s1 = analysis.dominant_rates_s1(p)
    assert s1.lambda_0 == 0.0 and s1.lam == 0.0 and s1.p_empty == 1.0
    assert analysis.q_min(p, 1) == 0.0


def test_q_min_limits_and_oracle():
    p = asym_params()
    t = asym_fracs()
    for relay in (1, 2):
        assert rel_err(
            analysis.q_min(p, relay),
            enum_q_min(t["qu"], t["pud"], t["pur"], t["prd"], relay),
        ) <= TOL
    with pytest.raises(ValueError):
        analysis.q_min(p, 3)
    # Vanishing relay-destination link forces the threshold to 1.
    weak = default_collision_params(2)
    weak.p_relay_dest = [1e-12, 1e-12]
    assert analysis.q_min(weak, 1) > 0.999999999


def test_dominant_rates_unstable_branch():
    p = default_collision_params(2)
    p.q_relay = [0.85, 1e-6]  # relay 2 almost never serves
    s1 = analysis.dominant_rates_s1(p)
    assert not s1.stable
    assert s1.p_empty == 0.0
    assert s1.lam == s1.lambda_1


def test_lambda_r2_independent_of_q_r2():
    # Holds on the stable branch only: there lam = c * lambda_0 / (c + lambda_0)
    # with c = p_r2d (1 - q_r1) silent, so q_r2 cancels.
    base = None
    for q2 in (0.3, 0.6, 0.9):
        p = default_collision_params(2)
        p.q_relay = [0.85, q2]
        rates = analysis.dominant_rates_s1(p)
        assert rates.stable
        if base is None:
            base = rates.lam
        assert abs(rates.lam - base) <= 1e-14


def test_bounds_match_enumeration():
    p = asym_params()
    t = asym_fracs()
    for u in (1, 2, 3):
        b = analysis.throughput_bounds(p, u)
        exact = enum_upper_bound(t["qu"], t["pud"], t["pur"], u)
        assert rel_err(b.per_user_upper, exact) <= TOL
        assert rel_err(b.per_user_lower, exact * (1 - t["qr"][0]) * (1 - t["qr"][1])) <= TOL
        assert b.per_user_lower <= b.per_user_upper


def test_clustered_bounds_match_enumeration():
    for n in (2, 4, 6):
        p = default_collision_params(n, clustered=True)
        t = table1_like(n)
        cluster = half_clusters(n)
        for u in range(1, n + 1):
            b = analysis.throughput_bounds(p, u)
            assert b.clustered
            exact = enum_clustered_upper(t["qu"], t["pud"], t["pur"], cluster, u)
            assert rel_err(b.per_user_upper, exact) <= TOL


def test_clustered_bounds_edges():
    p = default_collision_params(4, clustered=True)
    p.q_user = [0.0, 0.25, 0.25, 0.25]
    assert analysis.throughput_bounds(p, 1).per_user_upper == 0.0
    p2 = default_collision_params(4, clustered=True)
    p2.p_user_dest = [0.0] * 4
    p2.p_user_relay = [[1.0, 1.0]] * 4
    b = analysis.throughput_bounds(p2, 1)
    # Only the same-cluster peer can spoil the relay path.
    assert math.isclose(b.per_user_upper, 0.25 * (1 - 0.25), rel_tol=TOL)
    with pytest.raises(ValueError):
        analysis.clustered_throughput_bounds(default_collision_params(4), 1)


def test_no_relay_throughput():
    p = asym_params()
    assert math.isclose(
        analysis.no_relay_throughput(p, 2),
        0.35 * 0.15 * (1 - 0.2) * (1 - 0.1),
        rel_tol=TOL,
    )


def test_bounds_collapse_when_relays_silent():
    p = default_collision_params(3)
    p.q_relay = [0.0, 0.0]
    b = analysis.throughput_bounds(p, 1)
    assert b.per_user_lower == b.per_user_upper


def test_region_axis_intercepts_and_membership():
    p = default_collision_params(2)
    r = analysis.stability_region(p, resolution=50)
    silent = (1 - 0.25) ** 2
    cap1 = 0.85 * 0.9 * silent  # lambda_r2 = 0 endpoint of the S1 boundary
    first = r.boundary_s1[0]
    assert math.isclose(first[0], cap1, rel_tol=1e-12) and first[1] == 0.0
    assert r.contains(0.0, 0.0)
    assert r.contains(cap1 * 0.5, 0.0)
    assert not r.contains(cap1 * 1.01, 0.0)
    # Points just inside/outside the sampled S1 boundary.
    for lam1, lam2 in r.boundary_s1[1:-1]:
        assert r.in_region_1(lam1 * 0.999, lam2 * 0.999)
        assert not r.in_region_1(lam1 * 1.001, lam2 * 1.001)
    assert len(r.boundary_s1) == 50 and len(r.boundary_s2) == 50
    with pytest.raises(ValueError):
        analysis.stability_region(p, resolution=1)


@pytest.mark.parametrize("n_small,n_big", [(2, 4), (4, 8)])
def test_regions_shrink_with_more_users(n_small, n_big):
    small = analysis.stability_region(default_collision_params(n_small), resolution=40)
    big = analysis.stability_region(default_collision_params(n_big), resolution=40)
    for lam1, lam2 in big.boundary_s1 + big.boundary_s2:
        assert small.contains(lam1 * 0.999, lam2 * 0.999)


def test_symmetric_params_give_mirrored_regions():
    p = default_collision_params(3)
    r = analysis.stability_region(p, resolution=30)
    assert math.isclose(r.q_r1_min, r.q_r2_min, rel_tol=1e-12)
    for (a1, a2), (b1, b2) in zip(r.boundary_s1, r.boundary_s2):
        assert math.isclose(a1, b2, rel_tol=1e-12)
        assert math.isclose(a2, b1, rel_tol=1e-12)


def test_q_min_is_the_stability_fixed_point():
    # With the relay's own silence folded into the arrival side, the busy-queue
    # arrival rate is (1 - q) * S and the service rate q * p_r1d * silent_users.
    # q_min is exactly where they cross, so nudging q by 1e-6 flips the order.
    p = default_collision_params(4)
    qm = analysis.q_min(p, 1)
    silent = (1 - 0.25) ** 4
    s = analysis._arrival_sum(p, 1)
    assert math.isclose(qm, s / (s + 0.9 * silent), rel_tol=1e-12)
    for eps in (1e-6, -1e-6):
        q = qm + eps
        stable = (1 - q) * s < q * 0.9 * silent
        assert stable == (eps > 0)
