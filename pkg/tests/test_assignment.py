import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from chargernet.assignment import (InstanceTooLargeError, NoChargerError, brute_force_batch,
                                   evaluate_batch, individual_select, nearest, optimal_batch,
                                   slot_costs, total_cost)
from chargernet.cost import ChargerStatus, estimated_cost
from chargernet.scenario import ChargerSpec, UserRequest, Weights, build_default_scenario

W = Weights()


def user(uid=0, pos=(0.0, 0.0), t=20.0):
    return UserRequest(uid, 0.0, 1, pos, t)


def st_(cid, T=0.0, p=0.33, pos=(0.0, 0.0), n=3):
    return ChargerStatus(ChargerSpec(cid, 1, pos, capacity=n, price=p), T, 0, 0)


def random_instance(rng, n_users, n_chargers):
    """Random T in [0, 60], p in [0.25, 1.53]; positions so that D stays within [0, 7.5]."""
    statuses = [st_(j + 1, T=rng.uniform(0, 60), p=rng.uniform(0.25, 1.53),
                    pos=(rng.uniform(0, 375), rng.uniform(0, 375)), n=rng.choice([1, 2, 3]))
                for j in range(n_chargers)]
    users = [user(i, (rng.uniform(0, 375), rng.uniform(0, 375))) for i in range(n_users)]
    return users, statuses


# --- nearest --------------------------------------------------------------

def test_nearest_examples():
    sc = build_default_scenario()
    only = sc.chargers[:1]
    assert nearest(user(pos=(900.0, 900.0)), only).charger == 1
    u5 = UserRequest(0, 0.0, 5, sc.grid.center(5), 20.0)
    assert nearest(u5, sc.chargers).charger == 5
    mid = tuple((a + b) / 2 for a, b in zip(sc.grid.center(2), sc.grid.center(5)))
    assert math.dist(mid, sc.grid.center(2)) == math.dist(mid, sc.grid.center(5))
    pair = [sc.chargers[4], sc.chargers[1]]
    assert nearest(UserRequest(0, 0.0, 1, mid, 20.0), pair).charger == 2
    # on the full grid that midpoint is the corner shared by areas 1, 2, 5, 6
    assert nearest(UserRequest(0, 0.0, 1, mid, 20.0), sc.chargers).charger == 1


def test_nearest_empty():
    with pytest.raises(NoChargerError):
        nearest(user(), [])


# --- individual -----------------------------------------------------------

def test_individual_picks_cheapest_when_only_price_differs():
    statuses = [st_(1, p=0.9), st_(2, p=0.4), st_(3, p=0.7)]
    assert individual_select(user(), statuses, W).charger == 2


def test_individual_effort_only_matches_nearest():
    sc = build_default_scenario()
    rng = random.Random(3)
    for _ in range(50):
        statuses = [ChargerStatus(c, rng.uniform(0, 60), 0, 0) for c in sc.chargers]
        u = user(pos=(rng.uniform(0, 500), rng.uniform(0, 500)))
        assert individual_select(u, statuses, Weights(0, 0, 1)).charger == nearest(u, sc.chargers).charger


def test_individual_three_charger_brute_force():
    statuses = [st_(1, T=45, p=0.33, pos=(0, 0)), st_(2, T=5, p=1.2, pos=(250, 0)),
                st_(3, T=20, p=0.6, pos=(0, 125))]
    u = user(pos=(10.0, 10.0))
    costs = {s.charger.id: (s.committed_energy + 20) / 3 + s.charger.price * 20
             + math.dist(u.position, s.charger.position) / 100 for s in statuses}
    d = individual_select(u, statuses, W)
    assert d.charger == min(costs, key=costs.get)
    assert d.estimate.overall == pytest.approx(costs[d.charger])


def test_individual_tie_breaks_on_lowest_id():
    statuses = [st_(3), st_(1), st_(2)]
    assert individual_select(user(), statuses, W).charger == 1


def test_individual_empty():
    with pytest.raises(NoChargerError):
        individual_select(user(), [], W)


# --- batch ----------------------------------------------------------------

def test_batch_of_one_equals_individual():
    rng = random.Random(0)
    for _ in range(100):
        users, statuses = random_instance(rng, 1, 4)
        ind = individual_select(users[0], statuses, W)
        assert optimal_batch(users, statuses, W)[0].charger == ind.charger
        assert brute_force_batch(users, statuses, W)[0].charger == ind.charger


def test_two_users_split_across_identical_chargers():
    users = [user(0), user(1)]
    statuses = [st_(1), st_(2)]
    # hand enumeration of the four maps
    same = (20 / 3 + 6.6) + (40 / 3 + 6.6)
    split = 2 * (20 / 3 + 6.6)
    assert split < same
    dec = optimal_batch(users, statuses, W)
    assert {d.charger for d in dec} == {1, 2}
    assert total_cost(dec) == pytest.approx(split)
    assert [d.charger for d in brute_force_batch(users, statuses, W)] == [1, 2]


def test_batch_equals_brute_force_4x3():
    rng = random.Random(42)
    for _ in range(50):
        users, statuses = random_instance(rng, 4, 3)
        assert total_cost(optimal_batch(users, statuses, W)) == total_cost(brute_force_batch(users, statuses, W))


def test_brute_force_equal_costs_lexicographic():
    users = [user(0), user(1)]
    statuses = [st_(1, n=10**9), st_(2, n=10**9)]
    # with huge capacity the queue term vanishes below float resolution of the ties
    statuses = [ChargerStatus(s.charger, 0.0, 0, 0) for s in statuses]
    w = Weights(0.0, 1.0, 1.0)
    assert [d.charger for d in brute_force_batch(users, statuses, w)] == [1, 1]


def test_brute_force_guard():
    users = [user(i) for i in range(7)]
    statuses = [st_(j) for j in range(1, 9)]
    with pytest.raises(InstanceTooLargeError):
        brute_force_batch(users, statuses, W)


def test_empty_inputs():
    assert optimal_batch([], [st_(1)], W) == []
    with pytest.raises(NoChargerError):
        optimal_batch([user()], [], W)
    with pytest.raises(NoChargerError):
        brute_force_batch([user()], [], W)


def test_mixed_demands_rejected():
    with pytest.raises(ValueError):
        optimal_batch([user(0, t=20), user(1, t=30)], [st_(1)], W)


def test_slot_costs_nondecreasing():
    rng = random.Random(7)
    users, statuses = random_instance(rng, 5, 4)
    rows = slot_costs(users, statuses, W)
    for row in rows:
        for j in range(4):
            slots = row[j * 5:(j + 1) * 5]
            assert all(a <= b for a, b in zip(slots, slots[1:]))


def test_slot_matching_agrees_with_scipy():
    rng = random.Random(11)
    for _ in range(30):
        users, statuses = random_instance(rng, 5, 4)
        cost = np.array(slot_costs(users, statuses, W))
        r, c = linear_sum_assignment(cost)
        ours = total_cost(optimal_batch(users, statuses, W))
        assert ours == pytest.approx(cost[r, c].sum(), rel=1e-12)


def sequential(users, statuses, pick):
    """Assign users one by one, folding each choice into the snapshot the next user sees."""
    statuses = sorted(statuses, key=lambda s: s.charger.id)
    live = {s.charger.id: s for s in statuses}
    choice = []
    for u in users:
        cid = pick(u, list(live.values()))
        s = live[cid]
        live[cid] = ChargerStatus(s.charger, s.committed_energy + u.demand, 0, 0)
        choice.append([x.charger.id for x in statuses].index(cid))
    return evaluate_batch(users, statuses, W, choice)[0]


@settings(max_examples=60)
@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(1, 4))
def test_optimal_dominates_sequential_schemes(seed, n_users, n_chargers):
    users, statuses = random_instance(random.Random(seed), n_users, n_chargers)
    best = total_cost(optimal_batch(users, statuses, W))
    assert best == total_cost(brute_force_batch(users, statuses, W))
    ind = sequential(users, statuses, lambda u, s: individual_select(u, s, W).charger)
    near = sequential(users, statuses, lambda u, s: nearest(u, [x.charger for x in s]).charger)
    assert best <= ind + 1e-9
    assert best <= near + 1e-9


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.permutations(range(4)))
def test_permuting_users_keeps_optimum(seed, perm):
    users, statuses = random_instance(random.Random(seed), 4, 3)
    a = total_cost(optimal_batch(users, statuses, W))
    b = total_cost(optimal_batch([users[i] for i in perm], statuses, W))
    assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.floats(0.1, 10))
def test_weight_scaling_keeps_choices(seed, c):
    rng = random.Random(seed)
    users, statuses = random_instance(rng, 3, 4)
    w = Weights(rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2))
    a = [d.charger for d in brute_force_batch(users, statuses, w)]
    b = [d.charger for d in brute_force_batch(users, statuses, w.scaled(c))]
    ta = total_cost(brute_force_batch(users, statuses, w))
    tb = total_cost(brute_force_batch(users, statuses, w.scaled(c)))
    assert tb == pytest.approx(c * ta, rel=1e-9)
    if a != b:  # only a float-level tie may flip the choice
        tied = evaluate_batch(users, sorted(statuses, key=lambda s: s.charger.id), w,
                              [x - 1 for x in b])[0]
        assert tied == pytest.approx(ta, rel=1e-9)


def test_decision_fields():
    dec = optimal_batch([user(5)], [st_(1)], W, now=12.5)[0]
    assert (dec.user, dec.charger, dec.scheme, dec.decided_at) == (5, 1, "optimal", 12.5)
    assert dec.estimate == estimated_cost(20, st_(1), (0.0, 0.0), W)
