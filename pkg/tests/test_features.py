"""Feature encoding: spatial count maps, scalar vector, terminal reward."""
from __future__ import annotations

import json
import random

import numpy as np

from minizerg import features
from minizerg.actions import N_ACTIONS
from minizerg.engine import new_game
from minizerg.features import (
    GRID_N,
    HISTORY_K,
    N_CHANNELS,
    N_KINDS,
    SCALAR_LEN,
    encode,
    feature_spec,
    flat_input,
    input_size,
    reward,
)
from minizerg.types import ONGOING, TIE, UnitKind, win


def test_shapes_and_dtypes():
    g = new_game(seed=0)
    spatial, vec = encode(g.visible_state(0))
    assert spatial.shape == (N_CHANNELS, GRID_N, GRID_N)
    assert vec.shape == (SCALAR_LEN,)
    assert spatial.dtype == np.float64 and vec.dtype == np.float64
    assert SCALAR_LEN == 507 and N_CHANNELS == 28 and GRID_N == 8


def test_fresh_state_scalars():
    g = new_game(seed=0)
    _, vec = encode(g.visible_state(0))
    assert vec[0] == 50 / 2000.0            # minerals
    assert vec[1] == 0.0                    # gas
    assert vec[2] == 12 / 100.0             # food used: 12 drones
    assert vec[3] == 14 / 100.0             # food cap: hatchery 6 + overlord 8
    assert vec[4 + int(UnitKind.Drone)] == 12 / 50.0
    assert vec[4 + int(UnitKind.Hatchery)] == 1 / 50.0
    assert vec[4 + int(UnitKind.Larva)] == 3 / 50.0
    # enemy block all zero under fog
    assert not vec[4 + N_KINDS:4 + 2 * N_KINDS].any()
    assert vec[4 + 2 * N_KINDS] == 0.0      # tick 0
    assert not vec[4 + 2 * N_KINDS + 1:].any()   # empty history


def test_corner_coordinates_land_in_edge_cells():
    g = new_game(seed=0)
    g.spawn(UnitKind.Roach, 0, 63.0, 63.0)
    g.spawn(UnitKind.Roach, 0, 0.5, 0.5)
    spatial, _ = encode(g.visible_state(0))
    ch = int(UnitKind.Roach)
    assert spatial[ch, 7, 7] == 1.0
    assert spatial[ch, 0, 0] == 1.0


def test_own_can_attack_channel_counts_armed_units_only():
    g = new_game(seed=0)
    spatial, _ = encode(g.visible_state(0))
    # drones are armed, the overlord and larvas are not
    assert spatial[2 * N_KINDS].sum() == 12


def test_action_history_one_hot_layout():
    g = new_game(seed=0)
    obs = g.visible_state(0)
    base = 4 + 2 * N_KINDS + 1
    _, vec = encode(obs, action_history=[3, 8])
    assert vec[base + 8] == 1.0                        # slot 0: most recent
    assert vec[base + N_ACTIONS + 3] == 1.0            # slot 1: previous
    assert vec[base:].sum() == 2.0
    _, vec = encode(obs, action_history=[1, 2, 3, 4, 5, 6])
    hot = np.flatnonzero(vec[base:])
    assert list(hot) == [6, N_ACTIONS + 5, 2 * N_ACTIONS + 4, 3 * N_ACTIONS + 3]


def test_scalars_clip_to_unit_interval():
    g = new_game(seed=0)
    g.grant(0, 10_000_000, 10_000_000)
    _, vec = encode(g.visible_state(0))
    assert vec[0] == 1.0 and vec[1] == 1.0
    assert vec.min() >= 0.0 and vec.max() <= 1.0


def test_encode_is_pure():
    g = new_game(seed=0)
    obs = g.visible_state(0)
    s1, v1 = encode(obs, [7])
    s2, v2 = encode(obs, [7])
    assert np.array_equal(s1, s2) and np.array_equal(v1, v2)


def test_channel_sums_match_population_over_random_states():
    # conservation fuzz: every unit lands in exactly one cell of exactly one
    # kind channel, so channel sums equal observed populations
    g = new_game(seed=42)
    rng = random.Random(42)
    kinds = list(UnitKind)
    states = 0
    while states < 1000:
        for _ in range(rng.randrange(1, 4)):
            kind = rng.choice(kinds)
            owner = rng.randrange(2)
            g.spawn(kind, owner, rng.uniform(0.5, 63.5), rng.uniform(0.5, 63.5))
        if rng.random() < 0.3:
            g.step(((), ()))
            if not g.outcome().ongoing:
                g = new_game(seed=rng.randrange(1 << 30))
        player = rng.randrange(2)
        obs = g.visible_state(player)
        spatial, vec = encode(obs)
        own_total = sum(spatial[k].sum() for k in range(N_KINDS))
        enemy_total = sum(spatial[N_KINDS + k].sum() for k in range(N_KINDS))
        assert own_total == len(obs.own_units)
        assert enemy_total == len(obs.enemy_units)
        for k in range(N_KINDS):
            n_own = sum(1 for u in obs.own_units if int(u.kind) == k)
            assert spatial[k].sum() == n_own
            assert vec[4 + k] == min(n_own / 50.0, 1.0)
        armed = sum(1 for u in obs.own_units if u.dmg > 0)
        assert spatial[2 * N_KINDS].sum() == armed
        states += 1
        if len(g.state.units) > 700:
            g = new_game(seed=rng.randrange(1 << 30))


def test_flat_input_lengths():
    g = new_game(seed=0)
    obs = g.visible_state(0)
    assert flat_input(obs).shape == (input_size(),)
    assert input_size() == SCALAR_LEN
    wide = flat_input(obs, include_spatial=True)
    assert wide.shape == (input_size(include_spatial=True),)
    assert input_size(include_spatial=True) == SCALAR_LEN + 28 * 64
    assert np.array_equal(wide[:SCALAR_LEN], flat_input(obs))


def test_reward_is_ternary_and_terminal_only():
    assert reward(ONGOING, win(0), 0) == 1.0
    assert reward(ONGOING, win(0), 1) == -1.0
    assert reward(ONGOING, win(1), 0) == -1.0
    assert reward(ONGOING, TIE, 0) == 0.0
    assert reward(ONGOING, ONGOING, 0) == 0.0
    # reward only fires on the transition tick, not afterwards
    assert reward(win(0), win(0), 0) == 0.0


def test_feature_spec_document():
    doc = json.loads(feature_spec())
    assert doc["version"] == "minizerg-features/v1"
    assert doc["scalar_len"] == SCALAR_LEN
    assert doc["history_k"] == HISTORY_K
    assert doc["n_actions"] == N_ACTIONS
    assert len(doc["spatial"]["channels"]) == N_CHANNELS
    # offsets tile the vector with no gaps or overlaps
    spans = sorted((e["offset"], e["length"]) for e in doc["scalars"])
    cursor = 0
    for off, length in spans:
        assert off == cursor
        cursor += length
    assert cursor == SCALAR_LEN
    # a fresh dump round-trips unchanged
    assert json.loads(feature_spec()) == doc
