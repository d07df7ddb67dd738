"""Observation encoding: spatial count maps, scalar vector, terminal reward.

Spatial maps are 28 channels of 8x8 counts (own per kind, visible enemy per
kind, one can-attack channel per side).  The scalar vector is the default
network input: economy, unit counts, game clock and the last four macro
actions one-hot.  All scalars are min-max scaled by the documented constants
and clipped to [0, 1].  ``feature_spec`` dumps the exact layout so tests and
tools can agree on offsets without importing this module's internals.
"""
from __future__ import annotations

import json

import numpy as np

from .actions import N_ACTIONS
from .types import UnitKind

FEATURE_SPEC_VERSION = "minizerg-features/v1"

GRID_N = 8
HISTORY_K = 4
N_KINDS = len(UnitKind)                      # 13
N_CHANNELS = 2 * N_KINDS + 2                 # 28

MINERALS_SCALE = 2000.0
GAS_SCALE = 2000.0
FOOD_SCALE = 100.0
COUNT_SCALE = 50.0

SCALAR_LEN = 4 + 2 * N_KINDS + 1 + HISTORY_K * N_ACTIONS   # 507


def encode(obs, action_history=()) -> tuple[np.ndarray, np.ndarray]:
    """(SpatialMaps, ScalarVec) for one player's observation.

    ``action_history`` holds up to the last K macro action indices, most
    recent last; older entries beyond K are ignored.
    """
    spatial = np.zeros((N_CHANNELS, GRID_N, GRID_N), dtype=np.float64)
    cell = obs.map.size / GRID_N
    own_counts = np.zeros(N_KINDS, dtype=np.float64)
    enemy_counts = np.zeros(N_KINDS, dtype=np.float64)

    for u in obs.own_units:
        cx = min(int(u.x / cell), GRID_N - 1)
        cy = min(int(u.y / cell), GRID_N - 1)
        k = int(u.kind)
        spatial[k, cy, cx] += 1.0
        own_counts[k] += 1.0
        if u.dmg > 0:
            spatial[2 * N_KINDS, cy, cx] += 1.0
    for u in obs.enemy_units:
        cx = min(int(u.x / cell), GRID_N - 1)
        cy = min(int(u.y / cell), GRID_N - 1)
        k = int(u.kind)
        spatial[N_KINDS + k, cy, cx] += 1.0
        enemy_counts[k] += 1.0
        if u.dmg > 0:
            spatial[2 * N_KINDS + 1, cy, cx] += 1.0

    vec = np.zeros(SCALAR_LEN, dtype=np.float64)
    econ = obs.economy
    vec[0] = econ.minerals / MINERALS_SCALE
    vec[1] = econ.gas / GAS_SCALE
    vec[2] = econ.food_used / FOOD_SCALE
    vec[3] = econ.food_cap / FOOD_SCALE
    vec[4:4 + N_KINDS] = own_counts / COUNT_SCALE
    vec[4 + N_KINDS:4 + 2 * N_KINDS] = enemy_counts / COUNT_SCALE
    vec[4 + 2 * N_KINDS] = obs.tick / 28_800.0
    base = 4 + 2 * N_KINDS + 1
    recent = list(action_history)[-HISTORY_K:]
    for slot, a in enumerate(reversed(recent)):   # slot 0 = most recent
        vec[base + slot * N_ACTIONS + int(a)] = 1.0
    np.clip(vec, 0.0, 1.0, out=vec)
    return spatial, vec


def flat_input(obs, action_history=(), include_spatial: bool = False) -> np.ndarray:
    """Network input vector; spatial maps are appended only on request."""
    spatial, vec = encode(obs, action_history)
    if not include_spatial:
        return vec
    return np.concatenate([vec, (spatial / COUNT_SCALE).reshape(-1)])


def input_size(include_spatial: bool = False) -> int:
    if not include_spatial:
        return SCALAR_LEN
    return SCALAR_LEN + N_CHANNELS * GRID_N * GRID_N


def reward(prev_outcome, new_outcome, player: int) -> float:
    """Ternary terminal reward: +1 win, -1 loss, 0 tie and every other step."""
    if prev_outcome.ongoing and not new_outcome.ongoing:
        if new_outcome.winner == player:
            return 1.0
        if new_outcome.winner is not None:
            return -1.0
    return 0.0


def feature_spec() -> str:
    """Versioned JSON description of the exact layout and scaling."""
    entries = [
        {"name": "minerals", "offset": 0, "length": 1, "scale": MINERALS_SCALE},
        {"name": "gas", "offset": 1, "length": 1, "scale": GAS_SCALE},
        {"name": "food_used", "offset": 2, "length": 1, "scale": FOOD_SCALE},
        {"name": "food_cap", "offset": 3, "length": 1, "scale": FOOD_SCALE},
        {"name": "own_count_per_kind", "offset": 4, "length": N_KINDS,
         "scale": COUNT_SCALE, "order": [k.name for k in UnitKind]},
        {"name": "enemy_count_per_kind", "offset": 4 + N_KINDS, "length": N_KINDS,
         "scale": COUNT_SCALE, "order": [k.name for k in UnitKind]},
        {"name": "tick_fraction", "offset": 4 + 2 * N_KINDS, "length": 1,
         "scale": 28_800.0},
        {"name": "recent_actions_one_hot", "offset": 4 + 2 * N_KINDS + 1,
         "length": HISTORY_K * N_ACTIONS, "scale": 1.0,
         "note": "K=4 slots of 119, slot 0 most recent"},
    ]
    channels = (
        [f"own_{k.name}" for k in UnitKind]
        + [f"enemy_{k.name}" for k in UnitKind]
        + ["own_can_attack", "enemy_can_attack"]
    )
    return json.dumps({
        "version": FEATURE_SPEC_VERSION,
        "scalar_len": SCALAR_LEN,
        "scalars": entries,
        "spatial": {"n": GRID_N, "channels": channels},
        "history_k": HISTORY_K,
        "n_actions": N_ACTIONS,
    }, indent=2)
