"""Flat macro-action catalog and per-state availability mask.

119 actions in five categories with a stable, documented index order:

    0..5    Building: SpawningPool, RoachWarren, HydraliskDen, Extractor,
            Hatchery, SpineCrawler
    6..11   Production: Drone, Overlord, Queen, Zergling, Roach, Hydralisk
    12..15  Upgrading: ZerglingSpeed, MissileWeapons1, GroundArmor1, Burrow
    16..18  Harvesting: CollectMinerals, CollectGas, InjectLarvas
    19..118 Combat(src, dst) row-major over the ten zones A..I and J

Combat(J, J) and CollectMinerals are always legal, so the mask is never
all-zero.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .types import COMBAT_KINDS, UnitKind, Upgrade, ZoneId


class Category(enum.Enum):
    Building = "building"
    Production = "production"
    Upgrading = "upgrading"
    Harvesting = "harvesting"
    Combat = "combat"


class Harvest(enum.Enum):
    CollectMinerals = "collect_minerals"
    CollectGas = "collect_gas"
    InjectLarvas = "inject_larvas"


@dataclass(frozen=True)
class MacroAction:
    index: int
    name: str
    category: Category
    kind: UnitKind | None = None
    tech: Upgrade | None = None
    harvest: Harvest | None = None
    src: ZoneId | None = None
    dst: ZoneId | None = None


BUILD_ORDER = (
    UnitKind.SpawningPool, UnitKind.RoachWarren, UnitKind.HydraliskDen,
    UnitKind.Extractor, UnitKind.Hatchery, UnitKind.SpineCrawler,
)
PRODUCE_ORDER = (
    UnitKind.Drone, UnitKind.Overlord, UnitKind.Queen,
    UnitKind.Zergling, UnitKind.Roach, UnitKind.Hydralisk,
)
UPGRADE_ORDER = (
    Upgrade.ZerglingSpeed, Upgrade.MissileWeapons1,
    Upgrade.GroundArmor1, Upgrade.Burrow,
)
HARVEST_ORDER = (Harvest.CollectMinerals, Harvest.CollectGas, Harvest.InjectLarvas)

COMBAT_BASE = 19
N_ACTIONS = 119


def _build_catalog() -> tuple[MacroAction, ...]:
    out = []
    for k in BUILD_ORDER:
        out.append(MacroAction(len(out), f"Build{k.name}", Category.Building, kind=k))
    for k in PRODUCE_ORDER:
        out.append(MacroAction(len(out), f"Produce{k.name}", Category.Production, kind=k))
    for t in UPGRADE_ORDER:
        out.append(MacroAction(len(out), f"Research{t.name}", Category.Upgrading, tech=t))
    for hv in HARVEST_ORDER:
        out.append(MacroAction(len(out), hv.name.replace("_", ""), Category.Harvesting,
                               harvest=hv))
    for src in ZoneId:
        for dst in ZoneId:
            out.append(MacroAction(
                len(out), f"Combat_{src.name}_{dst.name}", Category.Combat,
                src=src, dst=dst))
    assert len(out) == N_ACTIONS
    return tuple(out)


CATALOG: tuple[MacroAction, ...] = _build_catalog()

COLLECT_MINERALS = 16
COLLECT_GAS = 17
INJECT_LARVAS = 18
COMBAT_JJ = COMBAT_BASE + int(ZoneId.J) * 10 + int(ZoneId.J)


def catalog() -> tuple[MacroAction, ...]:
    return CATALOG


def combat_index(src: ZoneId, dst: ZoneId) -> int:
    return COMBAT_BASE + int(src) * 10 + int(dst)


def action_by_name(name: str) -> MacroAction:
    for a in CATALOG:
        if a.name == name:
            return a
    raise KeyError(name)


def available_mask(game, player: int) -> np.ndarray:
    """Boolean vector over the catalog: set iff the action is not a no-op.

    Building/Production/Upgrading mirror the tech oracle; CollectGas needs a
    working extractor on a non-empty geyser plus a drone; InjectLarvas needs
    a ready queen and an uninjected base; Combat(src, dst) needs an own
    combat unit inside src (J means anywhere).  CollectMinerals and
    Combat(J, J) are unconditionally legal.
    """
    mask = np.zeros(N_ACTIONS, dtype=bool)
    st = game.state

    for i, kind in enumerate(BUILD_ORDER):
        mask[i] = game.availability(player, kind).ok
    for i, kind in enumerate(PRODUCE_ORDER):
        mask[6 + i] = game.availability(player, kind).ok
    for i, tech in enumerate(UPGRADE_ORDER):
        mask[12 + i] = game.availability(player, tech).ok

    mask[COLLECT_MINERALS] = True

    have_drone = False
    live_extractor = False
    ready_queen = False
    open_base = False
    zone_occupancy = np.zeros(10, dtype=bool)
    zone_of = game.map.zone_of
    for u in st.units.values():
        if u.owner != player:
            continue
        if u.progress != 0:
            continue
        k = u.kind
        if k == UnitKind.Drone:
            have_drone = True
        elif k == UnitKind.Extractor:
            if not live_extractor:
                for r in st.resources.values():
                    if r.is_gas and r.extractor == u.id and r.remaining > 0:
                        live_extractor = True
                        break
        elif k == UnitKind.Queen:
            if u.phase == 0 and not u.burrowed:
                ready_queen = True
        elif k == UnitKind.Hatchery:
            if u.aux == 0:
                open_base = True
        if k in COMBAT_KINDS and not u.burrowed:
            zone_occupancy[int(zone_of(u.x, u.y))] = True

    mask[COLLECT_GAS] = live_extractor and have_drone
    mask[INJECT_LARVAS] = ready_queen and open_base

    any_combat = bool(zone_occupancy.any())
    zone_occupancy[int(ZoneId.J)] = any_combat
    for src in range(10):
        if zone_occupancy[src]:
            base = COMBAT_BASE + src * 10
            mask[base:base + 10] = True
    mask[COMBAT_JJ] = True
    return mask
