"""Prerequisite tree: per-kind costs, build times, builders and prerequisites.

The availability oracle ``tech_check`` answers whether a player could start
building/producing/researching something right now, with the failure reason
ordered prerequisites > resources > builder > food.
"""
from __future__ import annotations

from dataclasses import dataclass

from .types import (
    Availability,
    AvailabilityResult,
    UnitKind,
    Upgrade,
)


@dataclass(frozen=True)
class TechNode:
    kind: UnitKind
    mineral_cost: int
    gas_cost: int
    food_delta: int           # >0 consumes supply, <0 grants capacity
    build_ticks: int
    builder: UnitKind
    prerequisites: frozenset[UnitKind]


@dataclass(frozen=True)
class UpgradeNode:
    tech: Upgrade
    mineral_cost: int
    gas_cost: int
    research_ticks: int
    researcher: UnitKind
    prerequisites: frozenset[UnitKind]


def _n(kind, m, g, food, ticks, builder, prereqs=()):
    return TechNode(kind, m, g, food, ticks, builder, frozenset(prereqs))


TECH_TREE: dict[UnitKind, TechNode] = {n.kind: n for n in [
    _n(UnitKind.Drone,        50, 0, 1, 192, UnitKind.Larva),
    _n(UnitKind.Overlord,    100, 0, -8, 260, UnitKind.Larva),
    _n(UnitKind.Queen,       150, 0, 2, 800, UnitKind.Hatchery, [UnitKind.SpawningPool]),
    _n(UnitKind.Zergling,     25, 0, 1, 272, UnitKind.Larva, [UnitKind.SpawningPool]),
    _n(UnitKind.Roach,        75, 25, 2, 304, UnitKind.Larva, [UnitKind.RoachWarren]),
    _n(UnitKind.Hydralisk,   100, 50, 2, 400, UnitKind.Larva, [UnitKind.HydraliskDen]),
    # Larvas are spawned by hatchery timers, never built; the node documents
    # the spawn period and keeps the enumeration total.
    _n(UnitKind.Larva,         0, 0, 0, 180, UnitKind.Hatchery),
    _n(UnitKind.Hatchery,    300, 0, -6, 1136, UnitKind.Drone),
    _n(UnitKind.SpawningPool, 200, 0, 0, 736, UnitKind.Drone, [UnitKind.Hatchery]),
    _n(UnitKind.RoachWarren,  150, 0, 0, 624, UnitKind.Drone, [UnitKind.SpawningPool]),
    _n(UnitKind.HydraliskDen, 100, 100, 0, 640, UnitKind.Drone, [UnitKind.SpawningPool]),
    _n(UnitKind.Extractor,    25, 0, 0, 320, UnitKind.Drone, [UnitKind.Hatchery]),
    _n(UnitKind.SpineCrawler, 100, 0, 0, 480, UnitKind.Drone, [UnitKind.SpawningPool]),
]}

UPGRADE_TREE: dict[Upgrade, UpgradeNode] = {n.tech: n for n in [
    UpgradeNode(Upgrade.ZerglingSpeed, 100, 100, 1160, UnitKind.SpawningPool, frozenset()),
    UpgradeNode(Upgrade.MissileWeapons1, 100, 100, 1200, UnitKind.RoachWarren, frozenset()),
    UpgradeNode(Upgrade.GroundArmor1, 100, 100, 1200, UnitKind.RoachWarren, frozenset()),
    UpgradeNode(Upgrade.Burrow, 100, 100, 800, UnitKind.Hatchery, frozenset()),
]}


def assert_acyclic() -> None:
    """Raise if the prerequisite graph has a cycle (import-time sanity)."""
    seen: dict[UnitKind, int] = {}

    def visit(k: UnitKind) -> None:
        state = seen.get(k, 0)
        if state == 1:
            raise ValueError(f"prerequisite cycle through {k.name}")
        if state == 2:
            return
        seen[k] = 1
        for p in TECH_TREE[k].prerequisites:
            visit(p)
        seen[k] = 2

    for kind in TECH_TREE:
        visit(kind)


assert_acyclic()


def tech_check(game, player: int, kind: UnitKind | Upgrade) -> AvailabilityResult:
    """Availability of starting ``kind`` for ``player`` right now.

    Total function: every input maps to a status, never an exception.
    """
    if isinstance(kind, Upgrade):
        return _upgrade_check(game, player, kind)
    node = TECH_TREE[kind]
    missing = tuple(
        p for p in sorted(node.prerequisites)
        if not game.has_completed(player, p)
    )
    if missing:
        return AvailabilityResult(Availability.MissingPrereq, missing)
    econ = game.state.economies[player]
    if econ.minerals < node.mineral_cost or econ.gas < node.gas_cost:
        return AvailabilityResult(Availability.InsufficientResources)
    if not game.has_eligible_builder(player, node.builder, for_kind=kind):
        return AvailabilityResult(Availability.NoBuilder)
    if node.food_delta > 0 and econ.food_used + node.food_delta > econ.food_cap:
        return AvailabilityResult(Availability.FoodBlocked)
    return AvailabilityResult(Availability.Ok)


def _upgrade_check(game, player: int, tech: Upgrade) -> AvailabilityResult:
    node = UPGRADE_TREE[tech]
    # Finished or in-flight research can never be started again; reported as
    # NoBuilder since no researcher has the action left.
    if game.upgrade_done_or_pending(player, tech):
        return AvailabilityResult(Availability.NoBuilder)
    missing = tuple(
        p for p in sorted(node.prerequisites)
        if not game.has_completed(player, p)
    )
    if missing:
        return AvailabilityResult(Availability.MissingPrereq, missing)
    econ = game.state.economies[player]
    if econ.minerals < node.mineral_cost or econ.gas < node.gas_cost:
        return AvailabilityResult(Availability.InsufficientResources)
    if not game.has_eligible_builder(player, node.researcher, for_tech=tech):
        return AvailabilityResult(Availability.NoBuilder)
    return AvailabilityResult(Availability.Ok)
