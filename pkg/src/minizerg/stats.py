"""Unit stat table and economy constants.

Combat stats follow the fixed design table (Drone 40hp/5dmg/r1, Zergling
35hp/5dmg/r1/fast, Roach 145hp/16dmg/r4, Hydralisk 90hp/12dmg/r5, Queen
175hp/4dmg/r5, SpineCrawler 300hp/25dmg/r7/immobile, Overlord 200hp/0dmg,
16-tick attack cooldown).  Building hit points, movement speeds and sight
radii are engine choices kept roughly proportional to the source game.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .types import UnitKind


@dataclass(frozen=True)
class UnitStats:
    max_hp: int
    damage: int
    attack_range: float
    speed: float          # cells per tick; 0 = immobile
    sight: float
    radius: float
    cooldown: int = 16    # ticks between attacks


DEFAULT_STATS: dict[UnitKind, UnitStats] = {
    UnitKind.Drone:        UnitStats(40, 5, 1.0, 0.30, 8.0, 0.5),
    UnitKind.Overlord:     UnitStats(200, 0, 0.0, 0.12, 11.0, 0.5),
    UnitKind.Queen:        UnitStats(175, 4, 5.0, 0.18, 9.0, 0.5),
    UnitKind.Zergling:     UnitStats(35, 5, 1.0, 0.35, 9.0, 0.5),
    UnitKind.Roach:        UnitStats(145, 16, 4.0, 0.30, 9.0, 0.5),
    UnitKind.Hydralisk:    UnitStats(90, 12, 5.0, 0.25, 9.0, 0.5),
    UnitKind.Larva:        UnitStats(25, 0, 0.0, 0.0, 5.0, 0.5),
    UnitKind.Hatchery:     UnitStats(1500, 0, 0.0, 0.0, 9.0, 1.5),
    UnitKind.SpawningPool: UnitStats(750, 0, 0.0, 0.0, 9.0, 1.0),
    UnitKind.RoachWarren:  UnitStats(850, 0, 0.0, 0.0, 9.0, 1.0),
    UnitKind.HydraliskDen: UnitStats(850, 0, 0.0, 0.0, 9.0, 1.0),
    UnitKind.Extractor:    UnitStats(500, 0, 0.0, 0.0, 9.0, 1.0),
    UnitKind.SpineCrawler: UnitStats(300, 25, 7.0, 0.0, 9.0, 1.0),
}

# Upgrade effects.
ZERGLING_SPEED_FACTOR = 1.4
MISSILE_BONUS_DAMAGE = 2          # Roach / Hydralisk / Queen / SpineCrawler
ARMOR_DAMAGE_REDUCTION = 1        # per hit, non-building defenders, floor 1


@dataclass(frozen=True)
class EconomyRules:
    start_minerals: int = 50
    start_gas: int = 0
    mineral_trip_yield: int = 5
    mineral_mine_ticks: int = 16
    gas_trip_yield: int = 4
    gas_mine_ticks: int = 24
    patch_amount: int = 1500
    geyser_amount: int = 2250
    larva_period: int = 180       # natural spawn, per hatchery
    larva_cap: int = 3            # natural-spawn cap
    larva_hard_cap: int = 12      # incl. injected
    inject_amount: int = 4
    inject_delay: int = 464
    creep_radius: float = 12.0    # tech buildings must sit this close to a base
    burrow_regen_period: int = 8  # 1 hp per this many ticks while burrowed
    burrow_detect_range: float = 1.5


def stats_with_overrides(overrides: dict[UnitKind, dict] | None) -> dict[UnitKind, UnitStats]:
    table = dict(DEFAULT_STATS)
    for kind, fields_ in (overrides or {}).items():
        table[kind] = replace(table[kind], **fields_)
    return table


@dataclass(frozen=True)
class CheatConfig:
    full_vision: bool = False
    resource_multiplier: float = 1.0


@dataclass(frozen=True)
class GameRules:
    """Everything tunable about one game besides the map geometry."""

    econ: EconomyRules = field(default_factory=EconomyRules)
    stats: dict[UnitKind, UnitStats] = field(default_factory=lambda: dict(DEFAULT_STATS))
    cheats: tuple[CheatConfig, CheatConfig] = (CheatConfig(), CheatConfig())
    tick_limit: int = 28_800
