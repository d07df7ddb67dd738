"""Core domain types shared by the simulator and every controller."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field


class UnitKind(enum.IntEnum):
    Drone = 0
    Overlord = 1
    Queen = 2
    Zergling = 3
    Roach = 4
    Hydralisk = 5
    Larva = 6
    Hatchery = 7
    SpawningPool = 8
    RoachWarren = 9
    HydraliskDen = 10
    Extractor = 11
    SpineCrawler = 12


BUILDING_KINDS = frozenset({
    UnitKind.Hatchery, UnitKind.SpawningPool, UnitKind.RoachWarren,
    UnitKind.HydraliskDen, UnitKind.Extractor, UnitKind.SpineCrawler,
})

COMBAT_KINDS = frozenset({
    UnitKind.Zergling, UnitKind.Roach, UnitKind.Hydralisk, UnitKind.Queen,
})


class Upgrade(enum.IntEnum):
    ZerglingSpeed = 0
    MissileWeapons1 = 1
    GroundArmor1 = 2
    Burrow = 3


class ZoneId(enum.IntEnum):
    """Nine map regions laid out 3x3 row-major, plus J for the whole world."""

    A = 0
    B = 1
    C = 2
    D = 3
    E = 4
    F = 5
    G = 6
    H = 7
    I = 8
    J = 9


REGION_ZONES = tuple(ZoneId(i) for i in range(9))


class Availability(enum.Enum):
    Ok = "ok"
    MissingPrereq = "missing_prereq"
    InsufficientResources = "insufficient_resources"
    NoBuilder = "no_builder"
    FoodBlocked = "food_blocked"


@dataclass
class AvailabilityResult:
    status: Availability
    missing: tuple[UnitKind, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status is Availability.Ok


@dataclass
class PlayerEconomy:
    minerals: int = 0
    gas: int = 0
    food_used: int = 0
    food_cap: int = 0


class OutcomeKind(enum.Enum):
    Ongoing = "ongoing"
    Win = "win"
    Tie = "tie"


@dataclass(frozen=True)
class MatchOutcome:
    kind: OutcomeKind
    winner: int | None = None

    @property
    def ongoing(self) -> bool:
        return self.kind is OutcomeKind.Ongoing


ONGOING = MatchOutcome(OutcomeKind.Ongoing)
TIE = MatchOutcome(OutcomeKind.Tie)


def win(player: int) -> MatchOutcome:
    return MatchOutcome(OutcomeKind.Win, player)


# --- unit commands -----------------------------------------------------------
# One frozen dataclass per verb; the engine dispatches on type.  Research and
# Inject extend the move/attack/build set so upgrades and larva injects are
# reachable through the same per-unit command path.

@dataclass(frozen=True)
class Move:
    unit: int
    target: tuple[float, float]


@dataclass(frozen=True)
class AttackTarget:
    unit: int
    enemy: int


@dataclass(frozen=True)
class AttackMove:
    unit: int
    target: tuple[float, float]


@dataclass(frozen=True)
class Build:
    unit: int
    kind: UnitKind
    pos: tuple[float, float]


@dataclass(frozen=True)
class Produce:
    unit: int
    kind: UnitKind


@dataclass(frozen=True)
class Research:
    unit: int
    tech: Upgrade


@dataclass(frozen=True)
class Gather:
    unit: int
    resource: int


@dataclass(frozen=True)
class Inject:
    unit: int
    base: int


@dataclass(frozen=True)
class Burrow:
    unit: int
    down: bool


@dataclass(frozen=True)
class Stop:
    unit: int


UnitCommand = (
    Move | AttackTarget | AttackMove | Build | Produce | Research
    | Gather | Inject | Burrow | Stop
)


# --- events ------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    tick: int
    name: str
    player: int
    data: dict = field(default_factory=dict)


def unit_born(tick: int, player: int, uid: int, kind: UnitKind) -> Event:
    return Event(tick, "UnitBorn", player, {"unit": uid, "kind": kind.name})


def unit_died(tick: int, player: int, uid: int, kind: UnitKind) -> Event:
    return Event(tick, "UnitDied", player, {"unit": uid, "kind": kind.name})


def build_started(tick: int, player: int, uid: int, kind: UnitKind) -> Event:
    return Event(tick, "BuildStarted", player, {"unit": uid, "kind": kind.name})


def attack_landed(tick: int, player: int, attacker: int, target: int, dmg: int) -> Event:
    return Event(tick, "AttackLanded", player,
                 {"attacker": attacker, "target": target, "damage": dmg})


def invalid_command(tick: int, player: int, command: UnitCommand, reason: str) -> Event:
    return Event(tick, "InvalidCommand", player,
                 {"command": type(command).__name__, "reason": reason})
