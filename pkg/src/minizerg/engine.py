"""Deterministic tick engine: command validation, movement, combat, economy.

A tick resolves in fixed order: commands, production progress, unit actions
(movement and state machines), combat (simultaneous damage), income, larva
spawning, death removal, outcome check.  Invalid commands are dropped with an
InvalidCommand event; the step itself never raises on bad input.

Determinism: unit dicts iterate in id order (insertion order, ids monotone),
all arithmetic is plain float64/int, and the only randomness lives in the
per-player RNG streams exposed for controllers; the engine itself draws
nothing.  Identical seed + command sequence gives bit-identical states.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

from .mapconfig import MapConfig, default_map
from .stats import (
    ARMOR_DAMAGE_REDUCTION,
    MISSILE_BONUS_DAMAGE,
    ZERGLING_SPEED_FACTOR,
    GameRules,
    UnitStats,
)
from .techtree import TECH_TREE, UPGRADE_TREE, tech_check
from .types import (
    BUILDING_KINDS,
    COMBAT_KINDS,
    ONGOING,
    TIE,
    AttackMove,
    AttackTarget,
    Build,
    Burrow,
    Event,
    Gather,
    Inject,
    MatchOutcome,
    Move,
    PlayerEconomy,
    Produce,
    Research,
    Stop,
    UnitCommand,
    UnitKind,
    Upgrade,
    attack_landed,
    build_started,
    invalid_command,
    unit_born,
    unit_died,
    win,
)

# task codes
IDLE = 0
MOVE = 1
ATTACK = 2
ATTACKMOVE = 3
GATHER = 4
BUILDTRAVEL = 5
RESEARCHING = 6
INJECTTRAVEL = 7

# gather phases
G_TO_RESOURCE = 0
G_MINING = 1
G_RETURN = 2

_MISSILE_KINDS = (UnitKind.Roach, UnitKind.Hydralisk, UnitKind.Queen, UnitKind.SpineCrawler)
_BUCKET = 8.0


class Unit:
    """Mutable unit record; engine-internal order fields ride along."""

    __slots__ = (
        "id", "kind", "owner", "x", "y", "hp", "cooldown", "progress",
        "burrowed", "task", "tx", "ty", "tid", "aux", "phase", "carry",
        "parent", "rtech", "rleft", "speed", "dmg", "st",
    )

    def __init__(self, uid: int, kind: UnitKind, owner: int, x: float, y: float,
                 st: UnitStats, progress: int = 0):
        self.id = uid
        self.kind = kind
        self.owner = owner
        self.x = x
        self.y = y
        self.hp = st.max_hp
        self.cooldown = 0
        self.progress = progress
        self.burrowed = False
        self.task = IDLE
        self.tx = 0.0
        self.ty = 0.0
        self.tid = 0
        self.aux = 0
        self.phase = 0
        self.carry = 0
        self.parent = 0
        self.rtech = -1
        self.rleft = 0
        self.speed = st.speed
        self.dmg = st.damage
        self.st = st

    @property
    def complete(self) -> bool:
        return self.progress == 0

    def __repr__(self):
        return (f"Unit({self.id},{self.kind.name},p{self.owner},"
                f"({self.x:.1f},{self.y:.1f}),hp={self.hp})")


class Resource:
    __slots__ = ("id", "x", "y", "zone", "remaining", "is_gas", "extractor")

    def __init__(self, rid: int, x: float, y: float, zone: ZoneId,
                 remaining: int, is_gas: bool):
        self.id = rid
        self.x = x
        self.y = y
        self.zone = zone
        self.remaining = remaining
        self.is_gas = is_gas
        self.extractor = 0


@dataclass
class EnemySnapshot:
    uid: int
    kind: UnitKind
    x: float
    y: float
    hp: int
    tick: int


@dataclass
class Observation:
    player: int
    tick: int
    outcome: MatchOutcome
    economy: object
    own_units: list
    enemy_units: list
    enemy_memory: dict[int, EnemySnapshot]
    upgrades: set[Upgrade]
    enemy_start: tuple[float, float]
    resources: list
    map: MapConfig


class GameState:
    """Simulator truth; mutated in place by Game.step."""

    __slots__ = (
        "tick", "units", "resources", "economies", "upgrades", "memory",
        "rng", "engine_rng", "outcome", "next_id", "base_count",
        "worker_count", "larva_counts", "queen_pending", "frac",
        "harvested", "spent", "armor",
    )

    def __init__(self):
        self.tick = 0
        self.units: dict[int, Unit] = {}
        self.resources: dict[int, Resource] = {}
        self.economies = (PlayerEconomy(0, 0, 0, 0), PlayerEconomy(0, 0, 0, 0))
        self.upgrades: tuple[set, set] = (set(), set())
        self.memory: tuple[dict, dict] = ({}, {})
        self.rng: tuple[random.Random, random.Random] = (random.Random(), random.Random())
        self.engine_rng = random.Random()
        self.outcome: MatchOutcome = ONGOING
        self.next_id = 1
        self.base_count = [0, 0]
        self.worker_count = [0, 0]
        self.larva_counts: dict[int, int] = {}
        self.queen_pending: set[int] = set()
        self.frac = [[0.0, 0.0], [0.0, 0.0]]      # fractional cheat income carry
        self.harvested = [[0, 0], [0, 0]]         # [player][mineral, gas]
        self.spent = [[0, 0], [0, 0]]
        self.armor = [0, 0]


class ConfigurationError(ValueError):
    pass


class Game:
    """One match: state plus the stepping, observation and outcome API."""

    def __init__(self, map_config: MapConfig | None = None,
                 rules: GameRules | None = None, seed: int = 0,
                 trace: bool = False, checked: bool = False):
        self.map = map_config if map_config is not None else default_map()
        self.rules = rules if rules is not None else GameRules()
        self.seed = seed
        self.checked = checked
        self.trace: list[Event] | None = [] if trace else None
        self.state = GameState()
        self._buckets_tick = -1
        self._buckets: tuple[dict, dict] = ({}, {})
        self._spawn_start_position(0)
        self._spawn_start_position(1)
        st = self.state
        st.rng = (random.Random(seed * 1_000_003 + 1), random.Random(seed * 1_000_003 + 2))
        st.engine_rng = random.Random(seed)

    # -- setup ---------------------------------------------------------------

    def _spawn_start_position(self, player: int) -> None:
        st = self.state
        rules = self.rules
        site = self.map.start_site(player)
        bx, by = site.base_slot
        if player == 0 and not st.resources:
            rid = 1_000_000
            for s in self.map.sites:
                for (px, py) in s.patches:
                    st.resources[rid] = Resource(rid, px, py, s.zone, rules.econ.patch_amount, False)
                    rid += 1
                gx, gy = s.geyser
                st.resources[rid] = Resource(rid, gx, gy, s.zone, rules.econ.geyser_amount, True)
                rid += 1
        econ = st.economies[player]
        econ.minerals = rules.econ.start_minerals
        econ.gas = rules.econ.start_gas

        hatch = self._new_unit(UnitKind.Hatchery, player, bx, by)
        hatch.phase = rules.econ.larva_period
        econ.food_cap += 6
        st.base_count[player] += 1
        st.larva_counts[hatch.id] = 0

        sx = 1.0 if bx < self.map.size / 2 else -1.0
        patches = site.patches
        ring = [(2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (2, -1), (-1, 2), (2, 3),
                (3, 2), (3, 0), (0, 3), (3, 3)]
        for i, (dx, dy) in enumerate(ring):
            d = self._new_unit(UnitKind.Drone, player, bx - dx * sx, by - dy * sx)
            econ.food_used += 1
            st.worker_count[player] += 1
            patch = self._resource_at(patches[i % len(patches)])
            self._start_gather(d, patch)
        ov = self._new_unit(UnitKind.Overlord, player, bx - 4 * sx, by - 4 * sx)
        econ.food_cap += 8
        del ov
        for j in range(3):
            lv = self._new_unit(UnitKind.Larva, player, bx + (j - 1) * 1.5, by + 2.0 * (1 if sx > 0 else -1))
            lv.parent = hatch.id
            st.larva_counts[hatch.id] += 1

    def _resource_at(self, pos: tuple[float, float]) -> Resource:
        for r in self.state.resources.values():
            if r.x == pos[0] and r.y == pos[1]:
                return r
        raise KeyError(pos)

    def spawn(self, kind: UnitKind, player: int, x: float, y: float,
              progress: int = 0) -> Unit:
        """Scenario helper: materialize a unit with full economy bookkeeping.

        Used by tests and fixtures; regular play only creates units through
        commands.
        """
        st = self.state
        u = self._new_unit(kind, player, x, y, progress=progress)
        node = TECH_TREE[kind]
        econ = st.economies[player]
        if node.food_delta > 0:
            econ.food_used += node.food_delta
        elif progress == 0:
            econ.food_cap += -node.food_delta
        if kind == UnitKind.Hatchery:
            st.base_count[player] += 1
            if progress == 0:
                st.larva_counts.setdefault(u.id, 0)
                u.phase = self.rules.econ.larva_period
        elif kind == UnitKind.Drone:
            st.worker_count[player] += 1
        return u

    def _new_unit(self, kind: UnitKind, owner: int, x: float, y: float,
                  progress: int = 0) -> Unit:
        st = self.state
        u = Unit(st.next_id, kind, owner, x, y, self.rules.stats[kind], progress)
        st.next_id += 1
        if kind == UnitKind.Zergling and Upgrade.ZerglingSpeed in st.upgrades[owner]:
            u.speed *= ZERGLING_SPEED_FACTOR
        if kind in _MISSILE_KINDS and Upgrade.MissileWeapons1 in st.upgrades[owner]:
            u.dmg += MISSILE_BONUS_DAMAGE
        st.units[u.id] = u
        return u

    # -- public queries --------------------------------------------------

    def outcome(self) -> MatchOutcome:
        return self.state.outcome

    def grant(self, player: int, minerals: int = 0, gas: int = 0) -> None:
        """Scenario helper: add resources while keeping conservation exact."""
        econ = self.state.economies[player]
        econ.minerals += minerals
        econ.gas += gas
        self.state.harvested[player][0] += minerals
        self.state.harvested[player][1] += gas

    def surrender(self, player: int) -> None:
        if self.state.outcome.ongoing:
            self.state.outcome = win(1 - player)

    def has_completed(self, player: int, kind: UnitKind) -> bool:
        for u in self.state.units.values():
            if u.owner == player and u.kind == kind and u.progress == 0:
                return True
        return False

    def has_eligible_builder(self, player: int, builder: UnitKind,
                             for_kind: UnitKind | None = None,
                             for_tech: Upgrade | None = None) -> bool:
        return self._find_builders(player, builder, for_kind, for_tech, first_only=True)

    def eligible_builders(self, player: int, builder: UnitKind,
                          for_kind: UnitKind | None = None,
                          for_tech: Upgrade | None = None) -> list[Unit]:
        return self._find_builders(player, builder, for_kind, for_tech, first_only=False)

    def _find_builders(self, player, builder, for_kind, for_tech, first_only):
        st = self.state
        out = []
        for u in st.units.values():
            if u.owner != player or u.kind != builder or u.progress != 0 or u.burrowed:
                continue
            if u.task == RESEARCHING:
                continue
            if for_kind == UnitKind.Queen and u.id in st.queen_pending:
                continue
            if first_only:
                return True
            out.append(u)
        return False if first_only else out

    def upgrade_done_or_pending(self, player: int, tech: Upgrade) -> bool:
        st = self.state
        if tech in st.upgrades[player]:
            return True
        for u in st.units.values():
            if u.owner == player and u.task == RESEARCHING and u.rtech == int(tech):
                return True
        return False

    def availability(self, player: int, kind: UnitKind | Upgrade):
        return tech_check(self, player, kind)

    # -- observation -------------------------------------------------------

    def visible_state(self, player: int) -> Observation:
        st = self.state
        full_vision = self.rules.cheats[player].full_vision
        own = []
        enemy_all = []
        for u in st.units.values():
            (own if u.owner == player else enemy_all).append(u)
        detect = self.rules.econ.burrow_detect_range
        visible = []
        if full_vision:
            for e in enemy_all:
                if not e.burrowed or self._point_seen(own, e.x, e.y, detect):
                    visible.append(e)
        else:
            for e in enemy_all:
                carrier_sight = detect if e.burrowed else None
                if self._point_seen(own, e.x, e.y, carrier_sight):
                    visible.append(e)
        mem = st.memory[player]
        tick = st.tick
        vis_ids = set()
        for e in visible:
            vis_ids.add(e.id)
            mem[e.id] = EnemySnapshot(e.id, e.kind, e.x, e.y, e.hp, tick)
        # a remembered unit is forgotten once its last-seen spot is observed
        # empty; death elsewhere stays unknown, the fog keeps its secret
        stale = [
            uid for uid, snap in mem.items()
            if uid not in vis_ids and self._point_seen(own, snap.x, snap.y, None)
        ]
        for uid in stale:
            del mem[uid]
        return Observation(
            player=player,
            tick=tick,
            outcome=st.outcome,
            economy=st.economies[player],
            own_units=own,
            enemy_units=visible,
            enemy_memory=dict(mem),
            upgrades=set(st.upgrades[player]),
            enemy_start=self.map.start_site(1 - player).base_slot,
            resources=list(st.resources.values()),
            map=self.map,
        )

    @staticmethod
    def _point_seen(own: list[Unit], x: float, y: float, max_range: float | None) -> bool:
        for u in own:
            r = u.st.sight if max_range is None else min(u.st.sight, max_range)
            dx = u.x - x
            dy = u.y - y
            if dx * dx + dy * dy <= r * r:
                return True
        return False

    # -- placement ----------------------------------------------------------

    def placement_valid(self, player: int, kind: UnitKind, x: float, y: float) -> bool:
        st = self.state
        radius = self.rules.stats[kind].radius
        size = self.map.size
        if not (radius <= x <= size - radius and radius <= y <= size - radius):
            return False
        if kind == UnitKind.Extractor:
            gy = self._free_geyser_near(x, y)
            return gy is not None
        if kind == UnitKind.Hatchery:
            slot = None
            for s in self.map.sites:
                dx = s.base_slot[0] - x
                dy = s.base_slot[1] - y
                if dx * dx + dy * dy <= 16.0:
                    slot = s
                    break
            if slot is None:
                return False
            for u in st.units.values():
                if u.kind == UnitKind.Hatchery:
                    dx = u.x - slot.base_slot[0]
                    dy = u.y - slot.base_slot[1]
                    if dx * dx + dy * dy <= 36.0:
                        return False
        else:
            near_base = False
            creep = self.rules.econ.creep_radius
            for u in st.units.values():
                if u.kind == UnitKind.Hatchery and u.owner == player and u.progress == 0:
                    dx = u.x - x
                    dy = u.y - y
                    if dx * dx + dy * dy <= creep * creep:
                        near_base = True
                        break
            if not near_base:
                return False
            # keep expansion slots clear of tech buildings
            for s in self.map.sites:
                dx = s.base_slot[0] - x
                dy = s.base_slot[1] - y
                if dx * dx + dy * dy < 9.0:
                    return False
        for u in self.state.units.values():
            if u.kind in BUILDING_KINDS:
                dx = u.x - x
                dy = u.y - y
                lim = radius + u.st.radius + 0.5
                if dx * dx + dy * dy < lim * lim:
                    return False
        if kind != UnitKind.Extractor:
            for r in st.resources.values():
                dx = r.x - x
                dy = r.y - y
                lim = radius + 1.0
                if dx * dx + dy * dy < lim * lim:
                    return False
        return True

    def _free_geyser_near(self, x: float, y: float) -> Resource | None:
        for r in self.state.resources.values():
            if not r.is_gas:
                continue
            dx = r.x - x
            dy = r.y - y
            if dx * dx + dy * dy <= 2.25:
                live = r.extractor and r.extractor in self.state.units
                if not live:
                    return r
        return None

    # -- stepping -----------------------------------------------------------

    def step(self, commands) -> list[Event]:
        """Advance one tick; returns the events emitted during it."""
        st = self.state
        if not st.outcome.ongoing:
            raise RuntimeError("step on finished game")
        events: list[Event] = []
        if isinstance(commands, dict):
            ordered = [(0, commands.get(0) or ()), (1, commands.get(1) or ())]
        else:
            ordered = [(0, commands[0] or ()), (1, commands[1] or ())]
        for player, cmds in ordered:
            for cmd in cmds:
                self._apply_command(player, cmd, events)

        self._tick_production(events)
        shooters: list[tuple[Unit, Unit]] = []
        deposits: list[tuple[Unit, Resource]] = []
        self._tick_actions(events, shooters, deposits)
        self._resolve_combat(shooters, events)
        self._resolve_income(deposits)
        self._tick_larva(events)
        self._remove_dead(events)
        st.tick += 1
        self._check_outcome()
        if self.checked:
            self.validate()
        if self.trace is not None:
            self.trace.extend(events)
        return events

    # -- commands -----------------------------------------------------------

    def _apply_command(self, player: int, cmd: UnitCommand, events: list) -> None:
        st = self.state
        u = st.units.get(cmd.unit)
        if u is None or u.owner != player:
            events.append(invalid_command(st.tick, player, cmd, "no such own unit"))
            return
        if u.progress != 0:
            events.append(invalid_command(st.tick, player, cmd, "unit incomplete"))
            return
        if u.burrowed and not (isinstance(cmd, Burrow) and not cmd.down) and not isinstance(cmd, Stop):
            events.append(invalid_command(st.tick, player, cmd, "unit burrowed"))
            return
        kind = type(cmd)
        if kind is Move or kind is AttackMove:
            if u.speed == 0.0:
                events.append(invalid_command(st.tick, player, cmd, "immobile unit"))
                return
            x, y = cmd.target
            m = self.map.size - 0.5
            u.tx = min(max(x, 0.5), m)
            u.ty = min(max(y, 0.5), m)
            u.task = MOVE if kind is Move else ATTACKMOVE
            u.tid = 0
        elif kind is AttackTarget:
            tgt = st.units.get(cmd.enemy)
            if tgt is None or tgt.owner == player:
                events.append(invalid_command(st.tick, player, cmd, "bad target"))
                return
            if u.dmg == 0 or (u.speed == 0.0 and u.st.attack_range == 0.0):
                events.append(invalid_command(st.tick, player, cmd, "cannot attack"))
                return
            u.task = ATTACK
            u.tid = tgt.id
        elif kind is Gather:
            res = st.resources.get(cmd.resource)
            if u.kind != UnitKind.Drone or res is None:
                events.append(invalid_command(st.tick, player, cmd, "bad gather"))
                return
            if res.remaining <= 0:
                events.append(invalid_command(st.tick, player, cmd, "resource exhausted"))
                return
            if res.is_gas:
                ex = st.units.get(res.extractor)
                if ex is None or ex.owner != player or ex.progress != 0:
                    events.append(invalid_command(st.tick, player, cmd, "no extractor"))
                    return
            self._start_gather(u, res)
        elif kind is Build:
            self._cmd_build(u, cmd, events)
        elif kind is Produce:
            self._cmd_produce(u, cmd, events)
        elif kind is Research:
            self._cmd_research(u, cmd, events)
        elif kind is Inject:
            base = st.units.get(cmd.base)
            if (u.kind != UnitKind.Queen or base is None or base.owner != player
                    or base.kind != UnitKind.Hatchery or base.progress != 0):
                events.append(invalid_command(st.tick, player, cmd, "bad inject"))
                return
            if u.phase > 0 or base.aux > 0:
                events.append(invalid_command(st.tick, player, cmd, "inject not ready"))
                return
            u.task = INJECTTRAVEL
            u.tid = base.id
        elif kind is Burrow:
            if cmd.down:
                ok = (Upgrade.Burrow in st.upgrades[player]
                      and u.kind in COMBAT_KINDS | {UnitKind.Drone})
                if not ok:
                    events.append(invalid_command(st.tick, player, cmd, "cannot burrow"))
                    return
                u.burrowed = True
                u.task = IDLE
                u.tid = 0
            else:
                u.burrowed = False
        elif kind is Stop:
            u.task = IDLE
            u.tid = 0
        else:
            events.append(invalid_command(st.tick, player, cmd, "unknown command"))

    def _cmd_build(self, u: Unit, cmd: Build, events: list) -> None:
        st = self.state
        player = u.owner
        node = TECH_TREE.get(cmd.kind)
        if (node is None or node.builder != UnitKind.Drone
                or u.kind != UnitKind.Drone or cmd.kind not in BUILDING_KINDS):
            events.append(invalid_command(st.tick, player, cmd, "bad build"))
            return
        chk = tech_check(self, player, cmd.kind)
        if not chk.ok:
            events.append(invalid_command(st.tick, player, cmd, chk.status.value))
            return
        x, y = cmd.pos
        if not self.placement_valid(player, cmd.kind, x, y):
            events.append(invalid_command(st.tick, player, cmd, "invalid placement"))
            return
        u.task = BUILDTRAVEL
        u.tx = x
        u.ty = y
        u.aux = int(cmd.kind)

    def _cmd_produce(self, u: Unit, cmd: Produce, events: list) -> None:
        st = self.state
        player = u.owner
        node = TECH_TREE.get(cmd.kind)
        if (node is None or node.builder != u.kind or cmd.kind == UnitKind.Larva
                or cmd.kind in BUILDING_KINDS):
            events.append(invalid_command(st.tick, player, cmd, "bad producer"))
            return
        if cmd.kind == UnitKind.Queen and u.id in st.queen_pending:
            events.append(invalid_command(st.tick, player, cmd, "builder busy"))
            return
        if u.task == RESEARCHING:
            events.append(invalid_command(st.tick, player, cmd, "builder busy"))
            return
        chk = tech_check(self, player, cmd.kind)
        if not chk.ok:
            events.append(invalid_command(st.tick, player, cmd, chk.status.value))
            return
        econ = st.economies[player]
        econ.minerals -= node.mineral_cost
        econ.gas -= node.gas_cost
        st.spent[player][0] += node.mineral_cost
        st.spent[player][1] += node.gas_cost
        if node.food_delta > 0:
            econ.food_used += node.food_delta
        egg = self._new_unit(cmd.kind, player, u.x, u.y, progress=node.build_ticks)
        if u.kind == UnitKind.Larva:
            if u.parent in st.larva_counts:
                st.larva_counts[u.parent] -= 1
            del st.units[u.id]
        else:  # queen from hatchery
            egg.parent = u.id
            st.queen_pending.add(u.id)
            egg.x = u.x + 2.0
        if cmd.kind == UnitKind.Drone:
            st.worker_count[player] += 1
        events.append(build_started(st.tick, player, egg.id, cmd.kind))

    def _cmd_research(self, u: Unit, cmd: Research, events: list) -> None:
        st = self.state
        player = u.owner
        node = UPGRADE_TREE.get(cmd.tech)
        if node is None or node.researcher != u.kind:
            events.append(invalid_command(st.tick, player, cmd, "bad researcher"))
            return
        if u.task == RESEARCHING or u.id in st.queen_pending:
            events.append(invalid_command(st.tick, player, cmd, "builder busy"))
            return
        chk = tech_check(self, player, cmd.tech)
        if not chk.ok:
            events.append(invalid_command(st.tick, player, cmd, chk.status.value))
            return
        econ = st.economies[player]
        econ.minerals -= node.mineral_cost
        econ.gas -= node.gas_cost
        st.spent[player][0] += node.mineral_cost
        st.spent[player][1] += node.gas_cost
        u.task = RESEARCHING
        u.rtech = int(cmd.tech)
        u.rleft = node.research_ticks
        events.append(build_started(st.tick, player, u.id, u.kind))

    def _start_gather(self, u: Unit, res: Resource) -> None:
        u.task = GATHER
        u.tid = res.id
        u.phase = G_TO_RESOURCE
        u.aux = 0
        u.carry = 0
        u.parent = 0

    # -- phases ---------------------------------------------------------

    def _tick_production(self, events: list) -> None:
        st = self.state
        completed = []
        for u in st.units.values():
            if u.progress > 0:
                u.progress -= 1
                if u.progress == 0:
                    completed.append(u)
            elif u.task == RESEARCHING:
                u.rleft -= 1
                if u.rleft <= 0:
                    u.task = IDLE
                    tech = Upgrade(u.rtech)
                    u.rtech = -1
                    st.upgrades[u.owner].add(tech)
                    self._apply_upgrade(u.owner, tech)
        for u in completed:
            node = TECH_TREE[u.kind]
            econ = st.economies[u.owner]
            if node.food_delta < 0:
                econ.food_cap += -node.food_delta
            if u.kind == UnitKind.Hatchery:
                u.phase = self.rules.econ.larva_period
                st.larva_counts.setdefault(u.id, 0)
            elif u.kind == UnitKind.Extractor:
                gy = self._free_geyser_near(u.x, u.y)
                if gy is not None:
                    gy.extractor = u.id
            elif u.kind == UnitKind.Queen:
                if u.parent in st.queen_pending:
                    st.queen_pending.discard(u.parent)
            elif u.kind == UnitKind.Drone:
                patch = self._nearest_patch(u.x, u.y, 14.0)
                if patch is not None:
                    self._start_gather(u, patch)
            events.append(unit_born(st.tick, u.owner, u.id, u.kind))

    def _apply_upgrade(self, player: int, tech: Upgrade) -> None:
        st = self.state
        if tech == Upgrade.ZerglingSpeed:
            for u in st.units.values():
                if u.owner == player and u.kind == UnitKind.Zergling:
                    u.speed = u.st.speed * ZERGLING_SPEED_FACTOR
        elif tech == Upgrade.MissileWeapons1:
            for u in st.units.values():
                if u.owner == player and u.kind in _MISSILE_KINDS:
                    u.dmg = u.st.damage + MISSILE_BONUS_DAMAGE
        elif tech == Upgrade.GroundArmor1:
            st.armor[player] = ARMOR_DAMAGE_REDUCTION

    def _tick_actions(self, events: list, shooters: list, deposits: list) -> None:
        st = self.state
        tick = st.tick
        regen_period = self.rules.econ.burrow_regen_period
        arrivals: list[Unit] = []
        for u in st.units.values():
            if u.cooldown > 0:
                u.cooldown -= 1
            if u.progress > 0:
                continue
            if u.burrowed:
                if u.hp < u.st.max_hp and (tick + u.id) % regen_period == 0:
                    u.hp += 1
                continue
            task = u.task
            if task == GATHER:
                self._act_gather(u, deposits)
            elif task == MOVE:
                if self._step_toward(u, u.tx, u.ty, 0.25):
                    u.task = IDLE
            elif task == ATTACKMOVE:
                self._act_attackmove(u, shooters)
            elif task == ATTACK:
                self._act_attack(u, shooters)
            elif task == IDLE:
                if u.dmg > 0 and (tick + u.id) % 4 == 0:
                    tgt = self._nearest_enemy(u, u.st.attack_range + u.st.radius + 0.5)
                    u.tid = tgt.id if tgt is not None else 0
                if u.tid:
                    tgt = st.units.get(u.tid)
                    if tgt is None:
                        u.tid = 0
                    elif u.cooldown == 0 and u.dmg > 0 and self._in_range(u, tgt):
                        shooters.append((u, tgt))
            elif task == BUILDTRAVEL:
                if self._step_toward(u, u.tx, u.ty, 1.2):
                    arrivals.append(u)  # mutates the unit table, defer
            elif task == INJECTTRAVEL:
                base = st.units.get(u.tid)
                if base is None or base.progress != 0:
                    u.task = IDLE
                    u.tid = 0
                elif self._step_toward(u, base.x, base.y, 3.0 + base.st.radius):
                    if base.aux == 0:
                        base.aux = self.rules.econ.inject_delay
                        u.phase = self.rules.econ.inject_delay
                    u.task = IDLE
                    u.tid = 0
            if u.kind == UnitKind.Queen and u.phase > 0 and u.task != INJECTTRAVEL:
                u.phase -= 1
        for u in arrivals:
            self._arrive_build(u, events)

    def _act_gather(self, u: Unit, deposits: list) -> None:
        st = self.state
        if u.phase == G_TO_RESOURCE:
            res = st.resources.get(u.tid)
            if res is None or res.remaining <= 0:
                res = self._nearest_patch(u.x, u.y, 16.0)
                if res is None:
                    u.task = IDLE
                    return
                u.tid = res.id
            if res.is_gas:
                ex = st.units.get(res.extractor)
                if ex is None or ex.owner != u.owner or ex.progress != 0:
                    u.task = IDLE
                    return
            if self._step_toward(u, res.x, res.y, 1.2):
                econ_rules = self.rules.econ
                u.phase = G_MINING
                u.aux = econ_rules.gas_mine_ticks if res.is_gas else econ_rules.mineral_mine_ticks
        elif u.phase == G_MINING:
            u.aux -= 1
            if u.aux <= 0:
                res = st.resources.get(u.tid)
                econ_rules = self.rules.econ
                if res is None or res.remaining <= 0:
                    u.phase = G_TO_RESOURCE
                    return
                amount = econ_rules.gas_trip_yield if res.is_gas else econ_rules.mineral_trip_yield
                got = min(amount, res.remaining)
                res.remaining -= got
                u.carry = got if not res.is_gas else -got
                base = self._nearest_base(u.owner, u.x, u.y)
                if base is None:
                    u.task = IDLE
                    u.carry = 0
                    return
                u.parent = base.id
                u.phase = G_RETURN
        else:  # G_RETURN
            base = st.units.get(u.parent)
            if base is None or base.progress != 0:
                base = self._nearest_base(u.owner, u.x, u.y)
                if base is None:
                    u.task = IDLE
                    return
                u.parent = base.id
            if self._step_toward(u, base.x, base.y, 1.0 + base.st.radius):
                res = st.resources.get(u.tid)
                deposits.append((u, u.carry))
                u.carry = 0
                u.parent = 0
                if res is None or res.remaining <= 0:
                    res = self._nearest_patch(u.x, u.y, 16.0)
                    if res is None:
                        u.task = IDLE
                        return
                    u.tid = res.id
                u.phase = G_TO_RESOURCE

    def _act_attackmove(self, u: Unit, shooters: list) -> None:
        st = self.state
        tgt = st.units.get(u.tid) if u.tid else None
        if tgt is not None and not tgt.burrowed:
            dx = tgt.x - u.x
            dy = tgt.y - u.y
            leash = u.st.sight * 1.5
            if dx * dx + dy * dy > leash * leash:
                tgt = None
        elif tgt is not None:
            tgt = None
        if tgt is None:
            u.tid = 0
            if (st.tick + u.id) % 4 == 0:
                tgt = self._nearest_enemy(u, u.st.sight)
                if tgt is not None:
                    u.tid = tgt.id
        if tgt is not None:
            self._engage(u, tgt, shooters)
            return
        if self._step_toward(u, u.tx, u.ty, 1.5):
            u.task = IDLE
            u.tid = 0

    def _act_attack(self, u: Unit, shooters: list) -> None:
        tgt = self.state.units.get(u.tid)
        if tgt is None:
            u.task = IDLE
            u.tid = 0
            return
        self._engage(u, tgt, shooters)

    def _engage(self, u: Unit, tgt: Unit, shooters: list) -> None:
        dx = tgt.x - u.x
        dy = tgt.y - u.y
        reach = u.st.attack_range + u.st.radius + tgt.st.radius
        if tgt.burrowed:
            reach = min(reach, self.rules.econ.burrow_detect_range + u.st.radius + tgt.st.radius)
        d2 = dx * dx + dy * dy
        if d2 <= reach * reach:
            if u.cooldown == 0 and u.dmg > 0:
                shooters.append((u, tgt))
        elif u.speed > 0.0:
            self._step_toward(u, tgt.x, tgt.y, reach * 0.9 if reach > 0 else 0.5)

    def _in_range(self, u: Unit, tgt: Unit) -> bool:
        dx = tgt.x - u.x
        dy = tgt.y - u.y
        reach = u.st.attack_range + u.st.radius + tgt.st.radius
        if tgt.burrowed:
            reach = min(reach, self.rules.econ.burrow_detect_range + u.st.radius + tgt.st.radius)
        return dx * dx + dy * dy <= reach * reach

    def _step_toward(self, u: Unit, tx: float, ty: float, arrive: float) -> bool:
        dx = tx - u.x
        dy = ty - u.y
        d2 = dx * dx + dy * dy
        if d2 <= arrive * arrive:
            return True
        sp = u.speed
        if sp <= 0.0:
            return False
        d = d2 ** 0.5
        if d <= sp:
            u.x = tx
            u.y = ty
            return True
        u.x += sp * dx / d
        u.y += sp * dy / d
        return False

    def _resolve_combat(self, shooters: list, events: list) -> None:
        if not shooters:
            return
        st = self.state
        hits: list[tuple[Unit, Unit, int]] = []
        for u, tgt in shooters:
            if u.hp <= 0 or tgt.id not in st.units or u.cooldown != 0:
                continue
            if not self._in_range(u, tgt):
                continue
            dmg = u.dmg
            if st.armor[tgt.owner] and tgt.kind not in BUILDING_KINDS:
                dmg = max(1, dmg - st.armor[tgt.owner])
            hits.append((u, tgt, dmg))
            u.cooldown = u.st.cooldown
        for u, tgt, dmg in hits:
            tgt.hp -= dmg
            events.append(attack_landed(st.tick, u.owner, u.id, tgt.id, dmg))

    def _resolve_income(self, deposits: list) -> None:
        st = self.state
        for u, carry in deposits:
            if u.hp <= 0:
                continue
            player = u.owner
            mult = self.rules.cheats[player].resource_multiplier
            idx = 0 if carry > 0 else 1
            amount = carry if carry > 0 else -carry
            if mult == 1.0:
                gain = amount
            else:
                self.state.frac[player][idx] += amount * mult
                gain = int(st.frac[player][idx])
                st.frac[player][idx] -= gain
            econ = st.economies[player]
            if idx == 0:
                econ.minerals += gain
            else:
                econ.gas += gain
            st.harvested[player][idx] += gain

    def _tick_larva(self, events: list) -> None:
        st = self.state
        econ_rules = self.rules.econ
        spawns = []
        for u in st.units.values():
            if u.kind != UnitKind.Hatchery or u.progress != 0:
                continue
            if u.aux > 0:
                u.aux -= 1
                if u.aux == 0:
                    count = st.larva_counts.get(u.id, 0)
                    room = econ_rules.larva_hard_cap - count
                    spawns.append((u, min(econ_rules.inject_amount, room)))
            if st.larva_counts.get(u.id, 0) < econ_rules.larva_cap:
                u.phase -= 1
                if u.phase <= 0:
                    u.phase = econ_rules.larva_period
                    spawns.append((u, 1))
        for hatch, n in spawns:
            for i in range(n):
                k = (st.next_id + i) % 4
                lv = self._new_unit(UnitKind.Larva, hatch.owner,
                                    hatch.x + (k - 1.5), hatch.y + 2.2, progress=0)
                lv.parent = hatch.id
                st.larva_counts[hatch.id] = st.larva_counts.get(hatch.id, 0) + 1
                events.append(unit_born(st.tick, hatch.owner, lv.id, UnitKind.Larva))

    def _remove_dead(self, events: list) -> None:
        st = self.state
        dead = [u for u in st.units.values() if u.hp <= 0]
        if not dead:
            return
        dead_hatcheries = {u.id for u in dead if u.kind == UnitKind.Hatchery}
        if dead_hatcheries:
            for u in st.units.values():
                if (u.kind == UnitKind.Larva and u.parent in dead_hatcheries
                        and u.hp > 0):
                    u.hp = 0
                    dead.append(u)
        for u in dead:
            node = TECH_TREE[u.kind]
            econ = st.economies[u.owner]
            if u.progress == 0 and node.food_delta < 0:
                econ.food_cap -= -node.food_delta
            if node.food_delta > 0:
                econ.food_used -= node.food_delta
            if u.kind == UnitKind.Hatchery:
                st.base_count[u.owner] -= 1
                st.larva_counts.pop(u.id, None)
                st.queen_pending.discard(u.id)
            elif u.kind == UnitKind.Drone:
                st.worker_count[u.owner] -= 1
            elif u.kind == UnitKind.Larva:
                if u.parent in st.larva_counts:
                    st.larva_counts[u.parent] -= 1
            elif u.kind == UnitKind.Queen and u.progress != 0 and u.parent:
                st.queen_pending.discard(u.parent)
            del st.units[u.id]
            events.append(unit_died(st.tick, u.owner, u.id, u.kind))

    def _check_outcome(self) -> None:
        st = self.state
        if not st.outcome.ongoing:
            return
        dead0 = st.base_count[0] == 0 and st.worker_count[0] == 0
        dead1 = st.base_count[1] == 0 and st.worker_count[1] == 0
        if dead0 and dead1:
            st.outcome = TIE
        elif dead0:
            st.outcome = win(1)
        elif dead1:
            st.outcome = win(0)
        elif st.tick >= self.rules.tick_limit:
            st.outcome = TIE

    # -- spatial queries ------------------------------------------------

    def nearest_enemy(self, u: Unit, radius: float) -> Unit | None:
        """Nearest live enemy within radius (burrowed only if adjacent)."""
        return self._nearest_enemy(u, radius)

    def _enemy_buckets(self, player: int) -> dict:
        st = self.state
        if self._buckets_tick != st.tick:
            b0: dict = {}
            b1: dict = {}
            for u in st.units.values():
                key = (int(u.x / _BUCKET), int(u.y / _BUCKET))
                (b0 if u.owner == 0 else b1).setdefault(key, []).append(u)
            self._buckets = (b0, b1)
            self._buckets_tick = st.tick
        return self._buckets[1 - player]

    def _nearest_enemy(self, u: Unit, radius: float) -> Unit | None:
        buckets = self._enemy_buckets(u.owner)
        if not buckets:
            return None
        detect = self.rules.econ.burrow_detect_range
        bx0 = int((u.x - radius) / _BUCKET)
        bx1 = int((u.x + radius) / _BUCKET)
        by0 = int((u.y - radius) / _BUCKET)
        by1 = int((u.y + radius) / _BUCKET)
        best = None
        best_d2 = radius * radius
        for by in range(by0, by1 + 1):
            for bx in range(bx0, bx1 + 1):
                lst = buckets.get((bx, by))
                if not lst:
                    continue
                for e in lst:
                    if e.hp <= 0:
                        continue
                    dx = e.x - u.x
                    dy = e.y - u.y
                    d2 = dx * dx + dy * dy
                    if e.burrowed and d2 > detect * detect:
                        continue
                    if d2 <= best_d2:
                        if best is None or d2 < best_d2 or e.id < best.id:
                            best = e
                            best_d2 = d2
        return best

    def _nearest_patch(self, x: float, y: float, radius: float) -> Resource | None:
        best = None
        best_d2 = radius * radius
        for r in self.state.resources.values():
            if r.is_gas or r.remaining <= 0:
                continue
            dx = r.x - x
            dy = r.y - y
            d2 = dx * dx + dy * dy
            if d2 <= best_d2:
                best = r
                best_d2 = d2
        return best

    def _nearest_base(self, player: int, x: float, y: float) -> Unit | None:
        best = None
        best_d2 = 1e18
        for u in self.state.units.values():
            if u.owner == player and u.kind == UnitKind.Hatchery and u.progress == 0:
                dx = u.x - x
                dy = u.y - y
                d2 = dx * dx + dy * dy
                if d2 < best_d2:
                    best = u
                    best_d2 = d2
        return best

    def _arrive_build(self, u: Unit, events: list) -> None:
        st = self.state
        player = u.owner
        kind = UnitKind(u.aux)
        node = TECH_TREE[kind]
        econ = st.economies[player]
        chk = tech_check(self, player, kind)
        ok = chk.ok or chk.status.value == "no_builder"  # the builder is this drone
        if not ok or not self.placement_valid(player, kind, u.tx, u.ty):
            events.append(invalid_command(
                st.tick, player, Build(u.id, kind, (u.tx, u.ty)), "build aborted"))
            u.task = IDLE
            return
        econ.minerals -= node.mineral_cost
        econ.gas -= node.gas_cost
        st.spent[player][0] += node.mineral_cost
        st.spent[player][1] += node.gas_cost
        x, y = u.tx, u.ty
        if kind == UnitKind.Extractor:
            gy = self._free_geyser_near(x, y)
            x, y = gy.x, gy.y
        st.worker_count[player] -= 1
        econ.food_used -= TECH_TREE[UnitKind.Drone].food_delta
        del st.units[u.id]
        b = self._new_unit(kind, player, x, y, progress=node.build_ticks)
        if kind == UnitKind.Hatchery:
            st.base_count[player] += 1
        events.append(build_started(st.tick, player, b.id, kind))

    # -- integrity ------------------------------------------------------

    def validate(self) -> None:
        """Recompute invariants from scratch; raises AssertionError on drift."""
        st = self.state
        seen_ids = set()
        bases = [0, 0]
        workers = [0, 0]
        food_used = [0, 0]
        food_cap = [0, 0]
        size = self.map.size
        for u in st.units.values():
            assert u.id not in seen_ids, "duplicate unit id"
            seen_ids.add(u.id)
            assert u.hp > 0, f"non-positive hp on live unit {u!r}"
            assert u.hp <= u.st.max_hp, f"hp above max on {u!r}"
            assert 0.0 <= u.x <= size and 0.0 <= u.y <= size, f"out of bounds: {u!r}"
            if u.progress > 0:
                assert u.task == IDLE, f"incomplete unit acting: {u!r}"
            node = TECH_TREE[u.kind]
            if node.food_delta > 0:
                food_used[u.owner] += node.food_delta
            elif u.progress == 0:
                food_cap[u.owner] += -node.food_delta
            if u.kind == UnitKind.Hatchery:
                bases[u.owner] += 1
            elif u.kind == UnitKind.Drone:
                workers[u.owner] += 1
        for p in (0, 1):
            econ = st.economies[p]
            assert econ.minerals >= 0 and econ.gas >= 0, "negative resources"
            assert st.base_count[p] == bases[p], "base count drift"
            assert st.worker_count[p] == workers[p], "worker count drift"
            assert econ.food_used == food_used[p], "food_used drift"
            assert econ.food_cap == food_cap[p], "food_cap drift"
            start = self.rules.econ.start_minerals
            assert econ.minerals + st.spent[p][0] == start + st.harvested[p][0], \
                "mineral conservation violated"
            sgas = self.rules.econ.start_gas
            assert econ.gas + st.spent[p][1] == sgas + st.harvested[p][1], \
                "gas conservation violated"

    def state_hash(self) -> str:
        st = self.state
        h = hashlib.sha256()
        h.update(f"t{st.tick}".encode())
        for u in sorted(st.units.values(), key=lambda v: v.id):
            h.update(
                f"{u.id},{int(u.kind)},{u.owner},{u.x!r},{u.y!r},{u.hp},"
                f"{u.cooldown},{u.progress},{int(u.burrowed)},{u.task},"
                f"{u.tid},{u.aux},{u.phase},{u.carry},{u.rtech},{u.rleft};".encode())
        for p in (0, 1):
            e = st.economies[p]
            h.update(f"e{p}:{e.minerals},{e.gas},{e.food_used},{e.food_cap};".encode())
            h.update(("u" + ",".join(str(int(t)) for t in sorted(st.upgrades[p]))).encode())
        for r in sorted(st.resources.values(), key=lambda v: v.id):
            h.update(f"r{r.id}:{r.remaining};".encode())
        return h.hexdigest()

    def events_jsonl(self) -> str:
        """Line-delimited trace of all recorded events (requires trace=True)."""
        if self.trace is None:
            raise RuntimeError("game was created without trace=True")
        lines = [
            json.dumps({"tick": e.tick, "event": e.name, "player": e.player, **e.data})
            for e in self.trace
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def new_game(map_config: MapConfig | None = None, seed: int = 0,
             rules: GameRules | None = None, trace: bool = False,
             checked: bool = False) -> Game:
    """Fresh match: two symmetric start positions, tick 0."""
    return Game(map_config, rules, seed, trace=trace, checked=checked)
