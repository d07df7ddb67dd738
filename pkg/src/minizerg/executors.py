"""Macro-action executors: one macro decision becomes per-unit commands.

Economic actions resolve to a single command batch (random eligible builder,
random valid placement).  Combat actions select the combat units in the
source zone and then micro them every tick: fire at the nearest enemy in
range, run away for a few ticks when badly hurt, re-issue movement when
idle.  A manager owns the live executions and lets a new combat action
preempt older ones for the units it grabs.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .actions import CATALOG, Category, Harvest, MacroAction
from .engine import ATTACK, GATHER, IDLE, Game, Unit
from .types import (
    COMBAT_KINDS,
    AttackMove,
    AttackTarget,
    Build,
    Gather,
    Inject,
    Move,
    Produce,
    Research,
    UnitCommand,
    UnitKind,
    ZoneId,
)

LOW_HP_FRACTION = 0.3
RETREAT_TICKS = 8
RETREAT_DISTANCE = 4.0
DANGER_RADIUS = 4.0
ARRIVE_RADIUS = 6.0
EXECUTION_TICK_BUDGET = 2048
WORKER_QUOTA = 3
PLACE_TRIES = 32
PLACE_SPREAD = 9.0


@dataclass
class MacroExecution:
    action: MacroAction
    player: int
    issued_tick: int
    done: bool = False
    pending: tuple[UnitCommand, ...] = ()
    unit_ids: list[int] = field(default_factory=list)
    dst_point: tuple[float, float] = (0.0, 0.0)
    aggressive: bool = False          # AttackMove vs rally-Move
    retreat_until: dict[int, int] = field(default_factory=dict)
    last_target: dict[int, int] = field(default_factory=dict)


def _own_units(game: Game, player: int, kind: UnitKind | None = None,
               complete: bool = True) -> list[Unit]:
    out = []
    for u in game.state.units.values():
        if u.owner != player:
            continue
        if complete and u.progress != 0:
            continue
        if kind is not None and u.kind != kind:
            continue
        out.append(u)
    return out


def _rand_drone(game: Game, player: int, rng: random.Random) -> Unit | None:
    drones = [d for d in _own_units(game, player, UnitKind.Drone) if not d.burrowed]
    return rng.choice(drones) if drones else None


def rand_placement(game: Game, player: int, kind: UnitKind,
                   rng: random.Random) -> tuple[float, float] | None:
    """Random valid spot: on the base's ground for tech, a free site for a
    hatchery, a free geyser for an extractor.  None when nothing fits."""
    st = game.state
    bases = _own_units(game, player, UnitKind.Hatchery)
    if kind == UnitKind.Hatchery:
        taken = [u for u in st.units.values() if u.kind == UnitKind.Hatchery]
        free = []
        for s in game.map.sites:
            bx, by = s.base_slot
            if all((u.x - bx) ** 2 + (u.y - by) ** 2 > 36.0 for u in taken):
                free.append(s)
        if not free or not bases:
            return None
        cx = sum(b.x for b in bases) / len(bases)
        cy = sum(b.y for b in bases) / len(bases)
        best = min(free, key=lambda s: (s.base_slot[0] - cx) ** 2 + (s.base_slot[1] - cy) ** 2)
        return best.base_slot
    if kind == UnitKind.Extractor:
        if not bases:
            return None
        cands = []
        for r in st.resources.values():
            if not r.is_gas or r.remaining <= 0:
                continue
            if r.extractor and r.extractor in st.units:
                continue
            d2 = min((b.x - r.x) ** 2 + (b.y - r.y) ** 2 for b in bases)
            cands.append((d2, r))
        if not cands:
            return None
        cands.sort(key=lambda t: t[0])
        r = cands[0][1]
        return (r.x, r.y)
    if not bases:
        return None
    zone_of = game.map.zone_of
    for _ in range(PLACE_TRIES):
        b = rng.choice(bases)
        x = b.x + rng.uniform(-PLACE_SPREAD, PLACE_SPREAD)
        y = b.y + rng.uniform(-PLACE_SPREAD, PLACE_SPREAD)
        if zone_of(x, y) != zone_of(b.x, b.y):
            continue
        if game.placement_valid(player, kind, x, y):
            return (x, y)
    return None


def _known_enemies(game: Game, player: int):
    """(x, y) of every enemy the player can currently justify knowing about."""
    obs = game.visible_state(player)
    pts = [(e.x, e.y) for e in obs.enemy_units]
    pts.extend((s.x, s.y) for s in obs.enemy_memory.values())
    return pts, obs.enemy_start


def begin_execution(game: Game, player: int, action: MacroAction | int,
                    rng: random.Random | None = None) -> MacroExecution:
    """Select units/placement for the action; commands flow from tick_execution.

    Re-checks availability: an action that became invalid is a finished
    no-op, never an error.
    """
    if isinstance(action, int):
        action = CATALOG[action]
    if rng is None:
        rng = game.state.rng[player]
    ex = MacroExecution(action, player, game.state.tick)
    cat = action.category

    if cat is Category.Building:
        if not game.availability(player, action.kind).ok:
            ex.done = True
            return ex
        drone = _rand_drone(game, player, rng)
        pos = rand_placement(game, player, action.kind, rng)
        if drone is None or pos is None:
            ex.done = True
            return ex
        ex.pending = (Build(drone.id, action.kind, pos),)
    elif cat is Category.Production:
        if not game.availability(player, action.kind).ok:
            ex.done = True
            return ex
        from .techtree import TECH_TREE
        builder_kind = TECH_TREE[action.kind].builder
        builders = game.eligible_builders(player, builder_kind, for_kind=action.kind)
        if not builders:
            ex.done = True
            return ex
        ex.pending = (Produce(rng.choice(builders).id, action.kind),)
    elif cat is Category.Upgrading:
        if not game.availability(player, action.tech).ok:
            ex.done = True
            return ex
        from .techtree import UPGRADE_TREE
        researcher = UPGRADE_TREE[action.tech].researcher
        builders = game.eligible_builders(player, researcher, for_tech=action.tech)
        if not builders:
            ex.done = True
            return ex
        ex.pending = (Research(rng.choice(builders).id, action.tech),)
    elif cat is Category.Harvesting:
        ex.pending = _harvest_commands(game, player, action.harvest, rng)
        if not ex.pending:
            ex.done = True
            return ex
    else:
        _begin_combat(game, player, action, ex)
        if not ex.unit_ids:
            ex.done = True
    return ex


def _harvest_commands(game: Game, player: int, what: Harvest,
                      rng: random.Random) -> tuple[UnitCommand, ...]:
    st = game.state
    drones = [d for d in _own_units(game, player, UnitKind.Drone) if not d.burrowed]
    if what is Harvest.InjectLarvas:
        queens = [q for q in _own_units(game, player, UnitKind.Queen)
                  if q.phase == 0 and not q.burrowed]
        bases = [b for b in _own_units(game, player, UnitKind.Hatchery) if b.aux == 0]
        cmds = []
        for q in queens:
            if not bases:
                break
            b = min(bases, key=lambda b: (b.x - q.x) ** 2 + (b.y - q.y) ** 2)
            bases.remove(b)
            cmds.append(Inject(q.id, b.id))
        return tuple(cmds)

    def gathering_gas(d: Unit) -> bool:
        if d.task != GATHER:
            return False
        r = st.resources.get(d.tid)
        return r is not None and r.is_gas

    if what is Harvest.CollectMinerals:
        movable = [d for d in drones if d.task == IDLE or gathering_gas(d)]
        rng.shuffle(movable)
        cmds = []
        for d in movable[:WORKER_QUOTA]:
            patch = game._nearest_patch(d.x, d.y, 40.0)
            if patch is not None:
                cmds.append(Gather(d.id, patch.id))
        return tuple(cmds)

    # CollectGas: top up extractors to three workers each, moving at most
    # the per-invocation quota
    cmds = []
    budget = WORKER_QUOTA
    movable = [d for d in drones if not gathering_gas(d)]
    rng.shuffle(movable)
    for u in _own_units(game, player, UnitKind.Extractor):
        geyser = None
        for r in st.resources.values():
            if r.is_gas and r.extractor == u.id and r.remaining > 0:
                geyser = r
                break
        if geyser is None:
            continue
        current = sum(1 for d in drones if d.task == GATHER and d.tid == geyser.id)
        want = min(3 - current, budget)
        while want > 0 and movable:
            d = movable.pop()
            cmds.append(Gather(d.id, geyser.id))
            budget -= 1
            want -= 1
        if budget == 0:
            break
    return tuple(cmds)


def _begin_combat(game: Game, player: int, action: MacroAction,
                  ex: MacroExecution) -> None:
    zone_of = game.map.zone_of
    squad = []
    for u in game.state.units.values():
        if (u.owner == player and u.progress == 0 and not u.burrowed
                and u.kind in COMBAT_KINDS):
            if action.src == ZoneId.J or zone_of(u.x, u.y) == action.src:
                squad.append(u)
    if not squad:
        return
    ex.unit_ids = [u.id for u in squad]
    known, enemy_start = _known_enemies(game, player)
    if action.dst == ZoneId.J:
        if known:
            cx = sum(u.x for u in squad) / len(squad)
            cy = sum(u.y for u in squad) / len(squad)
            ex.dst_point = min(known, key=lambda p: (p[0] - cx) ** 2 + (p[1] - cy) ** 2)
        else:
            # start locations are public map knowledge
            ex.dst_point = enemy_start
        ex.aggressive = True
    else:
        ex.dst_point = game.map.zone_center(action.dst)
        ex.aggressive = any(zone_of(x, y) == action.dst for x, y in known)
    cmd = AttackMove if ex.aggressive else Move
    ex.pending = tuple(cmd(u.id, ex.dst_point) for u in squad)


def tick_execution(ex: MacroExecution, game: Game) -> list[UnitCommand]:
    """One tick of an execution; combat squads get per-unit micro."""
    if ex.done:
        return []
    cmds: list[UnitCommand] = list(ex.pending)
    rallied = bool(cmds)
    ex.pending = ()
    if ex.action.category is not Category.Combat:
        ex.done = True
        return cmds

    st = game.state
    tick = st.tick
    if tick - ex.issued_tick >= EXECUTION_TICK_BUDGET:
        ex.done = True
        return cmds

    alive: list[Unit] = []
    for uid in ex.unit_ids:
        u = st.units.get(uid)
        if u is not None and not u.burrowed:
            alive.append(u)
    if not alive:
        ex.unit_ids = []
        ex.done = True
        return cmds
    ex.unit_ids = [u.id for u in alive]

    dx, dy = ex.dst_point
    any_enemy_near = False
    all_arrived = True
    for u in alive:
        sight_enemy = game.nearest_enemy(u, u.st.sight)
        if sight_enemy is not None:
            any_enemy_near = True
        if (u.x - dx) ** 2 + (u.y - dy) ** 2 > ARRIVE_RADIUS ** 2:
            all_arrived = False

        until = ex.retreat_until.get(u.id, 0)
        if tick < until:
            continue
        low = u.hp < LOW_HP_FRACTION * u.st.max_hp
        if low and sight_enemy is not None:
            ex_, ey = sight_enemy.x, sight_enemy.y
            d2 = (u.x - ex_) ** 2 + (u.y - ey) ** 2
            if d2 <= DANGER_RADIUS ** 2:
                cmds.append(Move(u.id, _away_from(game, u, ex_, ey)))
                ex.retreat_until[u.id] = tick + RETREAT_TICKS
                ex.last_target.pop(u.id, None)
                continue
        reach = u.st.attack_range + u.st.radius + 1.0
        target = game.nearest_enemy(u, reach) if u.dmg > 0 else None
        if target is not None:
            if ex.last_target.get(u.id) != target.id or u.task == IDLE:
                cmds.append(AttackTarget(u.id, target.id))
                ex.last_target[u.id] = target.id
        elif (u.task == IDLE and not rallied) or until:
            # skip the idle re-issue on the tick the rally batch goes out;
            # the units have not processed those orders yet
            if until:
                ex.retreat_until.pop(u.id, None)
            kind = AttackMove if ex.aggressive else Move
            cmds.append(kind(u.id, ex.dst_point))
            ex.last_target.pop(u.id, None)

    if all_arrived and not any_enemy_near:
        ex.done = True
    return cmds


def _away_from(game: Game, u: Unit, ex_: float, ey: float) -> tuple[float, float]:
    vx = u.x - ex_
    vy = u.y - ey
    norm = (vx * vx + vy * vy) ** 0.5
    if norm < 1e-9:
        vx, vy = 1.0, 0.0
        norm = 1.0
    m = game.map.size - 0.5
    px = min(max(u.x + RETREAT_DISTANCE * vx / norm, 0.5), m)
    py = min(max(u.y + RETREAT_DISTANCE * vy / norm, 0.5), m)
    return (px, py)


class ExecutionManager:
    """Owns a player's live executions; new combat actions steal units from
    older combat actions, economic actions run independently."""

    def __init__(self, game: Game, player: int,
                 rng: random.Random | None = None):
        self.game = game
        self.player = player
        self.rng = rng if rng is not None else game.state.rng[player]
        self.live: list[MacroExecution] = []

    def begin(self, action: MacroAction | int) -> MacroExecution:
        ex = begin_execution(self.game, self.player, action, self.rng)
        if ex.action.category is Category.Combat and ex.unit_ids:
            grabbed = set(ex.unit_ids)
            for other in self.live:
                if other.action.category is Category.Combat and not other.done:
                    other.unit_ids = [i for i in other.unit_ids if i not in grabbed]
                    if not other.unit_ids:
                        other.done = True
        if not ex.done:
            self.live.append(ex)
        return ex

    def tick(self) -> tuple[UnitCommand, ...]:
        cmds: list[UnitCommand] = []
        for ex in self.live:
            cmds.extend(tick_execution(ex, self.game))
        if any(ex.done for ex in self.live):
            self.live = [ex for ex in self.live if not ex.done]
        return tuple(cmds)
