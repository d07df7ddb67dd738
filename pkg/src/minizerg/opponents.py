"""Scripted opponent ladder: ten difficulty levels, cheating at the top.

Every level runs the same macro script with different knob values; the knob
table below is the single source of truth and is what the CLI dumps.  Knob
strength is monotone in level: timings never get later, counts never get
smaller, and the cheats are exactly full vision at level 8+ plus a resource
multiplier of 1.5 at level 9 and 2.0 at level 10.  Levels 7 and below act
only on fog-filtered observations.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .actions import (
    COLLECT_GAS,
    COLLECT_MINERALS,
    COMBAT_JJ,
    INJECT_LARVAS,
    Category,
)
from .engine import BUILDTRAVEL, GATHER, IDLE, Game
from .executors import ExecutionManager
from .stats import CheatConfig, GameRules
from .types import (
    BUILDING_KINDS,
    COMBAT_KINDS,
    AttackMove,
    AttackTarget,
    MatchOutcome,
    Move,
    UnitKind,
    ZoneId,
)

TRAINING_LEVELS = (1, 2, 4, 6, 9, 10)

BUILD_POOL = 0
BUILD_WARREN = 1
BUILD_DEN = 2
BUILD_EXTRACTOR = 3
BUILD_HATCHERY = 4
BUILD_SPINE = 5
PRODUCE_DRONE = 6
PRODUCE_OVERLORD = 7
PRODUCE_QUEEN = 8
PRODUCE_ZERGLING = 9
PRODUCE_ROACH = 10
PRODUCE_HYDRALISK = 11

# research priority for the ladder script; `upgrades` counts a prefix
UPGRADE_PRIORITY = (13, 14, 12, 15)  # missile, armor, ling speed, burrow


@dataclass(frozen=True)
class LevelKnobs:
    """One ladder rung.  hold_until and attack_tick are monotone
    non-increasing in level; every other knob is monotone non-decreasing.

    Hatcheries are only placeable on resource sites, so production scales
    through expansions (at most two free sites); past that, rungs differ
    in combat quality and, at the top, in the two sanctioned cheats.
    """
    hold_until: int      # never attack before this tick
    attack_tick: int     # after this tick small waves are allowed
    army_target: int     # food worth of army that triggers a full wave
    worker_target: int
    queens: int
    tier: int            # 1 zerglings, 2 adds roaches
    expansions: int
    extractors: int
    upgrades: int        # prefix of UPGRADE_PRIORITY to research
    micro: bool          # hit-and-run squad micro instead of raw attack-move
    focus: bool          # concentrate fire on the weakest enemy in range
    roach_bias: bool     # spend surplus larva roach-first
    drone_pull: int      # workers thrown at attackers on the doorstep
    spread: bool         # overkill-aware focus: spread shots across targets
    sentries: int        # overlords posted down the approach for early warning
    informed: bool       # time attacks against the enemy army it can see


LADDER: dict[int, LevelKnobs] = {
    1:  LevelKnobs(9600, 9600, 20, 12, 0, 1, 0, 0, 0,
                   False, False, False, 0, False, 0, False),
    2:  LevelKnobs(0, 8400, 22, 12, 1, 1, 0, 0, 0,
                   False, False, False, 0, False, 0, False),
    3:  LevelKnobs(0, 7600, 24, 16, 1, 2, 0, 1, 1,
                   False, False, False, 0, False, 0, False),
    4:  LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   False, True, True, 0, False, 0, False),
    5:  LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   True, True, True, 0, False, 0, False),
    6:  LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   True, True, True, 16, False, 0, False),
    7:  LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   True, True, True, 16, True, 2, False),
    8:  LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   True, True, True, 16, True, 2, True),
    9:  LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   True, True, True, 16, True, 2, True),
    10: LevelKnobs(0, 7200, 26, 18, 2, 2, 1, 1, 2,
                   True, True, True, 16, True, 2, True),
}

DEFENSE_MEMORY_TICKS = 320
ATTACK_REWAVE_PERIOD = 64
ARMY_FLOOR = 12
DEFENSE_FLOOR = 8


def cheat_config(level: int) -> CheatConfig:
    if not 1 <= level <= 10:
        raise ValueError(f"difficulty level {level} out of range 1..10")
    mult = {9: 1.5, 10: 2.0}.get(level, 1.0)
    return CheatConfig(full_vision=level >= 8, resource_multiplier=mult)


def knobs_for(level: int) -> LevelKnobs:
    if not 1 <= level <= 10:
        raise ValueError(f"difficulty level {level} out of range 1..10")
    return LADDER[level]


def match_rules(level0: int | None, level1: int | None,
                base: GameRules | None = None) -> GameRules:
    """GameRules with per-player cheats; None means a non-cheating agent."""
    base = base if base is not None else GameRules()
    cheats = tuple(
        cheat_config(lv) if lv is not None else CheatConfig()
        for lv in (level0, level1))
    return GameRules(econ=base.econ, stats=base.stats, cheats=cheats,
                     tick_limit=base.tick_limit)


def sample_training_level(rng: random.Random) -> int:
    """Uniform over the training ladder subset."""
    return rng.choice(TRAINING_LEVELS)


def format_ladder() -> str:
    cols = ("level", "attack_tick", "army_target", "workers", "queens",
            "tier", "expansions", "extractors", "upgrades", "micro",
            "drone_pull", "spread", "sentries", "informed",
            "full_vision", "resource_mult")
    lines = ["\t".join(cols)]
    for lv in range(1, 11):
        k = LADDER[lv]
        c = cheat_config(lv)
        lines.append("\t".join(str(v) for v in (
            lv, k.attack_tick, k.army_target, k.worker_target, k.queens,
            k.tier, k.expansions, k.extractors, k.upgrades, k.micro,
            k.drone_pull, k.spread, k.sentries, k.informed,
            c.full_vision, c.resource_multiplier)))
    return "\n".join(lines)


ARMY_FOOD = {UnitKind.Zergling: 1, UnitKind.Roach: 2, UnitKind.Hydralisk: 2}


class BuiltinBot:
    """One ladder opponent driving one player of a game.

    Call step() every tick; macro decisions run every `period` ticks and
    unit micro flows continuously through the macro execution manager.
    """

    def __init__(self, game: Game, player: int, level: int, period: int = 16):
        self.game = game
        self.player = player
        self.level = level
        self.knobs = knobs_for(level)
        self.period = period
        self.mgr = ExecutionManager(game, player)
        self.attacking = False
        self._last_wave = -ATTACK_REWAVE_PERIOD
        self._sweep = 0
        self._start_cleared = False
        bx, by = game.map.start_site(player).base_slot
        cx = cy = game.map.size / 2.0
        d = max(1.0, ((cx - bx) ** 2 + (cy - by) ** 2) ** 0.5)
        ux, uy = (cx - bx) / d, (cy - by) / d
        # stage slightly in front of the main base, toward the map center
        self._rally = (bx + 8.0 * ux, by + 8.0 * uy)
        # lookout posts down the approach corridor, nearest first
        self._posts = ((bx + 13.0 * ux, by + 13.0 * uy),
                       (bx + 21.0 * ux, by + 21.0 * uy))

    # -- helpers ------------------------------------------------------------

    def _army(self, obs):
        out = []
        for u in obs.own_units:
            if u.kind in COMBAT_KINDS and u.kind != UnitKind.Queen and u.complete:
                out.append(u)
        return out

    def _intruder_point(self, obs):
        """Position of an armed enemy inside one of our base zones, if any."""
        zones = {self.game.map.zone_of(u.x, u.y) for u in obs.own_units
                 if u.kind == UnitKind.Hatchery}
        for e in obs.enemy_units:
            if e.dmg > 0 and self.game.map.zone_of(e.x, e.y) in zones:
                return (e.x, e.y)
        for s in obs.enemy_memory.values():
            if (s.kind in COMBAT_KINDS and obs.tick - s.tick < DEFENSE_MEMORY_TICKS
                    and self.game.map.zone_of(s.x, s.y) in zones):
                return (s.x, s.y)
        return None

    def _known_enemy_points(self, obs):
        pts = [(e.x, e.y) for e in obs.enemy_units]
        pts.extend((s.x, s.y) for s in obs.enemy_memory.values())
        return pts

    def _attack_target(self, obs, army):
        """Wave destination: push at production, not at the unit stream.

        Nearest known enemy building, else the unscouted enemy start, else a
        sweep point; streamed enemy units get intercepted en route by the
        per-unit micro anyway.
        """
        buildings = [(e.x, e.y) for e in obs.enemy_units
                     if e.kind in BUILDING_KINDS]
        buildings.extend((s.x, s.y) for s in obs.enemy_memory.values()
                         if s.kind in BUILDING_KINDS)
        cx = sum(u.x for u in army) / len(army)
        cy = sum(u.y for u in army) / len(army)
        if buildings:
            return min(buildings, key=lambda p: (p[0] - cx) ** 2 + (p[1] - cy) ** 2)
        sx, sy = obs.enemy_start
        if not self._start_cleared:
            if any((u.x - sx) ** 2 + (u.y - sy) ** 2 < 36.0 for u in army):
                self._start_cleared = True
            else:
                return (sx, sy)
        return self._sweep_point(army)

    def _sweep_point(self, army):
        """Walk likely base slots, then zone centers, to finish the map.

        The waypoint only advances once a unit actually reaches it; waves
        re-target every few seconds and would otherwise outrun the army.
        """
        slots = [s.base_slot for s in self.game.map.sites]
        slots.extend(self.game.map.zone_center(z) for z in ZoneId if z != ZoneId.J)
        px, py = slots[self._sweep % len(slots)]
        if any((u.x - px) ** 2 + (u.y - py) ** 2 < 36.0 for u in army):
            self._sweep += 1
            px, py = slots[self._sweep % len(slots)]
        return (px, py)

    def _gas_understaffed(self, obs):
        own_extractors = {u.id for u in obs.own_units
                          if u.kind == UnitKind.Extractor and u.complete}
        geysers = {r.id for r in obs.resources
                   if r.is_gas and r.remaining > 0 and r.extractor in own_extractors}
        assigned: dict[int, int] = {}
        for u in obs.own_units:
            if u.kind == UnitKind.Drone and u.task == GATHER and u.tid in geysers:
                assigned[u.tid] = assigned.get(u.tid, 0) + 1
        return any(assigned.get(rid, 0) < 3 for rid in geysers)

    def _strip_queens(self, ex, obs):
        queens = {u.id for u in obs.own_units if u.kind == UnitKind.Queen}
        if queens:
            ex.unit_ids = [i for i in ex.unit_ids if i not in queens]
            ex.pending = tuple(c for c in ex.pending if c.unit not in queens)
            if not ex.unit_ids:
                ex.done = True

    # -- macro decision -------------------------------------------------------

    def _building_pending(self, obs, kind):
        aux = int(kind)
        for u in obs.own_units:
            if u.kind == kind and not u.complete:
                return True
            if (u.kind == UnitKind.Drone and u.task == BUILDTRAVEL
                    and u.aux == aux):
                return True
        return False

    def _produce(self, obs, counts):
        k = self.knobs
        econ = obs.economy
        begin = self.mgr.begin

        begin(INJECT_LARVAS)

        pending_overlords = sum(1 for u in obs.own_units
                                if u.kind == UnitKind.Overlord and not u.complete)
        reserve = 4 + 2 * counts[UnitKind.Queen] + 2 * counts[UnitKind.Hatchery]
        cap_pending = 1 + k.queens // 2
        if (econ.food_cap - econ.food_used < reserve
                and pending_overlords < cap_pending and econ.food_cap < 100):
            begin(PRODUCE_OVERLORD)

        army_supply = pending_supply = 0
        for u in obs.own_units:
            food = ARMY_FOOD.get(u.kind)
            if food is None:
                continue
            if u.complete:
                army_supply += food
            else:
                pending_supply += food

        # a standing army comes before the worker line: a base without one
        # loses its drones to the first wave of cheap units
        if army_supply + pending_supply < DEFENSE_FLOOR:
            if k.tier >= 3:
                begin(PRODUCE_HYDRALISK)
            if k.tier >= 2:
                begin(PRODUCE_ROACH)
            begin(PRODUCE_ZERGLING)

        worker_deficit = k.worker_target - counts[UnitKind.Drone]
        if worker_deficit > 0:
            begin(PRODUCE_DRONE)
        if counts[UnitKind.Queen] < k.queens:
            begin(PRODUCE_QUEEN)

        if (counts[UnitKind.SpawningPool] == 0
                and not self._building_pending(obs, UnitKind.SpawningPool)):
            begin(BUILD_POOL)
        if (counts[UnitKind.Extractor] < k.extractors
                and not self._building_pending(obs, UnitKind.Extractor)):
            begin(BUILD_EXTRACTOR)
        if (k.tier >= 2 and counts[UnitKind.RoachWarren] == 0
                and not self._building_pending(obs, UnitKind.RoachWarren)):
            begin(BUILD_WARREN)
        if (k.tier >= 3 and counts[UnitKind.HydraliskDen] == 0
                and counts[UnitKind.SpawningPool] > 0
                and not self._building_pending(obs, UnitKind.HydraliskDen)):
            begin(BUILD_DEN)
        if (counts[UnitKind.Hatchery] < 1 + k.expansions
                and econ.minerals >= 350 and counts[UnitKind.Drone] >= 12
                and not self._building_pending(obs, UnitKind.Hatchery)):
            begin(BUILD_HATCHERY)

        for i in range(k.upgrades):
            begin(UPGRADE_PRIORITY[i])

        # cheap units must not starve the worker line: while rebuilding
        # drones, army production only taps an actual surplus
        if worker_deficit > 2:
            if econ.minerals >= 200:
                if k.tier >= 3:
                    begin(PRODUCE_HYDRALISK)
                if k.tier >= 2:
                    begin(PRODUCE_ROACH)
                begin(PRODUCE_ZERGLING)
        else:
            for _ in range(2):
                if k.tier >= 3:
                    begin(PRODUCE_HYDRALISK)
                if k.tier >= 2:
                    begin(PRODUCE_ROACH)
                    if k.roach_bias:
                        begin(PRODUCE_ROACH)
                begin(PRODUCE_ZERGLING)

        if any(u.kind == UnitKind.Drone and u.complete and u.task == IDLE
               for u in obs.own_units):
            begin(COLLECT_MINERALS)
        # gas only once the mineral line is staffed, or a shrinking worker
        # pool ends up all-gas with zero mineral income
        if (k.extractors > 0 and counts[UnitKind.Drone] >= 12
                and self._gas_understaffed(obs)):
            begin(COLLECT_GAS)

    def _post_sentries(self, obs, cmds):
        lords = sorted((u for u in obs.own_units
                        if u.kind == UnitKind.Overlord and u.complete),
                       key=lambda u: u.id)
        for u, (px, py) in zip(lords, self._posts[:self.knobs.sentries]):
            if (u.x - px) ** 2 + (u.y - py) ** 2 > 4.0:
                cmds.append(Move(u.id, (px, py)))

    def _fight(self, obs, army, cmds):
        k = self.knobs
        tick = obs.tick
        if k.sentries:
            self._post_sentries(obs, cmds)
        supply = sum(ARMY_FOOD[u.kind] for u in army)
        floor = max(ARMY_FLOOR, k.army_target // 2)
        want_attack = tick >= k.hold_until and (
            supply >= k.army_target
            or (tick >= k.attack_tick and supply >= floor)
            or (self.attacking and supply >= floor))
        if k.informed and tick >= k.hold_until:
            enemy_supply = sum(
                ARMY_FOOD.get(u.kind, 0) for u in obs.enemy_units if u.complete)
            if supply >= floor and supply >= 1.4 * enemy_supply + 8:
                want_attack = True
            elif supply < enemy_supply and not self.attacking:
                want_attack = False

        intruder = None if want_attack else self._intruder_point(obs)
        if intruder is not None:
            if k.micro and army:
                ex = self.mgr.begin(COMBAT_JJ)
                self._strip_queens(ex, obs)
                if not ex.done:
                    ex.dst_point = intruder
                    ex.aggressive = True
                    ex.pending = tuple(AttackMove(uid, intruder)
                                       for uid in ex.unit_ids)
            else:
                for ex in self.mgr.live:
                    if ex.action.category is Category.Combat:
                        ex.done = True
                for u in army:
                    cmds.append(AttackMove(u.id, intruder))
            ix, iy = intruder
            for u in obs.own_units:
                if (u.kind == UnitKind.Queen and u.complete
                        and (u.x - ix) ** 2 + (u.y - iy) ** 2 < 400.0):
                    cmds.append(AttackMove(u.id, intruder))
            self._pull_drones(obs, intruder, supply, cmds)
            self.attacking = False
            return

        if not want_attack:
            # mass at the staging point so defense meets attacks as one ball
            self.attacking = False
            rx, ry = self._rally
            for u in army:
                if u.task == IDLE and (u.x - rx) ** 2 + (u.y - ry) ** 2 > 144.0:
                    cmds.append(AttackMove(u.id, (rx, ry)))
            return

        self.attacking = True
        if not army:
            return
        if tick - self._last_wave < ATTACK_REWAVE_PERIOD:
            return
        self._last_wave = tick
        target = self._attack_target(obs, army)
        if k.micro:
            ex = self.mgr.begin(COMBAT_JJ)
            self._strip_queens(ex, obs)
            if not ex.done:
                ex.dst_point = target
                ex.aggressive = True
                ex.pending = tuple(AttackMove(uid, target) for uid in ex.unit_ids)
        else:
            for u in army:
                cmds.append(AttackMove(u.id, target))

    def _pull_drones(self, obs, intruder, supply, cmds):
        """Last-ditch and doorstep worker defense."""
        k = self.knobs
        ix, iy = intruder
        at_base = any(
            u.kind == UnitKind.Hatchery
            and (u.x - ix) ** 2 + (u.y - iy) ** 2 < 196.0
            for u in obs.own_units)
        if k.drone_pull > 0 and at_base:
            limit, reach2 = k.drone_pull, 576.0
        elif supply < 2:
            limit, reach2 = 8, float("inf")
        else:
            return
        drones = sorted(
            (u for u in obs.own_units
             if u.kind == UnitKind.Drone and u.complete
             and (u.x - ix) ** 2 + (u.y - iy) ** 2 <= reach2),
            key=lambda u: (u.x - ix) ** 2 + (u.y - iy) ** 2)
        for u in drones[:limit]:
            cmds.append(AttackMove(u.id, intruder))

    def _focus_fire(self, obs, army, cmds):
        """Point everyone already in weapons range at the weakest enemy.

        Issued last so it wins over whatever engagement order a unit was
        holding; kills land sooner, which shrinks incoming damage.
        """
        enemies = [e for e in obs.enemy_units if e.hp > 0]
        if not enemies:
            return
        stats = self.game.rules.stats
        if self.knobs.spread:
            # claim hit points as shooters are assigned so a volley is not
            # wasted overkilling one target while its neighbours shoot back
            budget = {e.id: float(e.hp) for e in enemies}
            for u in army:
                st = stats[u.kind]
                r2 = (st.attack_range + 1.5) ** 2
                cands = [e for e in enemies
                         if (u.x - e.x) ** 2 + (u.y - e.y) ** 2 <= r2]
                if not cands:
                    continue
                alive = [e for e in cands if budget[e.id] > 0]
                if alive:
                    best = min(alive, key=lambda e: budget[e.id])
                else:
                    best = min(cands, key=lambda e: e.hp)
                budget[best.id] -= st.damage
                cmds.append(AttackTarget(u.id, best.id))
            return
        for u in army:
            reach = stats[u.kind].attack_range + 1.5
            best = None
            best_hp = 1 << 30
            for e in enemies:
                if e.hp < best_hp and ((u.x - e.x) ** 2 + (u.y - e.y) ** 2
                                       <= reach * reach):
                    best_hp = e.hp
                    best = e
            if best is not None:
                cmds.append(AttackTarget(u.id, best.id))

    # -- public ----------------------------------------------------------------

    def step(self):
        """Commands for this tick; heavier logic only every `period` ticks."""
        cmds = list(self.mgr.tick())
        if self.game.state.tick % self.period == (self.player * 8) % self.period:
            obs = self.game.visible_state(self.player)
            counts: dict[UnitKind, int] = {kind: 0 for kind in UnitKind}
            for u in obs.own_units:
                if u.complete:
                    counts[u.kind] += 1
            army = self._army(obs)
            self._produce(obs, counts)
            self._fight(obs, army, cmds)
            cmds.extend(self.mgr.tick())
            if self.knobs.focus:
                self._focus_fire(obs, army, cmds)
        return tuple(cmds)


def play_match(level0: int, level1: int, seed: int,
               rules: GameRules | None = None,
               max_ticks: int | None = None) -> MatchOutcome:
    """One scripted ladder game; returns the final outcome."""
    rules = rules if rules is not None else match_rules(level0, level1)
    game = Game(rules=rules, seed=seed)
    bots = (BuiltinBot(game, 0, level0), BuiltinBot(game, 1, level1))
    limit = max_ticks if max_ticks is not None else rules.tick_limit
    while game.state.outcome.ongoing and game.state.tick < limit:
        game.step({0: bots[0].step(), 1: bots[1].step()})
    return game.state.outcome
