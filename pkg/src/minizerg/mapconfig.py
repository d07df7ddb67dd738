"""Map layout: zone rectangles, resource clusters, start slots.

Maps serialize to the versioned ``minizerg-map/v1`` JSON document so tests
and the CLI agree on geometry; ``load_map`` / ``dump_map`` round-trip it.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field

from .types import REGION_ZONES, ZoneId

MAP_SCHEMA_VERSION = "minizerg-map/v1"


class MapConfigError(ValueError):
    """Raised when a map document violates the schema."""


@dataclass(frozen=True)
class ResourceSite:
    """One expansion site: a base slot, its mineral patches and one geyser."""

    zone: ZoneId
    base_slot: tuple[float, float]
    patches: tuple[tuple[float, float], ...]
    geyser: tuple[float, float]


@dataclass(frozen=True)
class MapConfig:
    size: int
    # nine half-open rectangles (x0, y0, x1, y1), indexed by ZoneId A..I
    zone_rects: tuple[tuple[int, int, int, int], ...]
    start_zones: tuple[ZoneId, ZoneId]
    sites: tuple[ResourceSite, ...]
    name: str = "default"
    _zone_lookup: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_zone_lookup", _build_zone_lookup(self))

    def zone_of(self, x: float, y: float) -> ZoneId:
        xi = min(max(int(x), 0), self.size - 1)
        yi = min(max(int(y), 0), self.size - 1)
        return self._zone_lookup[yi * self.size + xi]

    def zone_center(self, zone: ZoneId) -> tuple[float, float]:
        if zone == ZoneId.J:
            return (self.size / 2.0, self.size / 2.0)
        x0, y0, x1, y1 = self.zone_rects[zone]
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)

    def site_for_zone(self, zone: ZoneId) -> ResourceSite | None:
        for s in self.sites:
            if s.zone == zone:
                return s
        return None

    def start_site(self, player: int) -> ResourceSite:
        site = self.site_for_zone(self.start_zones[player])
        assert site is not None
        return site


def _build_zone_lookup(cfg: MapConfig):
    if len(cfg.zone_rects) != 9:
        raise MapConfigError("exactly nine zone rectangles required")
    n = cfg.size
    lookup = [None] * (n * n)
    for zid, (x0, y0, x1, y1) in zip(REGION_ZONES, cfg.zone_rects):
        if not (0 <= x0 < x1 <= n and 0 <= y0 < y1 <= n):
            raise MapConfigError(f"zone {zid.name} rectangle out of bounds")
        for y in range(y0, y1):
            row = y * n
            for x in range(x0, x1):
                if lookup[row + x] is not None:
                    raise MapConfigError(
                        f"zones overlap at ({x},{y}): {lookup[row + x].name} and {zid.name}")
                lookup[row + x] = zid
    holes = lookup.count(None)
    if holes:
        raise MapConfigError(f"zones leave {holes} cells uncovered")
    return tuple(lookup)


def _validate(cfg: MapConfig) -> MapConfig:
    # zone lookup construction already checked the partition
    if len(set(cfg.start_zones)) != 2:
        raise MapConfigError("two distinct start zones required")
    site_zones = {s.zone for s in cfg.sites}
    for z in cfg.start_zones:
        if z not in site_zones:
            raise MapConfigError(f"start zone {z.name} has no resource site")
    for s in cfg.sites:
        for (x, y) in (*s.patches, s.geyser, s.base_slot):
            if not (0 <= x < cfg.size and 0 <= y < cfg.size):
                raise MapConfigError(f"resource at ({x},{y}) outside the map")
            if cfg.zone_of(x, y) != s.zone:
                raise MapConfigError(
                    f"resource at ({x},{y}) not inside zone {s.zone.name}")
    return cfg


# Offsets build each corner site by mirroring a template toward the corner.
_PATCH_OFFSETS = ((6, 1), (6, 3), (5, 5), (3, 6), (1, 6), (6, -1), (-1, 6), (4, 6))
_GEYSER_OFFSET = (0, 8)


def _corner_site(zone: ZoneId, base: tuple[int, int], sign: tuple[int, int]) -> ResourceSite:
    bx, by = base
    sx, sy = sign
    patches = tuple((float(bx + dx * sx), float(by + dy * sy)) for dx, dy in _PATCH_OFFSETS)
    geyser = (float(bx + _GEYSER_OFFSET[0] * sx), float(by + _GEYSER_OFFSET[1] * sy))
    return ResourceSite(zone, (float(bx), float(by)), patches, geyser)


@functools.lru_cache(maxsize=1)
def default_map() -> MapConfig:
    """64x64 grid, nine zones in a 3x3 layout, start corners in A and I."""
    cuts = (0, 21, 43, 64)
    rects = []
    for r in range(3):
        for c in range(3):
            rects.append((cuts[c], cuts[r], cuts[c + 1], cuts[r + 1]))
    sites = (
        _corner_site(ZoneId.A, (9, 9), (-1, -1)),
        _corner_site(ZoneId.C, (54, 9), (1, -1)),
        _corner_site(ZoneId.G, (9, 54), (-1, 1)),
        _corner_site(ZoneId.I, (54, 54), (1, 1)),
    )
    return _validate(MapConfig(
        size=64,
        zone_rects=tuple(rects),
        start_zones=(ZoneId.I, ZoneId.A),
        sites=sites,
    ))


def dump_map(cfg: MapConfig) -> str:
    doc = {
        "schema": MAP_SCHEMA_VERSION,
        "name": cfg.name,
        "size": cfg.size,
        "zones": [list(r) for r in cfg.zone_rects],
        "start_zones": [z.name for z in cfg.start_zones],
        "sites": [
            {
                "zone": s.zone.name,
                "base_slot": list(s.base_slot),
                "patches": [list(p) for p in s.patches],
                "geyser": list(s.geyser),
            }
            for s in cfg.sites
        ],
    }
    return json.dumps(doc, indent=2)


def load_map(text: str) -> MapConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MapConfigError(f"not valid JSON: {e}") from None
    if doc.get("schema") != MAP_SCHEMA_VERSION:
        raise MapConfigError(f"unsupported schema {doc.get('schema')!r}")
    try:
        cfg = MapConfig(
            size=int(doc["size"]),
            zone_rects=tuple(tuple(int(v) for v in r) for r in doc["zones"]),
            start_zones=tuple(ZoneId[z] for z in doc["start_zones"]),
            sites=tuple(
                ResourceSite(
                    zone=ZoneId[s["zone"]],
                    base_slot=tuple(float(v) for v in s["base_slot"]),
                    patches=tuple(tuple(float(v) for v in p) for p in s["patches"]),
                    geyser=tuple(float(v) for v in s["geyser"]),
                )
                for s in doc["sites"]
            ),
            name=str(doc.get("name", "unnamed")),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, MapConfigError):
            raise
        raise MapConfigError(f"malformed map document: {e}") from None
    return _validate(cfg)
