"""Intersection maps: typed convex patches as graph nodes, geometric
adjacency, and box-to-patch association."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import ParseError, ValidationError
from .geometry import (ConvexPolygon, Homography, OrientedBox, iou,
                       polygon_min_distance, segment_closest_points)

DEFAULT_ADJACENCY_GAP = 0.2
DEFAULT_MIN_IOU = 0.05
MIN_PATCH_AREA = 0.1
MAX_PATCH_OVERLAP_IOU = 0.01


class PatchClass(str, Enum):
    ROAD = "road"
    BICYCLE_LANE = "bicycle_lane"
    CURB = "curb"
    CROSSWALK = "crosswalk"


@dataclass(frozen=True)
class Patch:
    id: int
    cls: PatchClass
    shape: ConvexPolygon
    label: str | None = None

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError(f"patch id must be >= 0, got {self.id}")
        if self.shape.area <= MIN_PATCH_AREA:
            raise ValidationError(
                f"patch {self.id} area {self.shape.area:.4f} below "
                f"{MIN_PATCH_AREA} m^2 floor")


class _AssocTables:
    """Padded per-patch arrays consumed by the association kernel."""

    def __init__(self, patches):
        n = len(patches)
        vmax = max(p.shape.vertices.shape[0] for p in patches)
        self.verts = np.zeros((n, vmax, 2))
        self.nvert = np.empty(n, dtype=np.int64)
        self.areas = np.empty(n)
        self.cent = np.empty((n, 2))
        self.rad = np.empty(n)
        self.ids = np.empty(n, dtype=np.int64)
        for i, p in enumerate(patches):
            v = p.shape.vertices
            self.verts[i, :v.shape[0]] = v
            self.nvert[i] = v.shape[0]
            self.areas[i] = p.shape.area
            self.cent[i] = p.shape.centroid
            self.rad[i] = p.shape.radius
            self.ids[i] = p.id


@dataclass(frozen=True)
class IntersectionMap:
    """Immutable patch map; shared read-only access is safe."""

    patches: tuple[Patch, ...]
    adjacency: frozenset[tuple[int, int]]
    bev_homography: Homography | None = None
    checksum: str = field(default="", compare=False)
    _by_id: dict = field(init=False, repr=False, compare=False)
    _tables: _AssocTables = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        patches = tuple(sorted(self.patches, key=lambda p: p.id))
        ids = [p.id for p in patches]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate patch ids: {dupes}")
        id_set = set(ids)
        pairs = set()
        for pair in self.adjacency:
            i, j = int(pair[0]), int(pair[1])
            if i == j:
                raise ValidationError(f"self adjacency on patch {i}")
            if i not in id_set or j not in id_set:
                raise ValidationError(f"adjacency ({i},{j}) references "
                                      "unknown patch id")
            pairs.add((min(i, j), max(i, j)))
        _check_overlaps(patches)
        object.__setattr__(self, "patches", patches)
        object.__setattr__(self, "adjacency", frozenset(pairs))
        object.__setattr__(self, "_by_id", {p.id: p for p in patches})
        object.__setattr__(self, "_tables", _AssocTables(patches))
        if not self.checksum:
            object.__setattr__(self, "checksum", _dict_checksum(self.to_dict()))

    def patch(self, patch_id: int) -> Patch:
        return self._by_id[patch_id]

    def __contains__(self, patch_id: int) -> bool:
        return patch_id in self._by_id

    @property
    def node_ids(self) -> list[int]:
        return [p.id for p in self.patches]

    def neighbors(self, patch_id: int) -> set[int]:
        out = set()
        for i, j in self.adjacency:
            if i == patch_id:
                out.add(j)
            elif j == patch_id:
                out.add(i)
        return out

    def to_dict(self) -> dict:
        data = {
            "patches": [
                {
                    "id": p.id,
                    "class": p.cls.value,
                    "polygon": [[float(x), float(y)]
                                for x, y in p.shape.vertices],
                    **({"label": p.label} if p.label is not None else {}),
                }
                for p in self.patches
            ],
            "adjacency": [list(pair) for pair in sorted(self.adjacency)],
        }
        if self.bev_homography is not None:
            data["bev_homography"] = self.bev_homography.to_flat()
        return data


def _check_overlaps(patches):
    # Bounding-circle prefilter keeps this O(n^2) check cheap.
    cents = [np.asarray(p.shape.centroid) for p in patches]
    rads = [p.shape.radius for p in patches]
    for i in range(len(patches)):
        for j in range(i + 1, len(patches)):
            if np.hypot(*(cents[i] - cents[j])) > rads[i] + rads[j]:
                continue
            overlap = iou(patches[i].shape, patches[j].shape)
            if overlap > MAX_PATCH_OVERLAP_IOU:
                raise ValidationError(
                    f"patches {patches[i].id} and {patches[j].id} overlap "
                    f"with IoU {overlap:.4f}")


def _dict_checksum(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_MAP_KEYS = {"patches", "adjacency", "bev_homography"}
_PATCH_KEYS = {"id", "class", "polygon", "label"}


def map_from_dict(data: dict) -> IntersectionMap:
    if not isinstance(data, dict):
        raise ParseError("map file must hold a JSON object")
    unknown = set(data) - _MAP_KEYS
    if unknown:
        raise ParseError(f"unknown map fields: {sorted(unknown)}")
    raw_patches = data.get("patches")
    if not isinstance(raw_patches, list) or not raw_patches:
        raise ParseError("map needs a non-empty 'patches' list")
    patches = []
    for entry in raw_patches:
        if not isinstance(entry, dict):
            raise ParseError("patch entries must be objects")
        unknown = set(entry) - _PATCH_KEYS
        if unknown:
            raise ParseError(f"unknown patch fields: {sorted(unknown)}")
        try:
            cls = PatchClass(entry["class"])
        except (KeyError, ValueError):
            raise ParseError(f"bad patch class {entry.get('class')!r}",
                             field="class") from None
        try:
            shape = ConvexPolygon(np.asarray(entry["polygon"], dtype=float))
        except (KeyError, TypeError):
            raise ParseError("patch polygon missing or malformed",
                             field="polygon") from None
        patches.append(Patch(id=int(entry["id"]), cls=cls, shape=shape,
                             label=entry.get("label")))
    if "adjacency" in data and data["adjacency"] is not None:
        adjacency = frozenset(
            (int(i), int(j)) for i, j in data["adjacency"])
    else:
        adjacency = compute_adjacency(patches)
    bev = None
    if data.get("bev_homography") is not None:
        bev = Homography.from_flat(data["bev_homography"])
    return IntersectionMap(patches=tuple(patches), adjacency=adjacency,
                           bev_homography=bev)


def load_map(path) -> IntersectionMap:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in map file: {exc}") from None
    return map_from_dict(data)


def save_map(imap: IntersectionMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(imap.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def compute_adjacency(patches, gap: float = DEFAULT_ADJACENCY_GAP
                      ) -> frozenset[tuple[int, int]]:
    """Pairs whose shapes lie within ``gap`` meters of each other."""
    if gap < 0:
        raise ValidationError("adjacency gap must be >= 0")
    patches = sorted(patches, key=lambda p: p.id)
    cents = [np.asarray(p.shape.centroid) for p in patches]
    rads = [p.shape.radius for p in patches]
    pairs = set()
    for i in range(len(patches)):
        for j in range(i + 1, len(patches)):
            if np.hypot(*(cents[i] - cents[j])) > rads[i] + rads[j] + gap:
                continue
            if polygon_min_distance(patches[i].shape, patches[j].shape) <= gap:
                pairs.add((patches[i].id, patches[j].id))
    return frozenset(pairs)


def associate(box: OrientedBox, imap: IntersectionMap,
              min_iou: float = DEFAULT_MIN_IOU) -> int | None:
    """Patch id with the highest IoU against the box footprint, or None
    when the best IoU is below ``min_iou``.  Ties break to the lowest id."""
    if not (0.0 < min_iou < 1.0):
        raise ValidationError("min_iou must lie in (0, 1)")
    t = imap._tables
    corners = box.corners().reshape(1, 4, 2)
    areas = np.array([box.area])
    radii = np.array([0.5 * math.hypot(box.length, box.width)])
    idx = _kernels.associate_track(corners, areas, radii, t.verts, t.nvert,
                                   t.areas, t.cent, t.rad, min_iou)[0]
    return None if idx < 0 else int(t.ids[idx])


def associate_many(corners: np.ndarray, areas: np.ndarray, radii: np.ndarray,
                   imap: IntersectionMap, min_iou: float = DEFAULT_MIN_IOU
                   ) -> np.ndarray:
    """Vector form of :func:`associate` over a track's boxes.

    Returns patch ids, -1 where nothing clears ``min_iou``.
    """
    t = imap._tables
    idx = _kernels.associate_track(corners, areas, radii, t.verts, t.nvert,
                                   t.areas, t.cent, t.rad, min_iou)
    ids = np.full(idx.shape[0], -1, dtype=np.int64)
    hit = idx >= 0
    ids[hit] = t.ids[idx[hit]]
    return ids


def _longest_shared_section(a: ConvexPolygon, b: ConvexPolygon):
    """Longest collinear boundary section shared by two polygons.

    Returns (length, midpoint) or None when no collinear contact exists.
    """
    best = None
    best_len = 0.0
    av = a.vertices
    bv = b.vertices
    an = np.roll(av, -1, axis=0)
    bn = np.roll(bv, -1, axis=0)
    for i in range(av.shape[0]):
        p1, p2 = av[i], an[i]
        d1 = p2 - p1
        n1 = math.hypot(*d1)
        if n1 == 0:
            continue
        for j in range(bv.shape[0]):
            q1, q2 = bv[j], bn[j]
            d2 = q2 - q1
            n2 = math.hypot(*d2)
            if n2 == 0:
                continue
            cross = d1[0] * d2[1] - d1[1] * d2[0]
            if abs(cross) / (n1 * n2) > 1e-9:
                continue
            off = (q1[0] - p1[0]) * d1[1] - (q1[1] - p1[1]) * d1[0]
            if abs(off) / n1 > 1e-6:
                continue
            t1 = ((q1 - p1) @ d1) / (n1 * n1)
            t2 = ((q2 - p1) @ d1) / (n1 * n1)
            lo = max(0.0, min(t1, t2))
            hi = min(1.0, max(t1, t2))
            if hi - lo <= 0:
                continue
            seg_len = (hi - lo) * n1
            if seg_len > best_len:
                best_len = seg_len
                mid = p1 + 0.5 * (lo + hi) * d1
                best = (seg_len, (float(mid[0]), float(mid[1])))
    return best


def shared_boundary_length(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Length of the longest collinear boundary section (0 when only a
    corner or a gap separates the polygons)."""
    section = _longest_shared_section(a, b)
    return 0.0 if section is None else section[0]


def shared_gate(a: ConvexPolygon, b: ConvexPolygon) -> tuple[float, float]:
    """Representative crossing point between two adjacent patches.

    For patches sharing a collinear boundary section this is the midpoint
    of the longest shared section; otherwise the midpoint of the closest
    point pair.
    """
    section = _longest_shared_section(a, b)
    if section is not None:
        return section[1]
    av = a.vertices
    bv = b.vertices
    an = np.roll(av, -1, axis=0)
    bn = np.roll(bv, -1, axis=0)
    best = (math.inf, None, None)
    for i in range(av.shape[0]):
        for j in range(bv.shape[0]):
            d, pa, pb = segment_closest_points(av[i], an[i], bv[j], bn[j])
            if d < best[0]:
                best = (d, pa, pb)
    pa, pb = best[1], best[2]
    return (float(0.5 * (pa[0] + pb[0])), float(0.5 * (pa[1] + pb[1])))
