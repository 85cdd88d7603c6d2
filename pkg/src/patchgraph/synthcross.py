"""The bundled "synth-cross" fixture: a 4-arm intersection with 2 lanes per
arm (3 segments each), a bicycle ring, crosswalks, center quadrants, and
corner curbs; 60 patches total, plus the default traffic scenario over it.

Geometry (meters, right-hand traffic, origin at the intersection center):
lanes are 3.5 m wide; each arm carries one inbound and one outbound lane;
crosswalk bands sit at 3.5..6.5 m from the center, bicycle-ring bands at
6.5..9.5 m; lane segments run from 9.5 m outward in 5 m steps.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .geometry import ConvexPolygon, Homography
from .ingest import AgentClass
from .rules import AnomalyKind
from .sim import (DEFAULT_FOOTPRINTS, DEFAULT_SPEEDS, NoiseConfig, Route,
                  ScenarioConfig)
from .topology import IntersectionMap, Patch, PatchClass, compute_adjacency

LANE = 3.5
CW_IN, CW_OUT = 3.5, 6.5
BK_IN, BK_OUT = 6.5, 9.5
SEG = 5.0
ARM_IN = 9.5
N_SEGMENTS = 3
CURB = 4.0

MAP_NAME = "synth-cross"


def _rect(x0, x1, y0, y1) -> ConvexPolygon:
    return ConvexPolygon(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
                                  dtype=float))


def _patches() -> list[Patch]:
    P = PatchClass
    items = [
        # center quadrants
        (0, P.ROAD, _rect(-LANE, 0, 0, LANE), "ctr-nw"),
        (1, P.ROAD, _rect(0, LANE, 0, LANE), "ctr-ne"),
        (2, P.ROAD, _rect(0, LANE, -LANE, 0), "ctr-se"),
        (3, P.ROAD, _rect(-LANE, 0, -LANE, 0), "ctr-sw"),
        # crosswalk bands, split at the road axis
        (4, P.CROSSWALK, _rect(-LANE, 0, CW_IN, CW_OUT), "cw-n-w"),
        (5, P.CROSSWALK, _rect(0, LANE, CW_IN, CW_OUT), "cw-n-e"),
        (6, P.CROSSWALK, _rect(CW_IN, CW_OUT, 0, LANE), "cw-e-n"),
        (7, P.CROSSWALK, _rect(CW_IN, CW_OUT, -LANE, 0), "cw-e-s"),
        (8, P.CROSSWALK, _rect(0, LANE, -CW_OUT, -CW_IN), "cw-s-e"),
        (9, P.CROSSWALK, _rect(-LANE, 0, -CW_OUT, -CW_IN), "cw-s-w"),
        (10, P.CROSSWALK, _rect(-CW_OUT, -CW_IN, -LANE, 0), "cw-w-s"),
        (11, P.CROSSWALK, _rect(-CW_OUT, -CW_IN, 0, LANE), "cw-w-n"),
        # bicycle-ring crossing bands over the arms
        (12, P.BICYCLE_LANE, _rect(-LANE, 0, BK_IN, BK_OUT), "bike-n-w"),
        (13, P.BICYCLE_LANE, _rect(0, LANE, BK_IN, BK_OUT), "bike-n-e"),
        (14, P.BICYCLE_LANE, _rect(BK_IN, BK_OUT, 0, LANE), "bike-e-n"),
        (15, P.BICYCLE_LANE, _rect(BK_IN, BK_OUT, -LANE, 0), "bike-e-s"),
        (16, P.BICYCLE_LANE, _rect(0, LANE, -BK_OUT, -BK_IN), "bike-s-e"),
        (17, P.BICYCLE_LANE, _rect(-LANE, 0, -BK_OUT, -BK_IN), "bike-s-w"),
        (18, P.BICYCLE_LANE, _rect(-BK_OUT, -BK_IN, -LANE, 0), "bike-w-s"),
        (19, P.BICYCLE_LANE, _rect(-BK_OUT, -BK_IN, 0, LANE), "bike-w-n"),
        # ring corner pieces connecting the crossing bands
        (20, P.BICYCLE_LANE, _rect(LANE, BK_OUT, CW_IN, CW_OUT), "ring-ne-v"),
        (21, P.BICYCLE_LANE, _rect(LANE, BK_OUT, BK_IN, BK_OUT), "ring-ne-h"),
        (22, P.BICYCLE_LANE, _rect(-BK_OUT, -LANE, CW_IN, CW_OUT), "ring-nw-v"),
        (23, P.BICYCLE_LANE, _rect(-BK_OUT, -LANE, BK_IN, BK_OUT), "ring-nw-h"),
        (24, P.BICYCLE_LANE, _rect(LANE, BK_OUT, -CW_OUT, -CW_IN), "ring-se-v"),
        (25, P.BICYCLE_LANE, _rect(LANE, BK_OUT, -BK_OUT, -BK_IN), "ring-se-h"),
        (26, P.BICYCLE_LANE, _rect(-BK_OUT, -LANE, -CW_OUT, -CW_IN), "ring-sw-v"),
        (27, P.BICYCLE_LANE, _rect(-BK_OUT, -LANE, -BK_OUT, -BK_IN), "ring-sw-h"),
    ]
    # lane segments: inbound lane first (toward the center), then outbound
    def seg_bounds(k):
        return ARM_IN + k * SEG, ARM_IN + (k + 1) * SEG

    pid = 28
    for k in range(N_SEGMENTS):  # north arm: in=west half, out=east half
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(-LANE, 0, lo, hi), f"n-in-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(0, LANE, lo, hi), f"n-out-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):  # east arm: in=north half, out=south half
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(lo, hi, 0, LANE), f"e-in-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(lo, hi, -LANE, 0), f"e-out-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):  # south arm: in=east half, out=west half
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(0, LANE, -hi, -lo), f"s-in-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(-LANE, 0, -hi, -lo), f"s-out-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):  # west arm: in=south half, out=north half
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(-hi, -lo, -LANE, 0), f"w-in-{k + 1}"))
        pid += 1
    for k in range(N_SEGMENTS):
        lo, hi = seg_bounds(k)
        items.append((pid, P.ROAD, _rect(-hi, -lo, 0, LANE), f"w-out-{k + 1}"))
        pid += 1
    # corner curbs, two per corner, outside the bicycle ring
    c0, c1 = BK_OUT, BK_OUT + CURB
    e0, e1 = LANE, LANE + CURB
    curbs = [
        (52, _rect(c0, c1, CW_IN, CW_IN + CURB), "curb-ne-e"),
        (53, _rect(e0, e1, c0, c1), "curb-ne-n"),
        (54, _rect(-c1, -c0, CW_IN, CW_IN + CURB), "curb-nw-w"),
        (55, _rect(-e1, -e0, c0, c1), "curb-nw-n"),
        (56, _rect(c0, c1, -CW_IN - CURB, -CW_IN), "curb-se-e"),
        (57, _rect(e0, e1, -c1, -c0), "curb-se-s"),
        (58, _rect(-c1, -c0, -CW_IN - CURB, -CW_IN), "curb-sw-w"),
        (59, _rect(-e1, -e0, -c1, -c0), "curb-sw-s"),
    ]
    for pid, shape, label in curbs:
        items.append((pid, P.CURB, shape, label))
    return [Patch(id=i, cls=c, shape=s, label=lb) for i, c, s, lb in items]


def build_map() -> IntersectionMap:
    patches = _patches()
    bev = Homography(np.array([[12.0, 0.0, 310.0],
                               [0.0, -12.0, 310.0],
                               [0.0, 0.0, 1.0]]))
    return IntersectionMap(patches=tuple(patches),
                           adjacency=compute_adjacency(patches),
                           bev_homography=bev)


VEHICLE_ROUTES = {
    "v-n-straight": (30, 29, 28, 12, 4, 0, 3, 9, 17, 43, 44, 45),
    "v-n-right": (30, 29, 28, 12, 4, 0, 11, 19, 49, 50, 51),
    "v-n-left": (30, 29, 28, 12, 4, 0, 3, 2, 7, 15, 37, 38, 39),
    "v-s-straight": (42, 41, 40, 16, 8, 2, 1, 5, 13, 31, 32, 33),
    "v-s-right": (42, 41, 40, 16, 8, 2, 7, 15, 37, 38, 39),
    "v-s-left": (42, 41, 40, 16, 8, 2, 1, 0, 11, 19, 49, 50, 51),
    "v-e-straight": (36, 35, 34, 14, 6, 1, 0, 11, 19, 49, 50, 51),
    "v-e-right": (36, 35, 34, 14, 6, 1, 5, 13, 31, 32, 33),
    "v-e-left": (36, 35, 34, 14, 6, 1, 0, 3, 9, 17, 43, 44, 45),
    "v-w-straight": (48, 47, 46, 18, 10, 3, 2, 7, 15, 37, 38, 39),
    "v-w-right": (48, 47, 46, 18, 10, 3, 9, 17, 43, 44, 45),
    "v-w-left": (48, 47, 46, 18, 10, 3, 2, 1, 5, 13, 31, 32, 33),
}

PEDESTRIAN_ROUTES = {
    "p-n-west": (52, 20, 5, 4, 22, 54),
    "p-n-east": (54, 22, 4, 5, 20, 52),
    "p-s-west": (56, 24, 8, 9, 26, 58),
    "p-s-east": (58, 26, 9, 8, 24, 56),
    "p-e-south": (53, 21, 20, 6, 7, 24, 25, 57),
    "p-e-north": (57, 25, 24, 7, 6, 20, 21, 53),
    "p-w-south": (55, 23, 22, 11, 10, 26, 27, 59),
    "p-w-north": (59, 27, 26, 10, 11, 22, 23, 55),
}

BICYCLE_ROUTES = {
    "b-ring-ccw": (13, 12, 23, 22, 19, 18, 26, 27, 17, 16, 25, 24, 15, 14,
                   20, 21, 13),
    "b-ring-cw": (13, 21, 20, 14, 15, 24, 25, 16, 17, 27, 26, 18, 19, 22,
                  23, 12, 13),
}


def build_scenario(seed: int = 42, normal_count: int = 1000,
                   noise: NoiseConfig | None = None,
                   anomaly_mix: dict | None = None) -> ScenarioConfig:
    routes = []
    for nodes in VEHICLE_ROUTES.values():
        routes.append(Route(nodes=nodes,
                            classes=frozenset({AgentClass.VEHICLE})))
    for nodes in PEDESTRIAN_ROUTES.values():
        routes.append(Route(nodes=nodes,
                            classes=frozenset({AgentClass.PEDESTRIAN})))
    for nodes in BICYCLE_ROUTES.values():
        routes.append(Route(nodes=nodes,
                            classes=frozenset({AgentClass.BICYCLIST})))
    if anomaly_mix is None:
        anomaly_mix = {AnomalyKind.IMPROPER_ZONE: 24,
                       AnomalyKind.UNLAWFUL_STOP: 3,
                       AnomalyKind.IMPROPER_TURN: 14}
    return ScenarioConfig(
        routes=tuple(routes),
        agent_mix={AgentClass.VEHICLE: 0.6,
                   AgentClass.PEDESTRIAN: 0.25,
                   AgentClass.BICYCLIST: 0.15},
        speed_ranges=dict(DEFAULT_SPEEDS),
        fps=10.0,
        noise=noise or NoiseConfig(),
        seed=seed,
        normal_count=normal_count,
        anomaly_mix=dict(anomaly_mix),
        footprints=dict(DEFAULT_FOOTPRINTS),
        map_name=MAP_NAME,
    )


def bundled_map_path() -> str:
    return str(resources.files("patchgraph").joinpath("data/synth_cross.json"))


def bundled_scenario_path() -> str:
    return str(resources.files("patchgraph")
               .joinpath("data/synth_cross_scenario.json"))
