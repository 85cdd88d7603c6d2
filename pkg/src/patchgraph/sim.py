"""Deterministic synthetic traffic generator: normal routes over an
intersection map plus labeled anomaly injection, producing ingest-compatible
detection streams with exact ground truth."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (InfeasibleInjection, NoEligibleRoute, ParseError,
                     ValidationError)
from .geometry import OrientedBox, Point2
from .ingest import (DEFAULT_FPS, AgentClass, Detection, Track, TrackSample)
from .rules import AnomalyKind
from .topology import IntersectionMap, shared_boundary_length, shared_gate

DEFAULT_FOOTPRINTS = {
    AgentClass.VEHICLE: (4.5, 1.8),
    AgentClass.PEDESTRIAN: (1.6, 1.6),
    AgentClass.BICYCLIST: (2.0, 0.9),
}
DEFAULT_SPEEDS = {
    AgentClass.VEHICLE: (4.5, 7.0),
    AgentClass.PEDESTRIAN: (1.0, 1.4),
    AgentClass.BICYCLIST: (3.5, 5.0),
}
# Injected jaywalkers hurry: speed multiplier on their class range.
INTRUDER_HAAST = 2.5
# Proper shared-edge length required between consecutive injected nodes.
MIN_GATE_EDGE = 1.0


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Route:
    nodes: tuple[int, ...]
    classes: frozenset[AgentClass]

    def __post_init__(self):
        if len(self.nodes) < 1:
            raise ValidationError("route needs at least one node")
        if not self.classes:
            raise ValidationError("route needs at least one eligible class")


@dataclass(frozen=True)
class NoiseConfig:
    pos_sigma: float = 0.0
    yaw_flip_p: float = 0.0
    dropout_p: float = 0.0

    def __post_init__(self):
        if self.pos_sigma < 0:
            raise ValidationError("pos_sigma must be >= 0")
        for name in ("yaw_flip_p", "dropout_p"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    routes: tuple[Route, ...]
    agent_mix: dict
    speed_ranges: dict
    fps: float = DEFAULT_FPS
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    normal_count: int = 100
    anomaly_mix: dict = field(default_factory=dict)
    footprints: dict = field(default_factory=lambda: dict(DEFAULT_FOOTPRINTS))
    map_name: str | None = None

    def __post_init__(self):
        total = sum(self.agent_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"agent mix sums to {total}, expected 1")
        for agent, (lo, hi) in self.speed_ranges.items():
            if not (0 < lo <= hi):
                raise ValidationError(f"bad speed range for {agent}")
        if self.fps <= 0:
            raise ValidationError("fps must be positive")


@dataclass(frozen=True)
class TruthRecord:
    track: int
    agent: AgentClass
    kind: AnomalyKind
    nodes: tuple[int, ...]
    start: int
    end: int


@dataclass(frozen=True)
class LabeledTrack:
    track: Track
    route: tuple[int, ...]
    truth: tuple[TruthRecord, ...] = ()


@dataclass(frozen=True)
class SimulationResult:
    detections: list
    truth: list
    labeled: list


# ---------------------------------------------------------------------------
# scenario (de)serialization

_SCN_KEYS = {"map", "routes", "agent_mix", "speeds", "fps", "noise", "seed",
             "normal_count", "anomaly_mix", "footprints"}
_NOISE_KEYS = {"pos_sigma", "yaw_flip_p", "dropout_p"}


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "map": cfg.map_name,
        "fps": cfg.fps,
        "seed": cfg.seed,
        "normal_count": cfg.normal_count,
        "agent_mix": {a.value: cfg.agent_mix[a]
                      for a in AgentClass if a in cfg.agent_mix},
        "speeds": {a.value: list(cfg.speed_ranges[a])
                   for a in AgentClass if a in cfg.speed_ranges},
        "footprints": {a.value: list(cfg.footprints[a])
                       for a in AgentClass if a in cfg.footprints},
        "noise": {"pos_sigma": cfg.noise.pos_sigma,
                  "yaw_flip_p": cfg.noise.yaw_flip_p,
                  "dropout_p": cfg.noise.dropout_p},
        "anomaly_mix": {k.value: cfg.anomaly_mix[k]
                        for k in AnomalyKind if k in cfg.anomaly_mix},
        "routes": [{"nodes": list(r.nodes),
                    "classes": sorted(c.value for c in r.classes)}
                   for r in cfg.routes],
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ParseError("scenario file must hold a JSON object")
    unknown = set(data) - _SCN_KEYS
    if unknown:
        raise ParseError(f"unknown scenario fields: {sorted(unknown)}")
    try:
        noise_raw = data.get("noise", {})
        unknown = set(noise_raw) - _NOISE_KEYS
        if unknown:
            raise ParseError(f"unknown noise fields: {sorted(unknown)}")
        routes = tuple(
            Route(nodes=tuple(int(n) for n in r["nodes"]),
                  classes=frozenset(AgentClass(c) for c in r["classes"]))
            for r in data["routes"])
        footprints = dict(DEFAULT_FOOTPRINTS)
        for key, value in data.get("footprints", {}).items():
            footprints[AgentClass(key)] = (float(value[0]), float(value[1]))
        return ScenarioConfig(
            routes=routes,
            agent_mix={AgentClass(k): float(v)
                       for k, v in data["agent_mix"].items()},
            speed_ranges={AgentClass(k): (float(v[0]), float(v[1]))
                          for k, v in data["speeds"].items()},
            fps=float(data.get("fps", DEFAULT_FPS)),
            noise=NoiseConfig(**{k: float(v) for k, v in noise_raw.items()}),
            seed=int(data.get("seed", 0)),
            normal_count=int(data.get("normal_count", 100)),
            anomaly_mix={AnomalyKind(k): int(v)
                         for k, v in data.get("anomaly_mix", {}).items()},
            footprints=footprints,
            map_name=data.get("map"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed scenario: {exc}") from None


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in scenario: {exc}") from None
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(cfg), fh, indent=1, sort_keys=True)
        fh.write("\n")


def validate_scenario(imap: IntersectionMap, cfg: ScenarioConfig) -> None:
    adjacency = cfg and imap.adjacency
    for route in cfg.routes:
        for node in route.nodes:
            if node not in imap:
                raise ValidationError(f"route references unknown node {node}")
        for u, v in zip(route.nodes, route.nodes[1:]):
            if (min(u, v), max(u, v)) not in adjacency:
                raise ValidationError(
                    f"route nodes {u} and {v} are not adjacent")


# ---------------------------------------------------------------------------
# motion plans

@dataclass
class _Plan:
    agent: AgentClass
    route: tuple[int, ...]
    waypoints: np.ndarray     # (k, 2); k == 1 for a parked agent
    speed: float
    length: float
    width: float
    yaw0: float = 0.0         # pose for single-point plans
    holds: tuple = ()         # ((arc_s, frames), ...)
    specs: tuple = ()         # (("turn", u, v) | ("zone", n) | ("stop", n), ...)
    park_frames: int = 0


def route_waypoints(imap: IntersectionMap, nodes) -> np.ndarray:
    """Centroid-to-centroid polyline through the shared-boundary midpoints
    of consecutive patches.

    When a node's entry and exit gates coincide (an immediate double-back,
    e.g. nosing into a lane and reversing out), the node's centroid is
    inserted as a via point so the node still gets a real chord.
    """
    gates = [np.asarray(imap.patch(nodes[0]).shape.centroid, dtype=float)]
    for u, v in zip(nodes, nodes[1:]):
        gates.append(np.asarray(
            shared_gate(imap.patch(u).shape, imap.patch(v).shape)))
    gates.append(np.asarray(imap.patch(nodes[-1]).shape.centroid, dtype=float))
    pts = [gates[0]]
    for i, node in enumerate(nodes):
        entry, exit_ = gates[i], gates[i + 1]
        if np.hypot(*(exit_ - entry)) < 1e-6:
            pts.append(np.asarray(imap.patch(node).shape.centroid,
                                  dtype=float))
        pts.append(exit_)
    out = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - out[-1])) > 1e-9:
            out.append(p)
    return np.asarray(out)


def _path_tables(waypoints: np.ndarray):
    seg = np.diff(waypoints, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    yaws = np.array([wrap_angle(math.atan2(d[1], d[0])) for d in seg])
    return cum, yaws


def _sample_path(plan: _Plan, fps: float):
    """Per-frame clean positions and yaws along the plan."""
    if plan.waypoints.shape[0] == 1:
        n = max(plan.park_frames, 1)
        pos = np.repeat(plan.waypoints, n, axis=0)
        yaws = np.full(n, wrap_angle(plan.yaw0))
        return pos, yaws
    cum, seg_yaw = _path_tables(plan.waypoints)
    total = float(cum[-1])
    step = plan.speed / fps
    arcs = []
    holds = sorted(plan.holds)
    hi = 0
    s = 0.0
    while s <= total + 1e-9:
        if hi < len(holds) and s + 1e-9 >= holds[hi][0]:
            sh, count = holds[hi]
            arcs.extend([sh] * count)
            hi += 1
            s = sh + step
            continue
        arcs.append(s)
        s += step
    arcs = np.clip(np.asarray(arcs), 0.0, total)
    x = np.interp(arcs, cum, plan.waypoints[:, 0])
    y = np.interp(arcs, cum, plan.waypoints[:, 1])
    seg_idx = np.clip(np.searchsorted(cum, arcs, side="right") - 1,
                      0, len(seg_yaw) - 1)
    return np.stack([x, y], axis=1), seg_yaw[seg_idx]


def _node_arc_interval(imap, plan, node, ds=0.05):
    """First contiguous arc interval of the plan's path inside ``node``."""
    cum, _ = _path_tables(plan.waypoints)
    total = float(cum[-1])
    arcs = np.arange(0.0, total + ds, ds)
    x = np.interp(arcs, cum, plan.waypoints[:, 0])
    y = np.interp(arcs, cum, plan.waypoints[:, 1])
    poly = imap.patch(node).shape
    inside = np.array([poly.contains((px, py)) for px, py in zip(x, y)])
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        raise InfeasibleInjection(f"plan never enters node {node}")
    start = idx[0]
    end = start
    for i in idx[1:]:
        if i == end + 1:
            end = i
        else:
            break
    return float(arcs[start]), float(arcs[end])


def _extract_truth(imap, plan, positions, track_id):
    """Resolve truth specs into frame spans using clean positions."""
    records = []
    cursor = 0
    n = positions.shape[0]
    cache: dict[int, np.ndarray] = {}

    def inside(node):
        if node not in cache:
            poly = imap.patch(node).shape
            cache[node] = np.array(
                [poly.contains(p) for p in positions])
        return cache[node]

    for spec in plan.specs:
        kind = spec[0]
        if kind == "turn":
            _, u, v = spec
            in_v = inside(v)
            f = cursor
            while f < n and not (in_v[f] and (f == 0 or not in_v[f - 1])):
                f += 1
            if f >= n:
                raise InfeasibleInjection(
                    f"turn truth {u}->{v} never materializes")
            records.append(TruthRecord(
                track=track_id, agent=plan.agent,
                kind=AnomalyKind.IMPROPER_TURN, nodes=(u, v),
                start=max(f - 1, 0), end=f))
            cursor = f
        else:
            _, node = spec
            in_node = inside(node)
            idx = np.flatnonzero(in_node[cursor:]) + cursor
            if idx.size == 0:
                raise InfeasibleInjection(
                    f"{kind} truth at node {node} never materializes")
            f0 = int(idx[0])
            f1 = f0
            for i in idx[1:]:
                if i == f1 + 1:
                    f1 = int(i)
                else:
                    break
            rule = (AnomalyKind.IMPROPER_ZONE if kind == "zone"
                    else AnomalyKind.UNLAWFUL_STOP)
            records.append(TruthRecord(
                track=track_id, agent=plan.agent, kind=rule,
                nodes=(node,), start=f0, end=f1))
            cursor = f1 + 1
    return records


def _emit_track(imap, plan, track_id, fps, noise: NoiseConfig, rng
                ) -> tuple[Track, list[TruthRecord]]:
    positions, yaws = _sample_path(plan, fps)
    truth = _extract_truth(imap, plan, positions, track_id)
    samples = []
    for k in range(positions.shape[0]):
        conf = float(rng.uniform(0.7, 1.0))
        if noise.dropout_p > 0 and rng.random() < noise.dropout_p:
            continue
        x, y = positions[k]
        if noise.pos_sigma > 0:
            x += rng.normal(0.0, noise.pos_sigma)
            y += rng.normal(0.0, noise.pos_sigma)
        yaw = yaws[k]
        if noise.yaw_flip_p > 0 and rng.random() < noise.yaw_flip_p:
            yaw = wrap_angle(yaw + math.pi)
        box = OrientedBox(center=Point2(float(x), float(y)),
                          length=plan.length, width=plan.width,
                          yaw=float(yaw))
        samples.append(TrackSample(k, box, 0, conf))
    if not samples:
        box = OrientedBox(center=Point2(*map(float, positions[0])),
                          length=plan.length, width=plan.width,
                          yaw=float(yaws[0]))
        samples = [TrackSample(0, box, 0, 1.0)]
    track = Track(global_id=track_id, agent=plan.agent,
                  samples=tuple(samples))
    return track, truth


def _pick_class(cfg: ScenarioConfig, rng) -> AgentClass:
    roll = rng.random()
    acc = 0.0
    ordered = [a for a in AgentClass if a in cfg.agent_mix]
    for agent in ordered:
        acc += cfg.agent_mix[agent]
        if roll < acc:
            return agent
    return ordered[-1]


def _normal_plan(imap, cfg, rng) -> _Plan:
    agent = _pick_class(cfg, rng)
    eligible = [r for r in cfg.routes if agent in r.classes]
    if not eligible:
        raise NoEligibleRoute(f"no route for class {agent.value}")
    route = eligible[int(rng.integers(len(eligible)))]
    lo, hi = cfg.speed_ranges[agent]
    speed = float(rng.uniform(lo, hi))
    length, width = cfg.footprints[agent]
    return _Plan(agent=agent, route=route.nodes,
                 waypoints=route_waypoints(imap, route.nodes), speed=speed,
                 length=length, width=width)


def generate_normal(imap: IntersectionMap, cfg: ScenarioConfig, n: int
                    ) -> list[LabeledTrack]:
    """n noise-affected tracks along the scenario's routes; no truth."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    root = np.random.SeedSequence(cfg.seed).spawn(3)[0]
    out = []
    for i, child in enumerate(root.spawn(n)):
        rng = np.random.default_rng(child)
        plan = _normal_plan(imap, cfg, rng)
        track, _ = _emit_track(imap, plan, i, cfg.fps, cfg.noise, rng)
        out.append(LabeledTrack(track=track, route=plan.route))
    return out


# ---------------------------------------------------------------------------
# anomaly injection

def _legal_edges(cfg: ScenarioConfig) -> set[tuple[int, int]]:
    edges = set()
    for route in cfg.routes:
        edges.update(zip(route.nodes, route.nodes[1:]))
    return edges


def _class_usage(imap, cfg) -> dict:
    used: dict[AgentClass, set] = {a: set() for a in AgentClass}
    for route in cfg.routes:
        classes = {imap.patch(n).cls for n in route.nodes}
        for agent in route.classes:
            used[agent].update(classes)
    return used


def _proper_edge(imap, u, v) -> bool:
    return shared_boundary_length(
        imap.patch(u).shape, imap.patch(v).shape) >= MIN_GATE_EDGE


class _Injector:
    """Pre-computed candidate pools for each anomaly variant."""

    def __init__(self, imap: IntersectionMap, cfg: ScenarioConfig):
        self.imap = imap
        self.cfg = cfg
        self.legal = _legal_edges(cfg)
        self.usage = _class_usage(imap, cfg)
        self.vehicle_routes = [r.nodes for r in cfg.routes
                               if AgentClass.VEHICLE in r.classes]
        self.adj = {n: set() for n in imap.node_ids}
        for i, j in imap.adjacency:
            self.adj[i].add(j)
            self.adj[j].add(i)
        self.splices = self._splice_candidates()
        self.wrong_ways = self._wrong_way_candidates()
        self.cycles = self._cycle_candidates()
        self.park_spots = self._park_candidates()
        self.intrusions = self._intrusion_candidates()

    # -- improper turn -----------------------------------------------------
    def _splice_candidates(self):
        found = []
        for r in self.vehicle_routes:
            for j in range(1, len(r) - 1):
                u = r[j]
                for r2 in self.vehicle_routes:
                    for k in range(1, len(r2) - 1):
                        v = r2[k]
                        if v == u or v not in self.adj[u]:
                            continue
                        if (u, v) in self.legal:
                            continue
                        if self.imap.patch(u).cls != self.imap.patch(v).cls:
                            continue
                        if not _proper_edge(self.imap, u, v):
                            continue
                        route = r[:j + 1] + r2[k:]
                        if len(set(route)) != len(route):
                            continue
                        found.append(route)
        return sorted(set(found))

    def _wrong_way_candidates(self):
        found = []
        for r in self.vehicle_routes:
            for j in range(1, len(r) - 1):
                u = r[j]
                for r2 in self.vehicle_routes:
                    for k in range(3, len(r2)):
                        if r2[k] != u:
                            continue
                        reverse = tuple(reversed(r2[:k]))
                        hops = list(zip((u,) + reverse, reverse))
                        if any(h in self.legal for h in hops):
                            continue
                        route = r[:j + 1] + reverse
                        if len(set(route)) != len(route):
                            continue
                        found.append(route)
        return sorted(set(found))

    def _cycle_candidates(self, max_hops=5):
        cycles = set()
        for r in self.vehicle_routes:
            for i in range(1, len(r) - 1):
                start = r[i]
                stack = [(start, (start,))]
                while stack:
                    cur, path = stack.pop()
                    for nxt in sorted(self.adj[cur]):
                        if (cur, nxt) in self.legal:
                            continue
                        if not _proper_edge(self.imap, cur, nxt):
                            continue
                        if self.imap.patch(nxt).cls != self.imap.patch(start).cls:
                            continue
                        if nxt == start and len(path) >= 4:
                            cycles.add((r, i, path + (start,)))
                        elif nxt not in path and len(path) < max_hops:
                            stack.append((nxt, path + (nxt,)))
        return sorted(cycles)

    # -- improper zone -----------------------------------------------------
    def _park_candidates(self):
        vehicle_classes = self.usage[AgentClass.VEHICLE]
        return [p.id for p in self.imap.patches
                if p.cls not in vehicle_classes]

    def _intrusion_candidates(self):
        ped_nodes = set()
        for route in self.cfg.routes:
            if AgentClass.PEDESTRIAN in route.classes:
                ped_nodes.update(route.nodes)
        ped_classes = self.usage[AgentClass.PEDESTRIAN]
        ped_routes = [r.nodes for r in self.cfg.routes
                      if AgentClass.PEDESTRIAN in r.classes]
        found = []
        for p in self.imap.patches:
            if p.cls in ped_classes:
                continue
            v = p.id
            entries = [a for a in sorted(ped_nodes) if (a, v) in self.legal]
            exits = [b for b in sorted(ped_nodes) if (v, b) in self.legal]
            for a in entries:
                for b in exits:
                    if a == b:
                        continue
                    for ra in ped_routes:
                        if a not in ra:
                            continue
                        prefix = ra[:ra.index(a) + 1]
                        for rb in ped_routes:
                            if b not in rb:
                                continue
                            suffix = rb[rb.index(b):]
                            route = prefix + (v,) + suffix
                            if len(set(route)) != len(route):
                                continue
                            found.append(route)
        return sorted(set(found))

    # -- plan builders -----------------------------------------------------
    def turn_plan(self, variant: int, rng) -> _Plan:
        pools = [self.splices, self.wrong_ways,
                 [c[0][:c[1] + 1] + c[2][1:] + c[0][c[1] + 1:]
                  for c in self.cycles]]
        order = [variant % 3, (variant + 1) % 3, (variant + 2) % 3]
        for which in order:
            pool = pools[which]
            if pool:
                route = pool[int(rng.integers(len(pool)))]
                return self._vehicle_plan(route, rng)
        raise InfeasibleInjection("no improper-turn candidate on this map")

    def _vehicle_plan(self, route, rng) -> _Plan:
        lo, hi = self.cfg.speed_ranges[AgentClass.VEHICLE]
        speed = float(rng.uniform(lo, hi))
        length, width = self.cfg.footprints[AgentClass.VEHICLE]
        specs = tuple(("turn", u, v) for u, v in zip(route, route[1:])
                      if (u, v) not in self.legal)
        return _Plan(agent=AgentClass.VEHICLE, route=tuple(route),
                     waypoints=route_waypoints(self.imap, route),
                     speed=speed, length=length, width=width, specs=specs)

    def zone_plan(self, variant: int, rng) -> _Plan:
        if variant % 2 == 0 and self.park_spots:
            return self._park_plan(rng)
        if self.intrusions:
            return self._intrusion_plan(rng)
        if self.park_spots:
            return self._park_plan(rng)
        raise InfeasibleInjection("no improper-zone candidate on this map")

    def _park_plan(self, rng) -> _Plan:
        node = self.park_spots[int(rng.integers(len(self.park_spots)))]
        centroid = self.imap.patch(node).shape.centroid
        length, width = self.cfg.footprints[AgentClass.VEHICLE]
        nominal = self._nominal_dwell_frames(node)
        frames = max(int(math.ceil(1.5 * nominal)), 10)
        return _Plan(agent=AgentClass.VEHICLE, route=(node,),
                     waypoints=np.array([[centroid.x, centroid.y]]),
                     speed=0.0, length=length, width=width,
                     yaw0=float(rng.uniform(-math.pi, math.pi)),
                     specs=(("zone", node),), park_frames=frames)

    def _intrusion_plan(self, rng) -> _Plan:
        route = self.intrusions[int(rng.integers(len(self.intrusions)))]
        lo, hi = self.cfg.speed_ranges[AgentClass.PEDESTRIAN]
        speed = float(rng.uniform(lo, hi)) * INTRUDER_HAAST
        length, width = self.cfg.footprints[AgentClass.PEDESTRIAN]
        ped_classes = self.usage[AgentClass.PEDESTRIAN]
        specs = tuple(("zone", n) for n in route
                      if self.imap.patch(n).cls not in ped_classes)
        return _Plan(agent=AgentClass.PEDESTRIAN, route=tuple(route),
                     waypoints=route_waypoints(self.imap, route),
                     speed=speed, length=length, width=width, specs=specs)

    def stop_plan(self, rng) -> _Plan:
        if not self.vehicle_routes:
            raise InfeasibleInjection("no vehicle route for a stop")
        route = self.vehicle_routes[int(rng.integers(len(self.vehicle_routes)))]
        interior = route[2:-2] if len(route) > 4 else route[1:-1]
        if not interior:
            raise InfeasibleInjection("route too short for a stop")
        center = np.mean([np.asarray(p.shape.centroid)
                          for p in self.imap.patches], axis=0)
        node = min(interior, key=lambda n: (
            float(np.hypot(*(np.asarray(self.imap.patch(n).shape.centroid)
                             - center))), n))
        lo, hi = self.cfg.speed_ranges[AgentClass.VEHICLE]
        speed = float(rng.uniform(lo, hi))
        length, width = self.cfg.footprints[AgentClass.VEHICLE]
        plan = _Plan(agent=AgentClass.VEHICLE, route=tuple(route),
                     waypoints=route_waypoints(self.imap, route),
                     speed=speed, length=length, width=width)
        s0, s1 = _node_arc_interval(self.imap, plan, node)
        nominal = (s1 - s0) / speed * self.cfg.fps
        hold = int(math.ceil(5.0 * nominal))
        plan.holds = ((0.5 * (s0 + s1), hold),)
        plan.specs = (("stop", node),)
        return plan

    def _nominal_dwell_frames(self, node) -> float:
        samples = []
        for route in self.cfg.routes:
            if node not in route.nodes:
                continue
            for agent in route.classes:
                lo, hi = self.cfg.speed_ranges[agent]
                plan = _Plan(agent=agent, route=route.nodes,
                             waypoints=route_waypoints(self.imap, route.nodes),
                             speed=0.5 * (lo + hi), length=1, width=1)
                try:
                    s0, s1 = _node_arc_interval(self.imap, plan, node)
                except InfeasibleInjection:
                    continue
                samples.append((s1 - s0) / plan.speed * self.cfg.fps)
        return float(np.mean(samples)) if samples else 15.0


def inject_anomalies(imap: IntersectionMap, cfg: ScenarioConfig,
                     mix: dict) -> list[LabeledTrack]:
    """Labeled anomalous tracks per the requested kind counts."""
    for count in mix.values():
        if count < 0:
            raise ValidationError("anomaly counts must be >= 0")
    injector = _Injector(imap, cfg)
    root = np.random.SeedSequence(cfg.seed).spawn(3)[1]
    plans = []
    for kind in AnomalyKind:
        count = mix.get(kind, 0)
        for variant in range(count):
            plans.append((kind, variant))
    out = []
    for i, (child, (kind, variant)) in enumerate(
            zip(root.spawn(len(plans)), plans)):
        rng = np.random.default_rng(child)
        if kind is AnomalyKind.IMPROPER_TURN:
            plan = injector.turn_plan(variant, rng)
        elif kind is AnomalyKind.IMPROPER_ZONE:
            plan = injector.zone_plan(variant, rng)
        else:
            plan = injector.stop_plan(rng)
        track, truth = _emit_track(imap, plan, i, cfg.fps, cfg.noise, rng)
        out.append(LabeledTrack(track=track, route=plan.route,
                                truth=tuple(truth)))
    return out


# ---------------------------------------------------------------------------
# full scenario run

def _shift_track(track: Track, gid: int, offset: int) -> Track:
    samples = tuple(TrackSample(s.frame + offset, s.box, s.camera, s.conf)
                    for s in track.samples)
    return Track(global_id=gid, agent=track.agent, samples=samples)


def run_scenario(imap: IntersectionMap, cfg: ScenarioConfig
                 ) -> SimulationResult:
    """Generate the configured normal + anomalous traffic, interleave the
    tracks on a shared clock, and emit an ingest-ready detection stream."""
    validate_scenario(imap, cfg)
    normals = generate_normal(imap, cfg, cfg.normal_count) \
        if cfg.normal_count else []
    anomalies = inject_anomalies(imap, cfg, cfg.anomaly_mix) \
        if any(cfg.anomaly_mix.values()) else []
    combined = normals + anomalies
    sched = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2])
    order = sched.permutation(len(combined))
    start = 0
    labeled = []
    truth = []
    detections = []
    for gid, idx in enumerate(order):
        lt = combined[idx]
        track = _shift_track(lt.track, gid, start)
        records = tuple(TruthRecord(track=gid, agent=r.agent, kind=r.kind,
                                    nodes=r.nodes, start=r.start + start,
                                    end=r.end + start)
                        for r in lt.truth)
        labeled.append(LabeledTrack(track=track, route=lt.route,
                                    truth=records))
        truth.extend(records)
        for s in track.samples:
            detections.append(Detection(camera=0, frame=s.frame,
                                        track=gid, agent=track.agent,
                                        box=s.box, conf=s.conf))
        start += int(sched.integers(2, 7))
    detections.sort(key=lambda d: (d.frame, d.track))
    truth.sort(key=lambda r: (r.track, r.start, r.kind.value))
    return SimulationResult(detections=detections, truth=truth,
                            labeled=labeled)


# ---------------------------------------------------------------------------
# truth sidecar I/O

def truth_to_dict(record: TruthRecord) -> dict:
    return {
        "track": record.track,
        "class": record.agent.value,
        "kind": record.kind.value,
        "nodes": list(record.nodes),
        "start": record.start,
        "end": record.end,
    }


def truth_from_dict(data: dict) -> TruthRecord:
    try:
        return TruthRecord(
            track=int(data["track"]),
            agent=AgentClass(data["class"]),
            kind=AnomalyKind(data["kind"]),
            nodes=tuple(int(n) for n in data["nodes"]),
            start=int(data["start"]),
            end=int(data["end"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed truth record: {exc}") from None


def write_truth(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(truth_to_dict(record), separators=(",", ":")))
            fh.write("\n")


def read_truth(path) -> list[TruthRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(truth_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}",
                                 line=line_no) from None
    return records
