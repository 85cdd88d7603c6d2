"""Normal-behavior model: directed link-weight counting over patch visits,
pruning, per-node dwell statistics, and allowed-agent sets."""

from __future__ import annotations

import json
import types
from dataclasses import dataclass, field

from .errors import ChecksumMismatch, EmptyModel, ParseError, UnknownNode
from .ingest import DEFAULT_FPS, AgentClass, NodeVisit
from .topology import IntersectionMap

DEFAULT_PRUNE_THRESHOLD = 5
DEFAULT_MIN_SUPPORT = 3
MODEL_VERSION = 1


class LearningState:
    """Mutable accumulation state; single writer, not thread safe."""

    def __init__(self, imap: IntersectionMap, fps: float = DEFAULT_FPS):
        self.node_ids = set(imap.node_ids)
        self.map_checksum = imap.checksum
        self.fps = float(fps)
        # Unity initialization: every adjacency gets weight 1 both ways,
        # plus a self link per node.
        self.weights: dict[tuple[int, int], int] = {}
        for i, j in imap.adjacency:
            self.weights[(i, j)] = 1
            self.weights[(j, i)] = 1
        for n in self.node_ids:
            self.weights[(n, n)] = 1
        self.dwell_sum: dict[int, dict[AgentClass, float]] = {}
        self.dwell_count: dict[int, dict[AgentClass, int]] = {}
        self.agent_counts: dict[int, dict[AgentClass, int]] = {}
        self.total_visits = 0


def init_model(imap: IntersectionMap, fps: float = DEFAULT_FPS
               ) -> LearningState:
    return LearningState(imap, fps)


def observe(state: LearningState, visits: list[NodeVisit]) -> LearningState:
    """Fold one track's ordered visit sequence into the state."""
    prev = None
    for visit in visits:
        node = visit.node
        if node not in state.node_ids:
            raise UnknownNode(f"visit references unknown node {node}")
        if prev is not None:
            key = (prev, node)
            # Links first seen here start from the implicit unity init.
            state.weights[key] = state.weights.get(key, 1) + 1
        dwell = visit.dwell
        state.dwell_sum.setdefault(node, {}).setdefault(visit.agent, 0.0)
        state.dwell_sum[node][visit.agent] += dwell
        state.dwell_count.setdefault(node, {}).setdefault(visit.agent, 0)
        state.dwell_count[node][visit.agent] += 1
        state.agent_counts.setdefault(node, {}).setdefault(visit.agent, 0)
        state.agent_counts[node][visit.agent] += 1
        state.total_visits += 1
        prev = node
    return state


@dataclass(frozen=True)
class NodeModel:
    node: int
    successors: frozenset[int]
    mean_dwell: types.MappingProxyType
    mean_dwell_all: float | None
    allowed: frozenset[AgentClass]
    weights: types.MappingProxyType
    dwell_counts: types.MappingProxyType


@dataclass(frozen=True)
class BehaviorModel:
    """Frozen model; safe for unrestricted concurrent reads."""

    nodes: types.MappingProxyType
    fps: float
    map_checksum: str
    meta: types.MappingProxyType

    def node(self, node_id: int) -> NodeModel:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"node {node_id} not in model") from None

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.nodes


def finalize(state: LearningState,
             prune_threshold: int = DEFAULT_PRUNE_THRESHOLD,
             min_support: int = DEFAULT_MIN_SUPPORT,
             tavg_per_class: bool = True) -> BehaviorModel:
    """Prune links below ``prune_threshold`` and freeze the model.

    ``tavg_per_class=False`` collapses dwell means over agent classes
    (single mean per node).
    """
    if prune_threshold < 1:
        raise ValueError("prune_threshold must be >= 1")
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    if state.total_visits == 0:
        raise EmptyModel("no visits observed; nothing to finalize")

    nodes = {}
    for node in sorted(state.node_ids):
        succ = {node}
        weights = {}
        for (u, v), w in state.weights.items():
            if u != node:
                continue
            weights[v] = w
            if w >= prune_threshold:
                succ.add(v)
        sums = state.dwell_sum.get(node, {})
        counts = state.dwell_count.get(node, {})
        mean_dwell = {}
        if tavg_per_class:
            for agent, count in counts.items():
                if count >= min_support:
                    mean_dwell[agent] = sums[agent] / count
        total_count = sum(counts.values())
        mean_all = (sum(sums.values()) / total_count) if total_count else None
        allowed = frozenset(agent
                            for agent, c in state.agent_counts.get(node, {})
                            .items() if c >= min_support)
        nodes[node] = NodeModel(
            node=node,
            successors=frozenset(succ),
            mean_dwell=types.MappingProxyType(mean_dwell),
            mean_dwell_all=mean_all,
            allowed=allowed,
            weights=types.MappingProxyType(weights),
            dwell_counts=types.MappingProxyType(dict(counts)),
        )
    meta = {
        "prune_threshold": prune_threshold,
        "min_support": min_support,
        "training_visits": state.total_visits,
        "tavg_per_class": tavg_per_class,
    }
    return BehaviorModel(nodes=types.MappingProxyType(nodes), fps=state.fps,
                         map_checksum=state.map_checksum,
                         meta=types.MappingProxyType(meta))


def with_meta(model: BehaviorModel, **extra) -> BehaviorModel:
    """Copy of the model with extra entries merged into its meta block."""
    meta = dict(model.meta)
    meta.update(extra)
    return BehaviorModel(nodes=model.nodes, fps=model.fps,
                         map_checksum=model.map_checksum,
                         meta=types.MappingProxyType(meta))


def model_to_dict(model: BehaviorModel) -> dict:
    nodes = []
    for node_id in sorted(model.nodes):
        nm = model.nodes[node_id]
        entry = {
            "id": node_id,
            "S": sorted(nm.successors),
            "T_avg": {agent.value: nm.mean_dwell[agent]
                      for agent in sorted(nm.mean_dwell, key=lambda a: a.value)},
            "T_all": nm.mean_dwell_all,
            "A": sorted(agent.value for agent in nm.allowed),
            "weights": {str(v): nm.weights[v] for v in sorted(nm.weights)},
            "dwell_counts": {agent.value: nm.dwell_counts[agent]
                             for agent in sorted(nm.dwell_counts,
                                                 key=lambda a: a.value)},
        }
        nodes.append(entry)
    return {
        "version": MODEL_VERSION,
        "map_checksum": model.map_checksum,
        "fps": model.fps,
        "nodes": nodes,
        "meta": dict(model.meta),
    }


def model_from_dict(data: dict) -> BehaviorModel:
    if not isinstance(data, dict):
        raise ParseError("model file must hold a JSON object")
    if data.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model version {data.get('version')!r}")
    try:
        nodes = {}
        for entry in data["nodes"]:
            node_id = int(entry["id"])
            mean_dwell = {AgentClass(k): float(v)
                          for k, v in entry["T_avg"].items()}
            t_all = entry.get("T_all")
            nodes[node_id] = NodeModel(
                node=node_id,
                successors=frozenset(int(s) for s in entry["S"]),
                mean_dwell=types.MappingProxyType(mean_dwell),
                mean_dwell_all=None if t_all is None else float(t_all),
                allowed=frozenset(AgentClass(a) for a in entry["A"]),
                weights=types.MappingProxyType(
                    {int(k): int(v) for k, v in entry["weights"].items()}),
                dwell_counts=types.MappingProxyType(
                    {AgentClass(k): int(v)
                     for k, v in entry["dwell_counts"].items()}),
            )
        return BehaviorModel(nodes=types.MappingProxyType(nodes),
                             fps=float(data["fps"]),
                             map_checksum=str(data["map_checksum"]),
                             meta=types.MappingProxyType(dict(data["meta"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from None


def save_model(model: BehaviorModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path, imap: IntersectionMap | None = None) -> BehaviorModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in model file: {exc}") from None
    model = model_from_dict(data)
    if imap is not None and model.map_checksum != imap.checksum:
        raise ChecksumMismatch(
            f"model trained on map {model.map_checksum[:12]}..., "
            f"supplied map is {imap.checksum[:12]}...")
    return model
