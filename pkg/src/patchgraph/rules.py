"""Streaming anomaly detection: the three classification rules over node
visits, emitting explainable events."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .behavior import BehaviorModel
from .errors import ParseError, UnknownNode, ValidationError
from .ingest import AgentClass, NodeVisit

DEFAULT_MARGIN = 3.0
DEFAULT_TURN_GAP = 30


class AnomalyKind(str, Enum):
    IMPROPER_TURN = "improper_turn"
    IMPROPER_ZONE = "improper_zone"
    UNLAWFUL_STOP = "unlawful_stop"


# Wire-format rule ids used in event output and renderings.
RULE_ID = {
    AnomalyKind.IMPROPER_TURN: "eq1",
    AnomalyKind.IMPROPER_ZONE: "eq2",
    AnomalyKind.UNLAWFUL_STOP: "eq3",
}
KIND_BY_RULE = {v: k for k, v in RULE_ID.items()}


@dataclass(frozen=True)
class AnomalyEvent:
    global_id: int
    agent: AgentClass
    kind: AnomalyKind
    nodes: tuple[int, ...]
    start_frame: int
    end_frame: int
    detail: dict

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValidationError("event start_frame must be <= end_frame")


def check_turn(model: BehaviorModel, from_node: int, to_node: int
               ) -> AnomalyKind | None:
    """Transition from_node -> to_node against the learned successor set."""
    if from_node == to_node:
        raise ValidationError("check_turn requires two distinct nodes")
    nm = model.node(from_node)
    if to_node not in model:
        raise UnknownNode(f"node {to_node} not in model")
    if to_node not in nm.successors:
        return AnomalyKind.IMPROPER_TURN
    return None


def check_zone(model: BehaviorModel, node: int, agent: AgentClass
               ) -> AnomalyKind | None:
    """Agent class against the node's allowed-class set."""
    nm = model.node(node)
    if agent not in nm.allowed:
        return AnomalyKind.IMPROPER_ZONE
    return None


def stop_threshold(model: BehaviorModel, node: int, agent: AgentClass,
                   margin: float) -> float | None:
    """Dwell-frame threshold for the stop rule, or None when the node has
    no usable dwell statistic for this agent (rule cannot fire)."""
    nm = model.node(node)
    mean = nm.mean_dwell.get(agent)
    if mean is None:
        mean = nm.mean_dwell_all
    if mean is None:
        return None
    return margin * mean


def check_stop(model: BehaviorModel, node: int, agent: AgentClass,
               enter_frame: int, current_frame: int,
               margin: float = DEFAULT_MARGIN) -> AnomalyKind | None:
    """Open-visit dwell against margin x mean dwell.

    Falls back to the class-collapsed node mean when the class has no
    entry; stays silent when neither exists.
    """
    if margin < 1.0:
        raise ValidationError("margin must be >= 1.0")
    if current_frame < enter_frame:
        raise ValidationError("current_frame must be >= enter_frame")
    threshold = stop_threshold(model, node, agent, margin)
    if threshold is None:
        return None
    if (current_frame - enter_frame + 1) > threshold:
        return AnomalyKind.UNLAWFUL_STOP
    return None


def detect_stream(model: BehaviorModel, visits: list[NodeVisit],
                  margin: float = DEFAULT_MARGIN,
                  turn_gap: int = DEFAULT_TURN_GAP) -> list[AnomalyEvent]:
    """Run all three rules over one track's ordered visit stream.

    Per-frame rule order is zone, then turn, then stop.  Each visit yields
    at most one zone and one stop event; each transition at most one turn
    event.  A coverage gap longer than ``turn_gap`` frames suppresses the
    transition check across it.  The stop event ends at the first frame
    its threshold is exceeded, so no lookahead is required.
    """
    if margin < 1.0:
        raise ValidationError("margin must be >= 1.0")
    events: list[AnomalyEvent] = []
    prev: NodeVisit | None = None
    for visit in visits:
        nm = model.node(visit.node)
        if visit.agent not in nm.allowed:
            events.append(AnomalyEvent(
                global_id=visit.global_id, agent=visit.agent,
                kind=AnomalyKind.IMPROPER_ZONE, nodes=(visit.node,),
                start_frame=visit.enter_frame, end_frame=visit.exit_frame,
                detail={
                    "rule": RULE_ID[AnomalyKind.IMPROPER_ZONE],
                    "operands": {
                        "node": visit.node,
                        "agent": visit.agent.value,
                        "allowed": sorted(a.value for a in nm.allowed),
                    },
                }))
        if prev is not None and visit.node != prev.node:
            gap = visit.enter_frame - prev.exit_frame - 1
            if gap <= turn_gap:
                prev_nm = model.node(prev.node)
                if visit.node not in prev_nm.successors:
                    events.append(AnomalyEvent(
                        global_id=visit.global_id, agent=visit.agent,
                        kind=AnomalyKind.IMPROPER_TURN,
                        nodes=(prev.node, visit.node),
                        start_frame=prev.exit_frame,
                        end_frame=visit.enter_frame,
                        detail={
                            "rule": RULE_ID[AnomalyKind.IMPROPER_TURN],
                            "operands": {
                                "from": prev.node,
                                "to": visit.node,
                                "successors": sorted(prev_nm.successors),
                            },
                        }))
        threshold = stop_threshold(model, visit.node, visit.agent, margin)
        if threshold is not None and visit.dwell > threshold:
            # First frame at which dwell strictly exceeds the threshold.
            fire = visit.enter_frame + int(math.floor(threshold))
            mean = nm.mean_dwell.get(visit.agent, nm.mean_dwell_all)
            events.append(AnomalyEvent(
                global_id=visit.global_id, agent=visit.agent,
                kind=AnomalyKind.UNLAWFUL_STOP, nodes=(visit.node,),
                start_frame=visit.enter_frame, end_frame=fire,
                detail={
                    "rule": RULE_ID[AnomalyKind.UNLAWFUL_STOP],
                    "operands": {
                        "node": visit.node,
                        "agent": visit.agent.value,
                        "dwell": visit.dwell,
                        "mean_dwell": mean,
                        "margin": margin,
                    },
                }))
        prev = visit
    return events


def event_to_dict(event: AnomalyEvent) -> dict:
    return {
        "id": event.global_id,
        "class": event.agent.value,
        "kind": event.kind.value,
        "nodes": list(event.nodes),
        "start": event.start_frame,
        "end": event.end_frame,
        "detail": event.detail,
    }


def event_from_dict(record: dict) -> AnomalyEvent:
    try:
        return AnomalyEvent(
            global_id=int(record["id"]),
            agent=AgentClass(record["class"]),
            kind=AnomalyKind(record["kind"]),
            nodes=tuple(int(n) for n in record["nodes"]),
            start_frame=int(record["start"]),
            end_frame=int(record["end"]),
            detail=dict(record["detail"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed event record: {exc}") from None


def write_events(path, events: Iterable[AnomalyEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event_to_dict(event), separators=(",", ":")))
            fh.write("\n")


def read_events(path) -> list[AnomalyEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}",
                                 line=line_no) from None
            events.append(event_from_dict(record))
    return events
