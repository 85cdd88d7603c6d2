"""Evaluation: greedy event-to-truth matching, precision/recall/F1 reports,
and SVG scene rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from .errors import ParseError
from .geometry import project_point
from .ingest import AgentClass, Track
from .rules import AnomalyEvent, AnomalyKind, RULE_ID
from .sim import TruthRecord
from .topology import IntersectionMap, PatchClass

DEFAULT_FRAME_TOL = 30


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: tuple          # (pred_index, truth_index) detection-level matches
    fp_pred: tuple        # indices of unmatched predictions
    fn_truth: tuple       # indices of unmatched truth items
    frame_tol: int
    predicted: tuple
    truth: tuple


def _greedy_match(predicted, truth, frame_tol, same_kind):
    order = sorted(range(len(predicted)),
                   key=lambda i: (predicted[i].global_id,
                                  predicted[i].start_frame,
                                  predicted[i].kind.value))
    taken = [False] * len(truth)
    pairs = []
    for pi in order:
        p = predicted[pi]
        best = None
        for ti, t in enumerate(truth):
            if taken[ti] or t.track != p.global_id:
                continue
            if same_kind and t.kind != p.kind:
                continue
            ds = abs(p.start_frame - t.start)
            de = abs(p.end_frame - t.end)
            if ds > frame_tol or de > frame_tol:
                continue
            key = (ds + de, ti)
            if best is None or key < best[0]:
                best = (key, ti)
        if best is not None:
            taken[best[1]] = True
            pairs.append((pi, best[1]))
    return pairs


def match_events(predicted: list[AnomalyEvent], truth: list[TruthRecord],
                 frame_tol: int = DEFAULT_FRAME_TOL) -> MatchResult:
    """Greedy one-to-one matching on (track, frame span); kind-agnostic.

    Sorting the predictions first makes the outcome independent of input
    order.  A span matches when both |start delta| and |end delta| are
    within ``frame_tol``.
    """
    if frame_tol < 0:
        raise ValueError("frame_tol must be >= 0")
    pairs = _greedy_match(predicted, truth, frame_tol, same_kind=False)
    matched_p = {pi for pi, _ in pairs}
    matched_t = {ti for _, ti in pairs}
    fp_pred = tuple(i for i in range(len(predicted)) if i not in matched_p)
    fn_truth = tuple(i for i in range(len(truth)) if i not in matched_t)
    return MatchResult(tp=len(pairs), fp=len(fp_pred), fn=len(fn_truth),
                       pairs=tuple(pairs), fp_pred=fp_pred,
                       fn_truth=fn_truth, frame_tol=frame_tol,
                       predicted=tuple(predicted), truth=tuple(truth))


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_kind: dict
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_kind": self.per_kind,
            "parameters": self.parameters,
        }


def compute_report(match: MatchResult, parameters: dict | None = None
                   ) -> EvalReport:
    """Precision/recall/F1 plus per-kind classification accuracy.

    Per-kind accuracy comes in two denominators because the reference
    protocol leaves it ambiguous: ``accuracy`` divides by all truth items
    of the kind, ``accuracy_detected`` only by the detected ones.
    """
    tp, fp, fn = match.tp, match.fp, match.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    total_truth = len(match.truth)
    per_kind = {}
    for kind in AnomalyKind:
        truths = [i for i, t in enumerate(match.truth) if t.kind == kind]
        detected = [ti for _, ti in match.pairs
                    if match.truth[ti].kind == kind]
        correct = [ti for pi, ti in match.pairs
                   if match.truth[ti].kind == kind
                   and match.predicted[pi].kind == kind]
        fp_kind = sum(1 for i in match.fp_pred
                      if match.predicted[i].kind == kind)
        per_kind[kind.value] = {
            "truths": len(truths),
            "detected": len(detected),
            "correct": len(correct),
            "accuracy": len(correct) / len(truths) if truths else None,
            "accuracy_detected": (len(correct) / len(detected)
                                  if detected else None),
            "fp": fp_kind,
            "fp_per_truth": fp_kind / total_truth if total_truth else None,
        }
    return EvalReport(tp=tp, fp=fp, fn=fn, precision=precision,
                      recall=recall, f1=f1, per_kind=per_kind,
                      parameters=dict(parameters or {}))


def save_report(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON in report: {exc}") from None


# ---------------------------------------------------------------------------
# SVG rendering

_PATCH_FILL = {
    PatchClass.ROAD: "#b9bec6",
    PatchClass.BICYCLE_LANE: "#d79b8a",
    PatchClass.CURB: "#c9d4bb",
    PatchClass.CROSSWALK: "#e8e2cf",
}
_TRACK_STROKE = {
    AgentClass.VEHICLE: "#2b6cb0",
    AgentClass.PEDESTRIAN: "#2f855a",
    AgentClass.BICYCLIST: "#b7791f",
}
_EVENT_STROKE = "#e53e3e"


def _annotation(event: AnomalyEvent) -> str:
    rule = event.detail.get("rule", RULE_ID[event.kind])
    ops = event.detail.get("operands", {})
    if event.kind is AnomalyKind.IMPROPER_TURN:
        return f"{rule} {ops.get('from')}->{ops.get('to')}"
    if event.kind is AnomalyKind.IMPROPER_ZONE:
        return f"{rule} {ops.get('agent')}@{ops.get('node')}"
    mean = ops.get("mean_dwell")
    mean_txt = f"{mean:.1f}" if isinstance(mean, (int, float)) else "?"
    return (f"{rule} dwell {ops.get('dwell')}f > "
            f"{ops.get('margin')}x{mean_txt}@{ops.get('node')}")


def render_svg(imap: IntersectionMap, tracks: list[Track],
               events: list[AnomalyEvent], path) -> None:
    """Deterministic SVG: class-coloured patches, track polylines, and
    highlighted, annotated anomaly segments."""
    size = 900.0
    pad = 20.0
    if imap.bev_homography is not None:
        def world(p):
            return project_point(imap.bev_homography, p)
        pts = [world((x, y)) for patch in imap.patches
               for x, y in patch.shape.vertices]
    else:
        def world(p):
            return (float(p[0]), float(p[1]))
        pts = [(float(x), float(y)) for patch in imap.patches
               for x, y in patch.shape.vertices]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0) or 1.0
    scale = (size - 2 * pad) / span

    def to_px(p):
        wx, wy = world(p)
        return ((wx - x0) * scale + pad, (y1 - wy) * scale + pad)

    def fmt(p):
        return f"{p[0]:.2f},{p[1]:.2f}"

    width = (x1 - x0) * scale + 2 * pad
    height = (y1 - y0) * scale + 2 * pad
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.2f} {height:.2f}">',
        "<title>intersection scene</title>",
        f'<rect width="{width:.2f}" height="{height:.2f}" fill="#f7f7f4"/>',
    ]
    for patch in imap.patches:
        pts_txt = " ".join(fmt(to_px(v)) for v in patch.shape.vertices)
        fill = _PATCH_FILL[patch.cls]
        out.append(f'<polygon points="{pts_txt}" fill="{fill}" '
                   'stroke="#ffffff" stroke-width="1"/>')
        cx, cy = to_px(patch.shape.centroid)
        out.append(f'<text x="{cx:.2f}" y="{cy:.2f}" font-size="8" '
                   'fill="#555555" text-anchor="middle">'
                   f"{patch.id}</text>")
    by_id = {}
    for track in tracks:
        by_id[track.global_id] = track
        pts_txt = " ".join(
            fmt(to_px(s.box.center)) for s in track.samples)
        stroke = _TRACK_STROKE[track.agent]
        out.append(f'<polyline points="{pts_txt}" fill="none" '
                   f'stroke="{stroke}" stroke-width="1.5" opacity="0.75"/>')
    for event in events:
        track = by_id.get(event.global_id)
        if track is None:
            continue
        seg = [s for s in track.samples
               if event.start_frame <= s.frame <= event.end_frame]
        if not seg:
            continue
        if len(seg) == 1:
            cx, cy = to_px(seg[0].box.center)
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" '
                       f'fill="none" stroke="{_EVENT_STROKE}" '
                       'stroke-width="2.5"/>')
        else:
            pts_txt = " ".join(fmt(to_px(s.box.center)) for s in seg)
            out.append(f'<polyline points="{pts_txt}" fill="none" '
                       f'stroke="{_EVENT_STROKE}" stroke-width="3"/>')
        mid = seg[len(seg) // 2]
        mx, my = to_px(mid.box.center)
        label = escape(_annotation(event))
        out.append(f'<text x="{mx + 6:.2f}" y="{my - 6:.2f}" font-size="10" '
                   f'fill="{_EVENT_STROKE}">{label}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out))
        fh.write("\n")
