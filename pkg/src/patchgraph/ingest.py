"""Tracked-detection ingestion: JSONL parsing, per-camera track grouping,
orientation smoothing, cross-camera stitching, and patch-visit extraction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from . import _kernels
from .errors import OutOfOrderFrame, ParseError, ValidationError
from .geometry import OrientedBox, Point2, iou
from .topology import DEFAULT_MIN_IOU, IntersectionMap, associate_many

DEFAULT_SMOOTH_WINDOW = 5
DEFAULT_STITCH_GAP = 15
DEFAULT_STITCH_IOU = 0.3
DEFAULT_FPS = 10.0


class AgentClass(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    BICYCLIST = "bicyclist"


@dataclass(frozen=True)
class Detection:
    camera: int
    frame: int
    track: int
    agent: AgentClass
    box: OrientedBox
    conf: float


class TrackSample(NamedTuple):
    frame: int
    box: OrientedBox
    camera: int
    conf: float


@dataclass(frozen=True)
class Track:
    global_id: int
    agent: AgentClass
    samples: tuple[TrackSample, ...]

    def __post_init__(self):
        if not self.samples:
            raise ValidationError("track needs at least one sample")
        frames = [s.frame for s in self.samples]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValidationError("track frames must be strictly increasing")

    @property
    def first_frame(self) -> int:
        return self.samples[0].frame

    @property
    def last_frame(self) -> int:
        return self.samples[-1].frame


@dataclass(frozen=True)
class NodeVisit:
    global_id: int
    agent: AgentClass
    node: int
    enter_frame: int
    exit_frame: int

    def __post_init__(self):
        if self.enter_frame > self.exit_frame:
            raise ValidationError("visit enter_frame must be <= exit_frame")

    @property
    def dwell(self) -> int:
        return self.exit_frame - self.enter_frame + 1


_DET_KEYS = {"camera", "frame", "track", "class", "cx", "cy", "len", "wid",
             "yaw", "conf"}


def _parse_detection(record: dict, line_no: int) -> Detection:
    unknown = set(record) - _DET_KEYS
    if unknown:
        raise ParseError(f"unknown detection fields: {sorted(unknown)}",
                         line=line_no)
    missing = _DET_KEYS - set(record)
    if missing:
        raise ParseError(f"missing detection fields: {sorted(missing)}",
                         line=line_no)
    camera = record["camera"]
    frame = record["frame"]
    track = record["track"]
    if not isinstance(camera, int) or camera < 0:
        raise ParseError("camera must be a non-negative integer",
                         line=line_no, field="camera")
    if not isinstance(frame, int) or frame < 0:
        raise ParseError("frame must be a non-negative integer",
                         line=line_no, field="frame")
    if not isinstance(track, int):
        raise ParseError("track must be an integer", line=line_no,
                         field="track")
    try:
        agent = AgentClass(record["class"])
    except ValueError:
        raise ParseError(f"unknown agent class {record['class']!r}",
                         line=line_no, field="class") from None
    for key in ("cx", "cy", "len", "wid", "yaw", "conf"):
        value = record[key]
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParseError(f"{key} must be a finite number", line=line_no,
                             field=key)
    if record["len"] <= 0 or record["wid"] <= 0:
        raise ParseError("box extents must be positive", line=line_no,
                         field="len")
    yaw = float(record["yaw"])
    if not (-math.pi <= yaw < math.pi):
        raise ParseError(f"yaw {yaw} outside [-pi, pi)", line=line_no,
                         field="yaw")
    conf = float(record["conf"])
    if not (0.0 <= conf <= 1.0):
        raise ParseError(f"conf {conf} outside [0, 1]", line=line_no,
                         field="conf")
    box = OrientedBox(center=Point2(float(record["cx"]), float(record["cy"])),
                      length=float(record["len"]), width=float(record["wid"]),
                      yaw=yaw)
    return Detection(camera=camera, frame=frame, track=track, agent=agent,
                     box=box, conf=conf)


def read_detections(lines: Iterable[str]) -> Iterator[Detection]:
    """Parse a detection JSONL stream, enforcing per-camera frame order."""
    last_frame: dict[int, int] = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
        det = _parse_detection(record, line_no)
        prev = last_frame.get(det.camera)
        if prev is not None and det.frame < prev:
            raise OutOfOrderFrame(
                f"line {line_no}: camera {det.camera} frame {det.frame} "
                f"after frame {prev}")
        last_frame[det.camera] = det.frame
        yield det


def detection_to_dict(det: Detection) -> dict:
    return {
        "camera": det.camera,
        "frame": det.frame,
        "track": det.track,
        "class": det.agent.value,
        "cx": det.box.center.x,
        "cy": det.box.center.y,
        "len": det.box.length,
        "wid": det.box.width,
        "yaw": det.box.yaw,
        "conf": det.conf,
    }


def write_detections(path, detections: Iterable[Detection]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for det in detections:
            fh.write(json.dumps(detection_to_dict(det),
                                separators=(",", ":")))
            fh.write("\n")


def read_detections_file(path) -> list[Detection]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(read_detections(fh))


def group_tracks(detections: Iterable[Detection]) -> dict[int, list[Track]]:
    """Group a detection stream into per-camera tracks keyed by camera id."""
    grouped: dict[tuple[int, int], list[Detection]] = {}
    for det in detections:
        grouped.setdefault((det.camera, det.track), []).append(det)
    per_camera: dict[int, list[Track]] = {}
    for (camera, track_id), dets in grouped.items():
        agent = dets[0].agent
        if any(d.agent != agent for d in dets):
            raise ValidationError(
                f"camera {camera} track {track_id} changes agent class")
        frames = [d.frame for d in dets]
        if len(set(frames)) != len(frames):
            raise ValidationError(
                f"camera {camera} track {track_id} repeats a frame")
        samples = tuple(TrackSample(d.frame, d.box, d.camera, d.conf)
                        for d in sorted(dets, key=lambda d: d.frame))
        per_camera.setdefault(camera, []).append(
            Track(global_id=track_id, agent=agent, samples=samples))
    for tracks in per_camera.values():
        tracks.sort(key=lambda t: (t.first_frame, t.global_id))
    return per_camera


def smooth_orientation(track: Track,
                       window: int = DEFAULT_SMOOTH_WINDOW) -> Track:
    """Replace each yaw with the circular median over a centered window.

    Positions are untouched; window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ValidationError("smoothing window must be a positive odd int")
    if window == 1 or len(track.samples) == 1:
        return track
    yaws = np.array([s.box.yaw for s in track.samples])
    smoothed = _kernels.smooth_yaws(yaws, window)
    samples = []
    for s, yaw in zip(track.samples, smoothed):
        if yaw == s.box.yaw:
            samples.append(s)
        else:
            box = OrientedBox(center=s.box.center, length=s.box.length,
                              width=s.box.width, yaw=float(yaw))
            samples.append(TrackSample(s.frame, box, s.camera, s.conf))
    return Track(global_id=track.global_id, agent=track.agent,
                 samples=tuple(samples))


def stitch_tracks(per_camera: dict[int, list[Track]] | list[list[Track]],
                  max_gap: int = DEFAULT_STITCH_GAP,
                  min_iou: float = DEFAULT_STITCH_IOU) -> list[Track]:
    """Greedy chronological cross-camera merging.

    A chain ending at frame f absorbs the earliest-starting track from a
    different camera that starts in (f - max_gap, f + max_gap], has the
    same agent class, and whose first box overlaps the chain's last box
    with IoU >= min_iou.  Where a merge overlaps in time, the higher
    confidence sample wins each frame.  Every output track gets a fresh
    sequential global id.
    """
    if max_gap < 0:
        raise ValidationError("max_gap must be >= 0")
    if isinstance(per_camera, dict):
        camera_lists = [per_camera[k] for k in sorted(per_camera)]
    else:
        camera_lists = list(per_camera)
    pool = []
    for tracks in camera_lists:
        for t in tracks:
            pool.append(t)
    pool.sort(key=lambda t: (t.first_frame, t.samples[0].camera, t.global_id))
    consumed = [False] * len(pool)
    order = {id(t): i for i, t in enumerate(pool)}
    chains: list[list[Track]] = []
    for i, head in enumerate(pool):
        if consumed[i]:
            continue
        consumed[i] = True
        chain = [head]
        while True:
            tail = chain[-1]
            tail_cam = tail.samples[-1].camera
            tail_end = tail.last_frame
            tail_poly = tail.samples[-1].box.polygon()
            candidate = None
            for j, other in enumerate(pool):
                if consumed[j] or other.agent != tail.agent:
                    continue
                if other.samples[0].camera == tail_cam:
                    continue
                start = other.first_frame
                if not (tail_end - max_gap < start <= tail_end + max_gap):
                    continue
                if iou(tail_poly, other.samples[0].box.polygon()) < min_iou:
                    continue
                candidate = j
                break  # pool is sorted: first hit is the earliest start
            if candidate is None:
                break
            consumed[candidate] = True
            chain.append(pool[candidate])
        chains.append(chain)
    chains.sort(key=lambda ch: (ch[0].first_frame,
                                ch[0].samples[0].camera,
                                order[id(ch[0])]))
    merged = []
    for gid, chain in enumerate(chains):
        by_frame: dict[int, TrackSample] = {}
        for t in chain:
            for s in t.samples:
                held = by_frame.get(s.frame)
                if held is None or s.conf > held.conf or (
                        s.conf == held.conf and s.camera < held.camera):
                    by_frame[s.frame] = s
        samples = tuple(by_frame[f] for f in sorted(by_frame))
        merged.append(Track(global_id=gid, agent=chain[0].agent,
                            samples=samples))
    return merged


def to_visits(track: Track, imap: IntersectionMap,
              min_iou: float = DEFAULT_MIN_IOU) -> list[NodeVisit]:
    """Run-length-compress per-frame patch association into visits.

    Frames with no association close the current run and produce nothing.
    """
    n = len(track.samples)
    cx = np.empty(n)
    cy = np.empty(n)
    ln = np.empty(n)
    wd = np.empty(n)
    yw = np.empty(n)
    for i, s in enumerate(track.samples):
        cx[i] = s.box.center.x
        cy[i] = s.box.center.y
        ln[i] = s.box.length
        wd[i] = s.box.width
        yw[i] = s.box.yaw
    corners, radii = _kernels.track_corners(cx, cy, ln, wd, yw)
    nodes = associate_many(corners, ln * wd, radii, imap, min_iou)

    visits: list[NodeVisit] = []
    run_node = -1
    run_start = 0
    run_end = 0
    for i in range(n):
        node = int(nodes[i])
        frame = track.samples[i].frame
        if node == run_node and node != -1:
            run_end = frame
            continue
        if run_node != -1:
            visits.append(NodeVisit(track.global_id, track.agent, run_node,
                                    run_start, run_end))
        run_node = node
        run_start = frame
        run_end = frame
    if run_node != -1:
        visits.append(NodeVisit(track.global_id, track.agent, run_node,
                                run_start, run_end))
    return visits


def pipeline_visits(detections: Iterable[Detection], imap: IntersectionMap,
                    window: int = DEFAULT_SMOOTH_WINDOW,
                    max_gap: int = DEFAULT_STITCH_GAP,
                    stitch_iou: float = DEFAULT_STITCH_IOU,
                    min_iou: float = DEFAULT_MIN_IOU
                    ) -> list[tuple[Track, list[NodeVisit]]]:
    """Full ingestion pipeline: group, stitch, smooth, extract visits."""
    per_camera = group_tracks(detections)
    stitched = stitch_tracks(per_camera, max_gap=max_gap, min_iou=stitch_iou)
    out = []
    for track in stitched:
        smoothed = smooth_orientation(track, window)
        out.append((smoothed, to_visits(smoothed, imap, min_iou)))
    return out
