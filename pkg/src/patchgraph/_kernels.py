"""Numeric kernels for the hot paths: convex clipping, IoU and patch
association over whole tracks, and circular-median yaw smoothing.

Everything here operates on plain float64/int64 ndarrays so the same source
compiles under numba (default) and runs as-is on the numpy fallback path
(PATCHGRAPH_NUMBA=0).  Polygons are counter-clockwise; padded vertex tables
carry an explicit vertex count per row.
"""

import math

import numpy as np

from ._accel import njit

# Work buffers: clipping a convex n-gon by a convex m-gon yields <= n+m
# vertices; 64 leaves headroom for any realistic patch.
_BUF = 64

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def poly_area(verts, n):
    """Signed shoelace area of the first ``n`` vertices (positive if ccw)."""
    acc = 0.0
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        acc += verts[i, 0] * verts[j, 1] - verts[j, 0] * verts[i, 1]
    return 0.5 * acc


@njit(cache=True)
def clip_intersection_area(subj, ns, clip, nc):
    """Area of subject ∩ clip via Sutherland-Hodgman half-plane clipping.

    Both polygons must be convex and counter-clockwise.  Returns 0.0 for
    disjoint inputs; slivers below 1e-12 are clamped to 0.
    """
    cur = np.empty((_BUF, 2))
    nxt = np.empty((_BUF, 2))
    n_cur = ns
    for i in range(ns):
        cur[i, 0] = subj[i, 0]
        cur[i, 1] = subj[i, 1]

    for e in range(nc):
        if n_cur == 0:
            return 0.0
        ax = clip[e, 0]
        ay = clip[e, 1]
        f = e + 1
        if f == nc:
            f = 0
        ex = clip[f, 0] - ax
        ey = clip[f, 1] - ay

        n_nxt = 0
        px = cur[n_cur - 1, 0]
        py = cur[n_cur - 1, 1]
        dp = ex * (py - ay) - ey * (px - ax)
        for j in range(n_cur):
            qx = cur[j, 0]
            qy = cur[j, 1]
            dq = ex * (qy - ay) - ey * (qx - ax)
            if dq >= 0.0:
                if dp < 0.0:
                    t = dp / (dp - dq)
                    nxt[n_nxt, 0] = px + t * (qx - px)
                    nxt[n_nxt, 1] = py + t * (qy - py)
                    n_nxt += 1
                nxt[n_nxt, 0] = qx
                nxt[n_nxt, 1] = qy
                n_nxt += 1
            elif dp >= 0.0:
                t = dp / (dp - dq)
                nxt[n_nxt, 0] = px + t * (qx - px)
                nxt[n_nxt, 1] = py + t * (qy - py)
                n_nxt += 1
            px = qx
            py = qy
            dp = dq
        tmp = cur
        cur = nxt
        nxt = tmp
        n_cur = n_nxt

    area = poly_area(cur, n_cur)
    if area < 0.0:
        area = -area
    if area <= 1e-12:
        return 0.0
    return area


@njit(cache=True)
def box_corners(cx, cy, length, width, yaw, out):
    """Write the 4 ccw corners of an oriented box into ``out`` (4x2)."""
    hl = 0.5 * length
    hw = 0.5 * width
    c = math.cos(yaw)
    s = math.sin(yaw)
    out[0, 0] = cx + c * hl - s * hw
    out[0, 1] = cy + s * hl + c * hw
    out[1, 0] = cx - c * hl - s * hw
    out[1, 1] = cy - s * hl + c * hw
    out[2, 0] = cx - c * hl + s * hw
    out[2, 1] = cy - s * hl - c * hw
    out[3, 0] = cx + c * hl + s * hw
    out[3, 1] = cy + s * hl - c * hw


@njit(cache=True)
def track_corners(cx, cy, length, width, yaw):
    """Corners and enclosing radii for a whole track of boxes."""
    n = cx.shape[0]
    corners = np.empty((n, 4, 2))
    radii = np.empty(n)
    for i in range(n):
        box_corners(cx[i], cy[i], length[i], width[i], yaw[i], corners[i])
        radii[i] = 0.5 * math.hypot(length[i], width[i])
    return corners, radii


@njit(cache=True)
def associate_track(corners, box_areas, radii, patch_verts, patch_nvert,
                    patch_areas, patch_cent, patch_rad, min_iou):
    """Argmax-IoU patch index per box, -1 when the best IoU < min_iou.

    Patches must be sorted by ascending id so that exact IoU ties resolve
    to the lowest id (strict ``>`` keeps the earlier candidate).
    """
    n = corners.shape[0]
    n_patches = patch_nvert.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        cx = 0.25 * (corners[i, 0, 0] + corners[i, 1, 0]
                     + corners[i, 2, 0] + corners[i, 3, 0])
        cy = 0.25 * (corners[i, 0, 1] + corners[i, 1, 1]
                     + corners[i, 2, 1] + corners[i, 3, 1])
        best = -1
        best_iou = 0.0
        for p in range(n_patches):
            dx = patch_cent[p, 0] - cx
            dy = patch_cent[p, 1] - cy
            reach = patch_rad[p] + radii[i]
            if dx * dx + dy * dy > reach * reach:
                continue
            inter = clip_intersection_area(corners[i], 4,
                                           patch_verts[p], patch_nvert[p])
            if inter <= 0.0:
                continue
            iou_val = inter / (box_areas[i] + patch_areas[p] - inter)
            if iou_val > best_iou:
                best_iou = iou_val
                best = p
        if best_iou >= min_iou:
            out[i] = best
    return out


@njit(cache=True)
def circular_diff(a, b):
    """Signed circular difference a-b wrapped to [-pi, pi)."""
    return (a - b + math.pi) % TWO_PI - math.pi


@njit(cache=True)
def smooth_yaws(yaws, window):
    """Circular-median smoothing over a centered window, truncated at ends.

    The median is the window sample minimizing the summed circular distance
    to the other samples; ties go to the candidate closest to the original
    sample, then to the earliest window position.
    """
    n = yaws.shape[0]
    out = np.empty(n)
    half = window // 2
    for i in range(n):
        lo = i - half
        if lo < 0:
            lo = 0
        hi = i + half + 1
        if hi > n:
            hi = n
        best = yaws[i]
        best_score = 1e300
        best_tie = 1e300
        for j in range(lo, hi):
            cand = yaws[j]
            score = 0.0
            for k in range(lo, hi):
                d = circular_diff(yaws[k], cand)
                if d < 0.0:
                    d = -d
                score += d
            tie = circular_diff(yaws[i], cand)
            if tie < 0.0:
                tie = -tie
            if score < best_score - 1e-12 or (
                    score < best_score + 1e-12 and tie < best_tie - 1e-12):
                best_score = score
                best_tie = tie
                best = cand
        out[i] = best
    return out


def warmup():
    """Trigger JIT compilation of all kernels on tiny inputs."""
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    clip_intersection_area(sq, 4, sq + 0.5, 4)
    corners, radii = track_corners(
        np.zeros(1), np.zeros(1), np.ones(1), np.ones(1), np.zeros(1))
    associate_track(corners, np.ones(1), radii, sq.reshape(1, 4, 2),
                    np.array([4], dtype=np.int64), np.ones(1),
                    np.array([[0.5, 0.5]]), np.ones(1), 0.05)
    smooth_yaws(np.zeros(3), 3)
