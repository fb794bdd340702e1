"""Outline matching: normalization, cyclic DTW, projection, clustering.

Outlines are resampled to a fixed number of arc-length-uniform points and
standardized for position and size, so geometric distance between
corresponding points compares characters across the page. DTW supplies the
correspondence, letting one traversal wait while the other catches up;
the projection score handles outlines whose cycle structure differs
(broken versus whole characters). Rotation invariance is deliberately not
provided.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .outlines import OutlineCycle


@dataclass(frozen=True)
class NormalizedCycle:
    """Arc-length-uniform resampling, centroid at origin, RMS radius 1."""

    points: np.ndarray  # (N, 2) float64

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Alignment:
    pairs: tuple[tuple[int, int], ...]  # (index in a, index in rotated b)
    cost: float
    b_offset: int  # rotated b index j refers to original index (j + b_offset) % N


@dataclass(frozen=True)
class Clustering:
    labels: tuple[int, ...]
    threshold: float


def _resample(cycle, n: int) -> np.ndarray:
    verts = np.asarray(cycle.vertices if isinstance(cycle, OutlineCycle) else cycle,
                       dtype=np.float64)
    if len(verts) < 3:
        raise ValueError("cycle needs at least 3 vertices")
    closed = np.vstack([verts, verts[:1]])
    seg = np.diff(closed, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    perimeter = seg_len.sum()
    if perimeter <= 0:
        raise ValueError("degenerate cycle with zero perimeter")
    cum = np.concatenate(([0.0], np.cumsum(seg_len)))
    targets = np.arange(n) * (perimeter / n)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seg_len) - 1)
    frac = (targets - cum[idx]) / np.where(seg_len[idx] > 0, seg_len[idx], 1.0)
    return closed[idx] + seg[idx] * frac[:, None]


def _standardize(blocks: list[np.ndarray]) -> list[np.ndarray]:
    stacked = np.vstack(blocks)
    center = stacked.mean(axis=0)
    rms = np.sqrt(((stacked - center) ** 2).sum(axis=1).mean())
    if rms <= 0:
        raise ValueError("degenerate cycle with zero extent")
    return [(b - center) / rms for b in blocks]


def normalize(cycle, n: int = 64) -> NormalizedCycle:
    """Resample a closed polygon to n arc-length-uniform points and
    standardize: centroid to origin, RMS point radius to 1."""
    if n < 8:
        raise ValueError("n must be >= 8")
    return NormalizedCycle(_standardize([_resample(cycle, n)])[0])


def normalize_group(cycles, n: int = 64) -> list[NormalizedCycle]:
    """Resample several cycles and standardize them with one shared
    transform, preserving their relative position and scale. Use this for
    multi-cycle glyphs (outer plus holes) and for the pieces of a broken
    character; per-cycle normalize() would put every piece at the origin
    at unit size."""
    if n < 8:
        raise ValueError("n must be >= 8")
    cycles = list(cycles)
    if not cycles:
        raise ValueError("no cycles")
    return [NormalizedCycle(b) for b in _standardize([_resample(c, n) for c in cycles])]


# --- DTW ----------------------------------------------------------------------

@njit(cache=True)
def _dtw_cost(c: np.ndarray) -> float:
    n, m = c.shape
    d = np.empty((n, m))
    d[0, 0] = c[0, 0]
    for j in range(1, m):
        d[0, j] = d[0, j - 1] + c[0, j]
    for i in range(1, n):
        d[i, 0] = d[i - 1, 0] + c[i, 0]
        for j in range(1, m):
            best = d[i - 1, j - 1]
            if d[i - 1, j] < best:
                best = d[i - 1, j]
            if d[i, j - 1] < best:
                best = d[i, j - 1]
            d[i, j] = c[i, j] + best
    return d[n - 1, m - 1]


@njit(cache=True)
def _dtw_best_offset(c: np.ndarray, offsets: np.ndarray) -> tuple[float, int]:
    n = c.shape[0]
    best_cost = np.inf
    best_off = 0
    rolled = np.empty_like(c)
    for k in offsets:
        for j in range(n):
            rolled[:, j] = c[:, (j + k) % n]
        cost = _dtw_cost(rolled)
        if cost < best_cost:
            best_cost = cost
            best_off = k
    return best_cost, best_off


def dtw_path(cost: np.ndarray) -> tuple[float, list[tuple[int, int]]]:
    """Plain DTW over an explicit cost matrix, with traceback."""
    n, m = cost.shape
    d = np.full((n + 1, m + 1), np.inf)
    d[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = cost[i - 1, j - 1] + min(d[i - 1, j], d[i, j - 1], d[i - 1, j - 1])
    pairs = []
    i, j = n, m
    while i > 1 or j > 1:
        pairs.append((i - 1, j - 1))
        moves = ((d[i - 1, j - 1], i - 1, j - 1), (d[i - 1, j], i - 1, j),
                 (d[i, j - 1], i, j - 1))
        _, i, j = min(m for m in moves if m[1] >= 1 and m[2] >= 1)
    pairs.append((0, 0))
    pairs.reverse()
    return float(d[n, m]), pairs


def _offsets(n: int, starts: int) -> np.ndarray:
    if starts >= n:
        return np.arange(n, dtype=np.int64)
    return np.unique((np.arange(starts, dtype=np.int64) * n) // starts)


def dtw_align(a: NormalizedCycle, b: NormalizedCycle, starts: int = 16) -> Alignment:
    """Cyclic DTW: try evenly spaced start rotations of b, keep the best.

    starts >= the sample count makes the rotation search exhaustive.
    """
    if a.n != b.n:
        raise ValueError("cycles must be resampled to the same point count")
    c = np.sqrt(((a.points[:, None, :] - b.points[None, :, :]) ** 2).sum(axis=2))
    best_cost, offset = _dtw_best_offset(c, _offsets(a.n, starts))
    rolled = c[:, (np.arange(a.n) + offset) % a.n]
    cost, pairs = dtw_path(rolled)
    return Alignment(tuple(pairs), float(cost), int(offset))


def dtw_distance(a: NormalizedCycle, b: NormalizedCycle, starts: int = 16,
                 symmetric: bool = True) -> float:
    """Rotation-minimized DTW cost divided by the sample count.

    With symmetric=True, start offsets are tried on both inputs so the
    distance is exchange-symmetric; this is the clustering metric.
    """
    c = np.sqrt(((a.points[:, None, :] - b.points[None, :, :]) ** 2).sum(axis=2))
    offs = _offsets(a.n, starts)
    cost, _ = _dtw_best_offset(c, offs)
    if symmetric:
        cost2, _ = _dtw_best_offset(np.ascontiguousarray(c.T), offs)
        cost = min(cost, cost2)
    return cost / a.n


# --- projection metric --------------------------------------------------------

def _segments(targets) -> tuple[np.ndarray, np.ndarray]:
    starts, ends = [], []
    for t in targets:
        pts = t.points
        starts.append(pts)
        ends.append(np.roll(pts, -1, axis=0))
    return np.vstack(starts), np.vstack(ends)


def _points_to_segments(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray) -> float:
    d = seg_b - seg_a                                     # (M, 2)
    len2 = (d ** 2).sum(axis=1)
    len2 = np.where(len2 > 0, len2, 1.0)
    rel = points[:, None, :] - seg_a[None, :, :]          # (N, M, 2)
    t = (rel * d[None, :, :]).sum(axis=2) / len2[None, :]
    t = np.clip(t, 0.0, 1.0)
    proj = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist = np.sqrt(((points[:, None, :] - proj) ** 2).sum(axis=2))
    return float(dist.min(axis=1).mean())


def project_match(a: NormalizedCycle, targets) -> float:
    """Mean distance from a's points to the nearest point on any target
    polyline (targets are closed); asymmetric by design."""
    targets = list(targets)
    if not targets:
        raise ValueError("no target outlines")
    seg_a, seg_b = _segments(targets)
    return _points_to_segments(a.points, seg_a, seg_b)


def match_broken(parts, whole: NormalizedCycle) -> float:
    """Two-way projection score between a multi-cycle outline and a single
    cycle; small when the parts are a broken version of the whole. The
    parts must share one normalization transform (normalize_group)."""
    parts = list(parts)
    if not parts:
        raise ValueError("no part outlines")
    d1 = project_match(whole, parts)
    all_points = np.vstack([p.points for p in parts])
    seg_a, seg_b = _segments([whole])
    d2 = _points_to_segments(all_points, seg_a, seg_b)
    return max(d1, d2)


# --- clustering ---------------------------------------------------------------

def _as_groups(items) -> list[tuple[NormalizedCycle, ...]]:
    groups = []
    for item in items:
        if isinstance(item, NormalizedCycle):
            groups.append((item,))
        else:
            groups.append(tuple(item))
    return groups


def pair_distance(x, y, starts: int = 16) -> float:
    """Glyph-level distance: per-cycle symmetric DTW when the cycle counts
    match, the two-way projection score otherwise."""
    x, y = tuple(x), tuple(y)
    if len(x) == len(y):
        return float(np.mean([dtw_distance(a, b, starts) for a, b in zip(x, y)]))
    xa = np.vstack([c.points for c in x])
    ya = np.vstack([c.points for c in y])
    sxa, sxb = _segments(x)
    sya, syb = _segments(y)
    return max(_points_to_segments(xa, sya, syb), _points_to_segments(ya, sxa, sxb))


def distance_matrix(items, starts: int = 16) -> np.ndarray:
    groups = _as_groups(items)
    n = len(groups)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = pair_distance(groups[i], groups[j], starts)
    return out


def cluster(items, threshold: float, starts: int = 16,
            distances: np.ndarray | None = None) -> Clustering:
    """Single-link clustering cut at ``threshold``: two items share a
    cluster iff a chain of pairwise distances <= threshold connects them."""
    groups = _as_groups(items)
    n = len(groups)
    if distances is None:
        distances = distance_matrix(groups, starts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if distances[i, j] <= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    relabel: dict[int, int] = {}
    labels = []
    for i in range(n):
        r = find(i)
        if r not in relabel:
            relabel[r] = len(relabel)
        labels.append(relabel[r])
    return Clustering(tuple(labels), float(threshold))


def distance_matrix_csv(ids, matrix: np.ndarray) -> str:
    lines = ["id," + ",".join(str(i) for i in ids)]
    for i, row in zip(ids, matrix):
        lines.append(str(i) + "," + ",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def clustering_to_dict(c: Clustering) -> dict:
    return {"threshold": c.threshold, "labels": list(c.labels)}
