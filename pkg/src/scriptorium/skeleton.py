"""Thinning to one-pixel-wide skeletons and skeleton graphs.

Thinning is the classic two-subiteration scheme (north/west then
south/east boundary peeling) with one addition: candidates identified on
the iteration snapshot are deleted sequentially, re-checking that each
pixel is still a simple point, so connected components and holes are
never created or destroyed. A final pass removes pixels of any remaining
fully-set 2x2 block whose deletion keeps local topology, making thinness
strict. Foreground uses 8-connectivity, background 4-connectivity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BinaryImage

# ring positions around a pixel, (dx, dy)
_RING = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))
_ORTHO = {(0, -1), (-1, 0), (1, 0), (0, 1)}


def _build_simple_table() -> np.ndarray:
    """is-simple lookup over the 256 ring configurations: exactly one
    8-component of foreground in the ring and exactly one 4-component of
    background touching an orthogonal neighbor."""
    table = np.zeros(256, dtype=bool)
    for cfg in range(256):
        fg = [_RING[i] for i in range(8) if cfg >> i & 1]
        bg = [_RING[i] for i in range(8) if not cfg >> i & 1]

        def components(cells, adjacent):
            comps = []
            remaining = set(cells)
            while remaining:
                stack = [remaining.pop()]
                comp = set(stack)
                while stack:
                    c = stack.pop()
                    for o in list(remaining):
                        if adjacent(c, o):
                            remaining.discard(o)
                            comp.add(o)
                            stack.append(o)
                comps.append(comp)
            return comps

        adj8 = lambda a, b: max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
        adj4 = lambda a, b: abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
        fg_comps = components(fg, adj8)
        bg_comps = [c for c in components(bg, adj4) if c & _ORTHO]
        table[cfg] = len(fg_comps) == 1 and len(bg_comps) == 1
    return table


_SIMPLE = _build_simple_table()


@dataclass(frozen=True)
class Skeleton:
    mask: BinaryImage


@dataclass(frozen=True)
class SkeletonGraph:
    nodes: tuple[tuple[int, int], ...]        # (x, y), degree != 2 plus cycle anchors
    degrees: tuple[int, ...]
    edges: tuple[tuple[int, int, tuple[tuple[int, int], ...]], ...]  # (a, b, pixel path)


def _ring_config(p: np.ndarray, y: int, x: int) -> int:
    cfg = 0
    for i, (dx, dy) in enumerate(_RING):
        if p[y + dy, x + dx]:
            cfg |= 1 << i
    return cfg


def _neighbor_count(mask: np.ndarray) -> np.ndarray:
    p = np.pad(mask, 1).astype(np.uint8)
    return (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    )


def skeletonize(img: BinaryImage) -> Skeleton:
    """Thin to a one-pixel-wide skeleton, preserving components and holes."""
    mask = np.array(img.foreground, dtype=bool)
    if not mask.any():
        return Skeleton(BinaryImage(mask))

    while True:
        changed = False
        for phase in (0, 1):
            p = np.pad(mask, 1)
            n = p[:-2, 1:-1]
            ne = p[:-2, 2:]
            e = p[1:-1, 2:]
            se = p[2:, 2:]
            s = p[2:, 1:-1]
            sw = p[2:, :-2]
            w = p[1:-1, :-2]
            nw = p[:-2, :-2]
            b = (n.astype(np.uint8) + ne + e + se + s + sw + w + nw)
            ring = [n, ne, e, se, s, sw, w, nw, n]
            a = np.zeros_like(b)
            for i in range(8):
                a += (~ring[i] & ring[i + 1]).astype(np.uint8)
            if phase == 0:
                cond = ~(n & e & s) & ~(e & s & w)
            else:
                cond = ~(n & e & w) & ~(n & s & w)
            cand = mask & (b >= 2) & (b <= 6) & (a == 1) & cond
            ys, xs = np.nonzero(cand)
            if len(ys) == 0:
                continue
            pad = np.pad(mask, 1)
            for y, x in zip(ys.tolist(), xs.tolist()):
                cfg = _ring_config(pad, y + 1, x + 1)
                if _SIMPLE[cfg] and bin(cfg).count("1") >= 2:
                    pad[y + 1, x + 1] = False
                    changed = True
            mask = pad[1:-1, 1:-1]
        if not changed:
            break

    # staircase cleanup: peel every remaining simple pixel that is not a
    # stroke tip. Interior pixels of 1-px curves have two mutually
    # non-adjacent neighbors and are not simple, so curves survive; the
    # pass dissolves redundant elbows, junction clumps and 2x2 blocks.
    while True:
        pad = np.pad(mask, 1)
        removed = False
        ys, xs = np.nonzero(mask)
        for y, x in zip(ys.tolist(), xs.tolist()):
            if not pad[y + 1, x + 1]:
                continue
            cfg = _ring_config(pad, y + 1, x + 1)
            if _SIMPLE[cfg] and bin(cfg).count("1") >= 2:
                pad[y + 1, x + 1] = False
                removed = True
        mask = pad[1:-1, 1:-1]
        if not removed:
            break

    return Skeleton(BinaryImage(mask.copy()))


class ThinnessError(Exception):
    def __init__(self, block: tuple[int, int]):
        super().__init__(f"2x2 foreground block at ({block[0]}, {block[1]})")
        self.block = block


def to_graph(s: Skeleton) -> SkeletonGraph:
    """Nodes at endpoints/junctions (degree != 2); arcs between them.

    Adjacency is reduced 8-adjacency: a diagonal link is ignored when an
    orthogonal two-step path connects the same pixels, so arms meeting at
    a crossing read as one junction rather than a clique. Pure cycles,
    having no natural node, get an anchor at their smallest (x, y) pixel
    and one self-loop edge.
    """
    mask = s.mask.foreground
    full = mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]
    if full.any():
        y, x = np.argwhere(full)[0]
        raise ThinnessError((int(x), int(y)))

    h, w = mask.shape

    def neighbors(x, y):
        out = []
        for dx, dy in _RING:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < w and 0 <= ny < h and mask[ny, nx]):
                continue
            if dx and dy and (mask[y, nx] or mask[ny, x]):
                continue  # diagonal shortcut across an orthogonal path
            out.append((nx, ny))
        return out

    deg = np.zeros_like(mask, dtype=np.int8)
    ys, xs = np.nonzero(mask)
    for x, y in zip(xs.tolist(), ys.tolist()):
        deg[y, x] = len(neighbors(x, y))

    node_set: dict[tuple[int, int], int] = {}
    ys, xs = np.nonzero(mask & (deg != 2))
    for x, y in sorted(zip(xs.tolist(), ys.tolist())):
        node_set[(x, y)] = int(deg[y, x])

    used_steps: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    covered: set[tuple[int, int]] = set(node_set)
    edges = []

    def walk(start, first):
        path = [start, first]
        used_steps.add((start, first))
        used_steps.add((first, start))
        cur, prev = first, start
        while cur not in node_set:
            covered.add(cur)
            nxt = next(q for q in neighbors(*cur) if q != prev)
            used_steps.add((cur, nxt))
            used_steps.add((nxt, cur))
            path.append(nxt)
            prev, cur = cur, nxt
        return path

    for node in node_set:
        for q in neighbors(*node):
            if (node, q) in used_steps:
                continue
            path = walk(node, q)
            edges.append((node, path[-1], tuple(path)))

    # leftover degree-2 pixels form pure cycles
    ys, xs = np.nonzero(mask)
    for x, y in sorted(zip(xs.tolist(), ys.tolist())):
        if (x, y) in covered or (x, y) in node_set:
            continue
        anchor = (x, y)
        node_set[anchor] = int(deg[y, x])
        nbrs = neighbors(x, y)
        path = walk(anchor, nbrs[0])
        # walk stops on reaching the anchor (now a node)
        edges.append((anchor, anchor, tuple(path)))

    order = list(node_set)
    index = {p: i for i, p in enumerate(order)}
    return SkeletonGraph(
        nodes=tuple(order),
        degrees=tuple(node_set[p] for p in order),
        edges=tuple((index[a], index[b], path) for a, b, path in edges),
    )


def graph_to_dict(g: SkeletonGraph) -> dict:
    return {
        "nodes": [
            {"x": x, "y": y, "degree": d}
            for (x, y), d in zip(g.nodes, g.degrees)
        ],
        "edges": [{"a": a, "b": b, "path_len": len(p)} for a, b, p in g.edges],
    }
