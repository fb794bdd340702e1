"""Oriented blob outlines: extraction, rasterization and chain-code bytes.

Vertices live on pixel corners: pixel (x, y) occupies the unit square
[x, x+1] x [y, y+1], so every boundary edge is an unambiguous unit
segment. Traversal keeps foreground on the left (y grows downward),
which makes the one outer cycle of a blob positively oriented and every
hole cycle negative under the y-down shoelace. Foreground is treated as
8-connected and background as 4-connected; at a corner where two
foreground pixels touch diagonally the walk turns right, pinching the
outline through the corner instead of splitting it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BinaryImage
from .segmentation import Blob, PageSegmentation

# direction codes for chain-code bytes
EAST, SOUTH, WEST, NORTH = 0, 1, 2, 3
_STEP = {EAST: (1, 0), SOUTH: (0, 1), WEST: (-1, 0), NORTH: (0, -1)}
_CODE = {v: k for k, v in _STEP.items()}


def _right_turn(d: tuple[int, int]) -> tuple[int, int]:
    # y-down right turn: east->south->west->north->east
    return (-d[1], d[0])


@dataclass(frozen=True)
class OutlineCycle:
    vertices: tuple[tuple[int, int], ...]  # closed implicitly, no repeat of first
    orientation: int                       # +1 outer, -1 inner
    signed_area: int

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class BlobOutline:
    blob_id: int
    cycles: tuple[OutlineCycle, ...]

    def outer(self) -> OutlineCycle:
        return next(c for c in self.cycles if c.orientation == 1)


def signed_area(vertices) -> int:
    """Twice-area shoelace adapted to y-down coordinates, halved exactly."""
    twice = 0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        twice += x1 * y0 - x0 * y1
    if twice % 2:
        raise ValueError("open or non-rectilinear cycle")
    return twice // 2


def _make_cycle(vertices: list[tuple[int, int]]) -> OutlineCycle:
    area = signed_area(vertices)
    return OutlineCycle(tuple(vertices), 1 if area > 0 else -1, area)


def _finish(blob_id: int, cycles: list[OutlineCycle]) -> BlobOutline:
    outers = sum(1 for c in cycles if c.orientation == 1)
    if outers != 1:
        raise AssertionError(f"blob {blob_id}: {outers} outer cycles")
    return BlobOutline(blob_id, tuple(cycles))


# --- algorithm 1: boundary-edge graph + loop search -------------------------

def trace_graph(blob: Blob) -> BlobOutline:
    """Collect all boundary edges, then follow loops through the edge graph.

    Every directed edge has exactly one successor (the unique outgoing edge
    at its endpoint, or the right turn at a pinched corner), so the edges
    decompose into disjoint orbits; each orbit is one cycle.
    """
    mask, (ox, oy) = blob.mask()
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask

    edges: list[tuple[tuple[int, int], tuple[int, int], tuple[int, int]]] = []
    ys, xs = np.nonzero(mask)
    for y, x in zip(ys.tolist(), xs.tolist()):
        if not padded[y, x + 1]:        # north neighbor empty: top edge, walk west
            edges.append(((x + 1, y), (x, y), (-1, 0)))
        if not padded[y + 2, x + 1]:    # south: bottom edge, walk east
            edges.append(((x, y + 1), (x + 1, y + 1), (1, 0)))
        if not padded[y + 1, x]:        # west: left edge, walk south
            edges.append(((x, y), (x, y + 1), (0, 1)))
        if not padded[y + 1, x + 2]:    # east: right edge, walk north
            edges.append(((x + 1, y + 1), (x + 1, y), (0, -1)))

    out_at: dict[tuple[int, int], list[int]] = {}
    for i, (u, _, _) in enumerate(edges):
        out_at.setdefault(u, []).append(i)

    def successor(i: int) -> int:
        _, v, d = edges[i]
        options = out_at[v]
        if len(options) == 1:
            return options[0]
        want = _right_turn(d)  # pinched corner: keep hugging the foreground
        for j in options:
            if edges[j][2] == want:
                return j
        raise AssertionError("broken boundary graph")

    used = [False] * len(edges)
    cycles: list[OutlineCycle] = []
    for start in sorted(range(len(edges)), key=lambda i: edges[i][:2]):
        if used[start]:
            continue
        verts: list[tuple[int, int]] = []
        i = start
        while not used[i]:
            used[i] = True
            verts.append(edges[i][0])
            i = successor(i)
        cycles.append(_make_cycle([(x + ox, y + oy) for x, y in verts]))
    return _finish(blob.id, cycles)


# --- algorithm 2: single-pass line sweep -------------------------------------

class _Chain:
    __slots__ = ("verts", "first_dir", "last_dir")

    def __init__(self, u, v, d):
        self.verts = [u, v]
        self.first_dir = d
        self.last_dir = d


def trace_sweep(blob: Blob) -> BlobOutline:
    """Scan rows once, emitting boundary fragments and stitching them into
    loops as soon as every edge around a vertex has been seen."""
    mask, (ox, oy) = blob.mask()
    h, w = mask.shape

    chains: dict[int, _Chain] = {}
    by_tail: dict[tuple[int, int], list[int]] = {}
    by_head: dict[tuple[int, int], list[int]] = {}
    next_id = 0
    cycles: list[OutlineCycle] = []

    def emit(u, v, d):
        nonlocal next_id
        chains[next_id] = _Chain(u, v, d)
        by_head.setdefault(u, []).append(next_id)
        by_tail.setdefault(v, []).append(next_id)
        next_id += 1

    def link(t_id: int, h_id: int, v, waiting_tails: list[int]):
        a = chains[t_id]
        if t_id == h_id:
            verts = a.verts[:-1]  # head vertex repeats at the tail
            cycles.append(_make_cycle([(x + ox, y + oy) for x, y in verts]))
            del chains[t_id]
            return
        b = chains[h_id]
        a.verts.extend(b.verts[1:])
        a.last_dir = b.last_dir
        new_tail = a.verts[-1]
        if new_tail == v:
            # absorbed chain looped back here; keep it in this round
            waiting_tails[waiting_tails.index(h_id)] = t_id
        else:
            ids = by_tail[new_tail]
            ids[ids.index(h_id)] = t_id
        del chains[h_id]

    def resolve(v):
        tails = by_tail.pop(v, [])
        heads = by_head.pop(v, [])
        if not tails and not heads:
            return
        assert len(tails) == len(heads), (v, tails, heads)
        while tails:
            t = tails.pop(0)
            if len(heads) == 1:
                h = heads.pop()
            else:
                want = _right_turn(chains[t].last_dir)
                h = next(h_ for h_ in heads if chains[h_].first_dir == want)
                heads.remove(h)
            link(t, h, v, tails)

    empty = np.zeros(w, dtype=bool)
    prev_row = empty
    for y in range(h + 1):
        row = mask[y] if y < h else empty
        settle: set[tuple[int, int]] = set()
        # horizontal edges where coverage changes between the two rows
        for x in np.flatnonzero(row != prev_row).tolist():
            if row[x]:
                emit((x + 1, y), (x, y), (-1, 0))
            else:
                emit((x, y), (x + 1, y), (1, 0))
            settle.add((x, y))
            settle.add((x + 1, y))
        # vertical edges along the current pixel row
        if y < h:
            bounded = np.concatenate(([False], row, [False]))
            for x in np.flatnonzero(bounded[1:] != bounded[:-1]).tolist():
                if bounded[x + 1]:
                    emit((x, y), (x, y + 1), (0, 1))
                else:
                    emit((x, y + 1), (x, y), (0, -1))
                settle.add((x, y))
        for v in sorted(settle):
            resolve(v)
        prev_row = row
    assert not chains, "unclosed boundary chains"
    return _finish(blob.id, cycles)


# --- canonical form for comparison -------------------------------------------

def canonical_cycles(outline: BlobOutline) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Rotate each cycle so its smallest vertex comes first; sort cycles."""
    out = []
    for c in outline.cycles:
        verts = c.vertices
        k = verts.index(min(verts))
        out.append(verts[k:] + verts[:k])
    return tuple(sorted(out))


# --- rasterization ------------------------------------------------------------

def rasterize(outline: BlobOutline, width: int, height: int) -> BinaryImage:
    """Even-odd fill of the cycles; exact inverse of tracing."""
    for cycle in outline.cycles:
        for x, y in cycle.vertices:
            if not (0 <= x <= width and 0 <= y <= height):
                raise ValueError(f"vertex {(x, y)} outside {width}x{height}")
    toggles = np.zeros((height, width + 1), dtype=np.uint8)
    for cycle in outline.cycles:
        verts = cycle.vertices
        n = len(verts)
        for i in range(n):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % n]
            if x0 == x1:
                toggles[min(y0, y1), x0] ^= 1
            elif y0 != y1:
                raise ValueError("cycle edge is not axis-aligned")
    parity = np.cumsum(toggles, axis=1, dtype=np.int64) % 2
    return BinaryImage(parity[:, :width].astype(bool))


# --- chain-code bytes ---------------------------------------------------------

def _varint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    shift = value = 0
    while True:
        byte = buf[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7


def encode_chain_code(outlines) -> bytes:
    """Pack cycles as: varint cycle count, then per cycle the start vertex
    (two varints), a varint edge count, and 2-bit direction codes
    (E=0 S=1 W=2 N=3) packed four per byte, low bits first."""
    cycles = [c for o in outlines for c in o.cycles]
    out = bytearray(_varint(len(cycles)))
    for c in cycles:
        verts = c.vertices
        out += _varint(verts[0][0])
        out += _varint(verts[0][1])
        out += _varint(len(verts))
        acc = 0
        bits = 0
        packed = bytearray()
        for i in range(len(verts)):
            x0, y0 = verts[i]
            x1, y1 = verts[(i + 1) % len(verts)]
            code = _CODE[(x1 - x0, y1 - y0)]
            acc |= code << bits
            bits += 2
            if bits == 8:
                packed.append(acc)
                acc = bits = 0
        if bits:
            packed.append(acc)
        out += packed
    return bytes(out)


def decode_chain_code(data: bytes) -> list[list[tuple[int, int]]]:
    count, pos = _read_varint(data, 0)
    cycles = []
    for _ in range(count):
        x, pos = _read_varint(data, pos)
        y, pos = _read_varint(data, pos)
        edges, pos = _read_varint(data, pos)
        verts = []
        nbytes = (edges + 3) // 4
        block = data[pos : pos + nbytes]
        pos += nbytes
        cx, cy = x, y
        for i in range(edges):
            verts.append((cx, cy))
            code = (block[i // 4] >> (2 * (i % 4))) & 0x3
            dx, dy = _STEP[code]
            cx += dx
            cy += dy
        if (cx, cy) != (x, y):
            raise ValueError("chain code does not close")
        cycles.append(verts)
    return cycles


def compression_ratio(page: PageSegmentation) -> float:
    """1-bit bitmap bytes divided by chain-code bytes for the whole page."""
    if not page.blobs:
        raise ValueError("page has no blobs")
    outlines = [trace_graph(b) for b in page.blobs]
    bitmap_bytes = (page.width * page.height + 7) // 8
    outline_bytes = len(encode_chain_code(outlines))
    return bitmap_bytes / outline_bytes
