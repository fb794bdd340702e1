"""Shared independent oracles and input generators for the test suite.

Everything here is deliberately written from scratch (plain flood fills,
brute-force scans) so it cannot share a bug with the library code it
checks.
"""
import numpy as np

NBRS8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
NBRS4 = [(-1, 0), (1, 0), (0, -1), (0, 1)]


def flood_components(mask, connectivity=8):
    """Connected components of True cells as a list of {(x, y)} sets."""
    nbrs = NBRS8 if connectivity == 8 else NBRS4
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not seen[y, x]:
                stack = [(y, x)]
                seen[y, x] = True
                comp = set()
                while stack:
                    cy, cx = stack.pop()
                    comp.add((cx, cy))
                    for dy, dx in nbrs:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack.append((ny, nx))
                comps.append(comp)
    return comps


def count_holes(mask):
    """Background 4-components not connected to the border (mask padded)."""
    p = np.pad(mask, 1)
    regions = flood_components(~p, connectivity=4)
    return sum(1 for r in regions if (0, 0) not in r)


def topology(mask):
    return len(flood_components(mask, 8)), count_holes(mask)


def random_shape_mask(rng, h=40, w=40):
    """Glyph-like blobs: strokes, disks, rectangles and rings."""
    m = np.zeros((h, w), dtype=bool)
    for _ in range(rng.integers(1, 5)):
        kind = rng.integers(0, 4)
        if kind == 0:
            y0, x0 = rng.integers(0, h - 6), rng.integers(0, w - 6)
            dy, dx = rng.integers(2, 10, 2)
            m[y0 : y0 + dy, x0 : x0 + dx] = True
        elif kind == 1:
            cy, cx = rng.integers(5, h - 5), rng.integers(5, w - 5)
            r = rng.integers(2, 7)
            yy, xx = np.mgrid[0:h, 0:w]
            m |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        elif kind == 2:
            y, x = rng.integers(3, h - 3), rng.integers(3, w - 3)
            for _ in range(rng.integers(8, 30)):
                m[max(0, y - 1) : y + 2, max(0, x - 1) : x + 2] = True
                y = int(np.clip(y + rng.integers(-1, 2), 1, h - 2))
                x = int(np.clip(x + rng.integers(-1, 2), 1, w - 2))
        else:
            cy, cx = rng.integers(8, h - 8), rng.integers(8, w - 8)
            r = rng.integers(4, 8)
            yy, xx = np.mgrid[0:h, 0:w]
            d2 = (yy - cy) ** 2 + (xx - cx) ** 2
            m |= (d2 <= r * r) & (d2 >= (r - 2) ** 2)
    return m


def random_noise_mask(rng, max_side=18):
    h, w = rng.integers(2, max_side, 2)
    return rng.random((h, w)) < rng.uniform(0.3, 0.8)


def cluster_shape(kind, s=24):
    """Ten well-separated glyph silhouettes for clustering tests."""
    g = np.zeros((s, s), dtype=bool)
    c = s // 2
    if kind == 0:   # C opening right
        g[2:-2, 2:8] = True
        g[2:8, 2:-2] = True
        g[-8:-2, 2:-2] = True
    elif kind == 1:  # square
        g[2:-2, 2:-2] = True
    elif kind == 2:  # tall bar
        g[1:-1, c - 3 : c + 3] = True
    elif kind == 3:  # wide bar
        g[c - 3 : c + 3, 1:-1] = True
    elif kind == 4:  # X
        for y in range(2, s - 2):
            x = int(np.interp(y, [2, s - 3], [2, s - 8]))
            g[y, x : x + 6] = True
            g[y, s - 6 - x : s - x] = True
    elif kind == 5:  # L
        g[2:-2, 2:8] = True
        g[-8:-2, 2:-2] = True
    elif kind == 6:  # T
        g[2:8, 2:-2] = True
        g[2:-2, c - 3 : c + 3] = True
    elif kind == 7:  # plus
        g[c - 3 : c + 3, 2:-2] = True
        g[2:-2, c - 3 : c + 3] = True
    elif kind == 8:  # Z
        g[2:7, 2:-2] = True
        g[-7:-2, 2:-2] = True
        for y in range(2, s - 2):
            x = int(np.interp(y, [2, s - 3], [s - 8, 2]))
            g[y, x : x + 6] = True
    elif kind == 9:  # H
        g[2:-2, 2:8] = True
        g[2:-2, -8:-2] = True
        g[c - 3 : c + 3, 2:-2] = True
    else:
        raise ValueError(kind)
    return g


def purity(true_labels, cluster_labels):
    total = len(true_labels)
    got = 0
    for cid in set(cluster_labels):
        members = [true_labels[i] for i in range(total) if cluster_labels[i] == cid]
        got += max(members.count(v) for v in set(members))
    return got / total


def partition_sets(labels):
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, set()).add(i)
    return {frozenset(g) for g in groups.values()}
