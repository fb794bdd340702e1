import numpy as np
import pytest

from helpers import random_shape_mask, topology
from scriptorium.raster import BinaryImage
from scriptorium.skeleton import Skeleton, ThinnessError, skeletonize, to_graph


def img(mask):
    return BinaryImage(np.array(mask, dtype=bool))


def no_full_block(mask):
    return not (mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]).any()


def test_thin_line_is_fixpoint():
    line = np.zeros((5, 22), dtype=bool)
    line[2, 1:21] = True
    sk = skeletonize(img(line))
    assert np.array_equal(sk.mask.foreground, line)


def test_empty_image():
    sk = skeletonize(img(np.zeros((4, 4))))
    assert not sk.mask.foreground.any()
    g = to_graph(sk)
    assert g.nodes == () and g.edges == ()


# frozen output of skeletonize on the 20x20 filled square (recorded once;
# guards against silent behavior drift)
SQUARE_GOLDEN = {
    (11, 12), (12, 12), (13, 13), (14, 14), (15, 15), (16, 16),
    (17, 17), (18, 18), (19, 19), (20, 20), (21, 21),
}


def test_square_skeleton():
    sq = np.zeros((24, 24), dtype=bool)
    sq[2:22, 2:22] = True
    sk = skeletonize(img(sq))
    m = sk.mask.foreground
    assert m.sum() <= 40
    assert topology(m) == (1, 0)
    assert no_full_block(m)
    got = {(int(x), int(y)) for y, x in np.argwhere(m)}
    assert got == SQUARE_GOLDEN


def test_ring_single_closed_curve():
    yy, xx = np.mgrid[0:20, 0:20]
    r2 = (yy - 9.5) ** 2 + (xx - 9.5) ** 2
    ring = (r2 <= 64) & (r2 >= 25)
    sk = skeletonize(img(ring))
    assert topology(sk.mask.foreground) == (1, 1)
    g = to_graph(sk)
    assert sum(1 for d in g.degrees if d == 1) == 0     # no endpoints
    assert len(g.edges) == 1
    a, b, path = g.edges[0]
    assert a == b                                       # one self-loop arc


def test_straight_line_graph():
    line = np.zeros((3, 10), dtype=bool)
    line[1, 1:9] = True
    g = to_graph(skeletonize(img(line)))
    assert len(g.nodes) == 2
    assert sorted(g.degrees) == [1, 1]
    assert len(g.edges) == 1
    assert len(g.edges[0][2]) == 8


def test_plus_sign_graph():
    plus = np.zeros((15, 15), dtype=bool)
    plus[7, 2:13] = True
    plus[2:13, 7] = True
    g = to_graph(skeletonize(img(plus)))
    junctions = [d for d in g.degrees if d >= 3]
    assert junctions == [4]
    assert sum(1 for d in g.degrees if d == 1) == 4
    assert len(g.edges) == 4


def test_to_graph_rejects_thick_mask():
    with pytest.raises(ThinnessError) as exc:
        to_graph(Skeleton(img(np.ones((3, 3)))))
    assert exc.value.block == (0, 0)


def test_random_blobs_topology_thinness_and_reconstruction():
    rng = np.random.default_rng(2024)
    done = 0
    while done < 200:
        mask = random_shape_mask(rng)
        if not mask.any():
            continue
        done += 1
        before = topology(mask)
        sk = skeletonize(img(mask))
        m = sk.mask.foreground
        assert not (m & ~mask).any()          # subset of source
        assert no_full_block(m)               # strict thinness
        assert topology(m) == before          # components and holes kept
        g = to_graph(sk)
        pix = set(g.nodes)
        for _, _, path in g.edges:
            pix.update(path)
        assert pix == {(int(x), int(y)) for y, x in np.argwhere(m)}


def test_graph_json_export_shape():
    from scriptorium.skeleton import graph_to_dict

    plus = np.zeros((15, 15), dtype=bool)
    plus[7, 2:13] = True
    plus[2:13, 7] = True
    doc = graph_to_dict(to_graph(skeletonize(img(plus))))
    assert set(doc) == {"nodes", "edges"}
    assert all(set(n) == {"x", "y", "degree"} for n in doc["nodes"])
    assert all(set(e) == {"a", "b", "path_len"} for e in doc["edges"])
    for e in doc["edges"]:
        assert 0 <= e["a"] < len(doc["nodes"])
        assert 0 <= e["b"] < len(doc["nodes"])
        assert e["path_len"] >= 2


def test_pinwheel_trade_off_topology_wins():
    # four diagonal arms pinned to the corners of a 2x2 block: no pixel of
    # the block can be removed without breaking topology, so thinning
    # leaves it thick rather than damage connectivity
    m = np.zeros((4, 4), dtype=bool)
    m[1:3, 1:3] = True
    for x, y in ((0, 0), (3, 0), (0, 3), (3, 3)):
        m[y, x] = True
    before = topology(m)
    sk = skeletonize(img(m))
    assert topology(sk.mask.foreground) == before
    assert not no_full_block(sk.mask.foreground)
    with pytest.raises(ThinnessError):
        to_graph(sk)
