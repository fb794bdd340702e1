import numpy as np
import pytest

from scriptorium.raster import BinaryImage
from scriptorium.sequence import (
    Alphabet,
    InfeasibleLabelError,
    TrainingDivergedError,
    check_log_probs,
    collapse,
    ctc_grad,
    ctc_loss,
    decode_best_path,
    init_model,
    load_checkpoint,
    log_softmax,
    make_frames,
    min_frames,
    save_checkpoint,
    stable_logsumexp,
    train_toy,
)


def rand_log_probs(rng, t, a):
    return log_softmax(rng.normal(0, 1.5, (t, a + 1)))


# --- brute-force path oracle ----------------------------------------------------

def brute_force_loss(p, y):
    """Enumerate all (A+1)^T paths, keep those collapsing to y."""
    t_len, k = p.shape
    paths = np.stack(
        np.meshgrid(*[np.arange(k)] * t_len, indexing="ij"), axis=-1
    ).reshape(-1, t_len)
    lp = p[np.arange(t_len)[None, :], paths].sum(axis=1)
    n = len(paths)
    out = np.zeros((n, t_len), dtype=np.int64)
    lens = np.zeros(n, dtype=np.int64)
    prev = np.full(n, -1, dtype=np.int64)
    for t in range(t_len):
        cur = paths[:, t]
        emit = (cur != prev) & (cur != 0)
        rows = np.flatnonzero(emit)
        out[rows, lens[emit]] = cur[emit]
        lens[emit] += 1
        prev = cur
    y = np.asarray(y, dtype=np.int64)
    match = lens == len(y)
    if len(y):
        match &= (out[:, : len(y)] == y[None, :]).all(axis=1)
    sel = lp[match]
    if not len(sel):
        return None
    m = sel.max()
    return float(-(m + np.log(np.exp(sel - m).sum())))


def test_logsumexp_examples():
    assert stable_logsumexp([2.5]) == 2.5
    assert stable_logsumexp([-1e9, -1e9]) == pytest.approx(-1e9 + np.log(2), abs=1e-6)
    assert stable_logsumexp([0.0, -np.inf]) == 0.0
    assert stable_logsumexp([-np.inf, -np.inf]) == -np.inf
    with pytest.raises(ValueError):
        stable_logsumexp([])


def test_collapse_rules():
    assert collapse([0, 0]) == []
    assert collapse([1, 1, 2, 0, 2]) == [1, 2, 2]
    assert collapse([1, 0, 1]) == [1, 1]


def test_single_frame_single_symbol():
    rng = np.random.default_rng(0)
    p = rand_log_probs(rng, 1, 3)
    assert ctc_loss(p, [2]) == pytest.approx(-p[0, 2], abs=1e-12)


def test_two_frame_cases():
    rng = np.random.default_rng(1)
    p = rand_log_probs(rng, 2, 2)
    want = -stable_logsumexp([p[0, 1] + p[1, 1], p[0, 1] + p[1, 0], p[0, 0] + p[1, 1]])
    assert ctc_loss(p, [1]) == pytest.approx(want, abs=1e-12)
    assert ctc_loss(p, []) == pytest.approx(-(p[0, 0] + p[1, 0]), abs=1e-12)


def test_loss_matches_brute_force():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 60:
        t = int(rng.integers(1, 7))
        a = int(rng.integers(1, 4))
        y = rng.integers(1, a + 1, rng.integers(0, 4)).tolist()
        if t < min_frames(y):
            continue
        p = rand_log_probs(rng, t, a)
        assert ctc_loss(p, y) == pytest.approx(brute_force_loss(p, y), abs=1e-9)
        checked += 1


def test_infeasible_label_raises():
    rng = np.random.default_rng(3)
    p = rand_log_probs(rng, 2, 2)
    with pytest.raises(InfeasibleLabelError):
        ctc_loss(p, [1, 1])  # repeat needs a blank: min 3 frames
    with pytest.raises(InfeasibleLabelError):
        ctc_grad(p, [1, 2, 1])
    with pytest.raises(ValueError):
        ctc_loss(p, [5])


def test_feasibility_monotone_in_frames():
    rng = np.random.default_rng(4)
    y = [1, 1, 2]
    assert min_frames(y) == 4
    for t in range(4, 9):
        p = rand_log_probs(rng, t, 2)
        assert np.isfinite(ctc_loss(p, y))


def test_grad_rows_sum_to_zero_and_t1_closed_form():
    rng = np.random.default_rng(5)
    p = rand_log_probs(rng, 6, 3)
    g = ctc_grad(p, [1, 3])
    assert np.abs(g.sum(axis=1)).max() < 1e-12

    p1 = rand_log_probs(rng, 1, 4)
    g1 = ctc_grad(p1, [3])
    want = np.exp(p1)
    want[0, 3] -= 1.0
    assert np.abs(g1 - want).max() < 1e-12


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(6)
    h = 1e-6
    worst = 0.0
    for _ in range(10):
        t, a = 4, 2
        y = [1, 2]
        logits = rng.normal(0, 1, (t, a + 1))
        g = ctc_grad(log_softmax(logits), y)
        num = np.zeros_like(logits)
        for i in range(t):
            for j in range(a + 1):
                lp = logits.copy()
                lp[i, j] += h
                lm = logits.copy()
                lm[i, j] -= h
                num[i, j] = (ctc_loss(log_softmax(lp), y) - ctc_loss(log_softmax(lm), y)) / (2 * h)
        rel = np.abs(g - num) / np.maximum.reduce(
            [np.abs(g), np.abs(num), np.full_like(g, 1e-4)]
        )
        worst = max(worst, float(rel.max()))
    assert worst <= 1e-5


def test_decode_best_path():
    # concentrated rows: a a - b  ->  [a, b]
    p = np.log(np.array([
        [0.01, 0.97, 0.01, 0.01],
        [0.01, 0.97, 0.01, 0.01],
        [0.97, 0.01, 0.01, 0.01],
        [0.01, 0.01, 0.97, 0.01],
    ]))
    assert decode_best_path(log_softmax(p)) == [1, 2]
    # uniform rows tie to blank
    u = log_softmax(np.zeros((5, 4)))
    assert decode_best_path(u) == []


def test_decode_matches_independent_argmax_collapse():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = rand_log_probs(rng, 6, 3)
        want = collapse([int(np.argmax(row)) for row in p])
        assert decode_best_path(p) == want


def test_decode_of_onehot_path_equals_collapse():
    rng = np.random.default_rng(8)
    for _ in range(20):
        path = rng.integers(0, 4, rng.integers(1, 10)).tolist()
        logits = np.full((len(path), 4), -20.0)
        for t, s in enumerate(path):
            logits[t, s] = 0.0
        assert decode_best_path(log_softmax(logits)) == collapse(path)


def test_check_log_probs():
    rng = np.random.default_rng(9)
    check_log_probs(rand_log_probs(rng, 4, 3))
    with pytest.raises(ValueError):
        check_log_probs(np.zeros((3, 4)))


def test_make_frames_paper_scale():
    img = BinaryImage(np.zeros((53, 750), dtype=bool))
    fs = make_frames(img, 7)
    assert fs.frames.shape == (750, 53, 7)


def test_make_frames_single_column():
    col = np.zeros((4, 1), dtype=bool)
    col[1, 0] = True
    fs = make_frames(BinaryImage(col), 1)
    assert fs.frames.shape == (1, 4, 1)
    assert fs.frames[0, 1, 0]


def test_make_frames_padding_and_rtl():
    line = np.zeros((4, 5), dtype=bool)
    line[:, 0] = True
    fs = make_frames(BinaryImage(line), 3)
    assert fs.t == 5
    assert not fs.frames[0][:, 0].any()          # left pad column
    assert fs.frames[0][:, 1].all()              # the ink column
    rtl = make_frames(BinaryImage(line), 3, "rtl")
    assert np.array_equal(rtl.frames[4], fs.frames[0][:, ::-1])
    with pytest.raises(ValueError):
        make_frames(BinaryImage(line), 4)


def test_alphabet_ids():
    ab = Alphabet(("a", "b", "c"))
    assert ab.size == 3
    assert ab.id_of("b") == 2
    assert ab.decode_ids([1, 3]) == "ac"
    with pytest.raises(ValueError):
        Alphabet(("a", "a"))


def toy_corpus(rng, n=12):
    corpus = []
    for _ in range(n):
        length = int(rng.integers(2, 5))
        text = rng.integers(1, 3, length).tolist()
        cols = [np.ones((6, 3), dtype=bool) if s == 1 else np.zeros((6, 3), dtype=bool)
                for s in text]
        img = BinaryImage(np.concatenate(cols, axis=1))
        corpus.append((make_frames(img, 3), text))
    return corpus


def test_train_zero_epochs_is_identity():
    rng = np.random.default_rng(10)
    model = init_model(6, 3, 2, 8, seed=1)
    out = train_toy(model, toy_corpus(rng), epochs=0, lr=0.1, seed=2)
    assert np.array_equal(out.wx, model.wx)
    assert out.loss_curve == []


def test_train_deterministic_given_seed():
    rng = np.random.default_rng(11)
    corpus = toy_corpus(rng)
    a = train_toy(init_model(6, 3, 2, 8, seed=1), corpus, epochs=3, lr=0.1, seed=5)
    b = train_toy(init_model(6, 3, 2, 8, seed=1), corpus, epochs=3, lr=0.1, seed=5)
    assert a.loss_curve == b.loss_curve
    assert np.array_equal(a.wx, b.wx)


def test_train_loss_decreases():
    rng = np.random.default_rng(12)
    corpus = toy_corpus(rng, 20)
    model = train_toy(init_model(6, 3, 2, 16, seed=3), corpus, epochs=8, lr=0.15, seed=4)
    assert model.loss_curve[-1] < model.loss_curve[0] * 0.5


def test_train_divergence_carries_checkpoint():
    rng = np.random.default_rng(13)
    corpus = toy_corpus(rng, 4)
    model = init_model(6, 3, 2, 8, seed=1)
    model.wx[:] = np.nan
    with pytest.raises(TrainingDivergedError) as exc:
        train_toy(model, corpus, epochs=1, lr=0.1, seed=1)
    assert exc.value.checkpoint is not None


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(14)
    model = train_toy(init_model(6, 3, 2, 8, seed=9), toy_corpus(rng, 4),
                      epochs=2, lr=0.05, seed=9)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model)
    back = load_checkpoint(path)
    for name in ("wx", "wh", "bh", "wo", "bo"):
        assert np.array_equal(getattr(back, name), getattr(model, name))
    assert back.loss_curve == model.loss_curve
    assert back.epoch == model.epoch
    # byte-stable
    save_checkpoint(tmp_path / "m2.ckpt", back)
    assert (tmp_path / "m.ckpt").read_bytes() == (tmp_path / "m2.ckpt").read_bytes()


def test_checkpoint_rejects_truncation(tmp_path):
    model = init_model(4, 3, 2, 4, seed=0)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_two_symbol_solid_vs_empty_columns():
    """Separable by construction: symbol 1 renders as solid ink columns,
    symbol 2 as empty columns; the model must learn to segment runs."""
    h, gw, window = 8, 4, 5
    rng = np.random.default_rng(5)

    def sample():
        text = rng.integers(1, 3, int(rng.integers(3, 12))).tolist()
        cols = [np.full((h, gw), s == 1, dtype=bool) for s in text]
        img = BinaryImage(np.concatenate(cols, axis=1))
        return make_frames(img, window), text

    corpus = [sample() for _ in range(200)]
    held = [sample() for _ in range(50)]
    model = init_model(h, window, alphabet_size=2, state_size=32, seed=3)
    model = train_toy(model, corpus, epochs=30, lr=0.1, seed=4)
    exact = sum(
        decode_best_path(model.forward(frames)) == label for frames, label in held
    )
    assert exact / len(held) >= 0.99
