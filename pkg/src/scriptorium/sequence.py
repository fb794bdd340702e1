"""Sliding-window framing and a log-domain CTC engine with a toy model.

A line image becomes a sequence of narrow window frames (one per pixel
column at step 1), and CTC marginalizes over every frame-level path that
collapses to the target label. All probability arithmetic stays in the
log domain with max-shifting, so the loss of even a 50,000-frame line is
computed without underflow; raw path products at that length are far
below the smallest representable double.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .raster import BinaryImage

BLANK = 0  # reserved id everywhere: checkpoints, decoding, labels

NEG_INF = float("-inf")


class InfeasibleLabelError(Exception):
    """Label cannot be emitted in the given number of frames."""


class TrainingDivergedError(Exception):
    def __init__(self, epoch: int, checkpoint: "ToyModel"):
        super().__init__(f"loss became non-finite in epoch {epoch}")
        self.epoch = epoch
        self.checkpoint = checkpoint


@dataclass(frozen=True)
class Alphabet:
    """Symbols get ids 1..len(symbols); id 0 is the CTC blank."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols) or not self.symbols:
            raise ValueError("symbols must be distinct and non-empty")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def id_of(self, symbol: str) -> int:
        return self.symbols.index(symbol) + 1

    def symbol_of(self, sym_id: int) -> str:
        return self.symbols[sym_id - 1]

    def decode_ids(self, ids) -> str:
        return "".join(self.symbol_of(i) for i in ids)


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (T, H, W) bool

    def __post_init__(self):
        if self.frames.ndim != 3:
            raise ValueError("frames must be (T, H, W)")
        self.frames.setflags(write=False)

    @property
    def t(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def window(self) -> int:
        return self.frames.shape[2]


def make_frames(line: BinaryImage, window: int, reading_order: str = "ltr") -> FrameSequence:
    """Slide an odd window along the line with step 1 and symmetric
    zero padding, one frame per original column; RTL scans reverse the
    column order first."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    fg = line.foreground
    if fg.size == 0:
        raise ValueError("empty line image")
    if reading_order == "rtl":
        fg = fg[:, ::-1]
    elif reading_order != "ltr":
        raise ValueError("reading_order must be 'ltr' or 'rtl'")
    h, w = fg.shape
    half = (window - 1) // 2
    padded = np.zeros((h, w + 2 * half), dtype=bool)
    padded[:, half : half + w] = fg
    frames = np.empty((w, h, window), dtype=bool)
    for t in range(w):
        frames[t] = padded[:, t : t + window]
    return FrameSequence(frames)


# --- log-space primitives -----------------------------------------------------

def stable_logsumexp(values) -> float:
    """log(sum(exp(values))) with max shifting; -inf only when every
    input is -inf, never NaN for finite-or--inf inputs."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("logsumexp of empty list")
    m = arr.max()
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.exp(arr - m).sum()))


def check_log_probs(p: np.ndarray, tol: float = 1e-9) -> None:
    """Validate a (T, A+1) matrix of per-frame log-probabilities."""
    if p.ndim != 2 or p.shape[1] < 2:
        raise ValueError("log-prob matrix must be (T, A+1) with A >= 1")
    sums = np.array([stable_logsumexp(row) for row in p])
    if np.abs(sums).max() > tol:
        raise ValueError("log-prob rows must normalize to 1")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _augment(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    aug = np.full(2 * len(y) + 1, BLANK, dtype=np.int64)
    aug[1::2] = y
    return aug


def min_frames(y) -> int:
    """Smallest T that can emit the label: length plus required blanks
    between repeated symbols."""
    y = list(y)
    repeats = sum(1 for a, b in zip(y, y[1:]) if a == b)
    return len(y) + repeats


def _check_label(p: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if len(y) and (y.min() < 1 or y.max() >= p.shape[1]):
        raise ValueError("label id out of alphabet range")
    need = min_frames(y)
    if p.shape[0] < need:
        raise InfeasibleLabelError(
            f"label needs at least {need} frames, matrix has {p.shape[0]}"
        )
    return y


def _forward(p: np.ndarray, aug: np.ndarray) -> np.ndarray:
    """Log-domain forward lattice over the blank-augmented label."""
    t_len, s_len = p.shape[0], len(aug)
    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = p[0, aug[0]]
    if s_len > 1:
        alpha[0, 1] = p[0, aug[1]]
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[2:] = (aug[2:] != BLANK) & (aug[2:] != aug[:-2])
    for t in range(1, t_len):
        prev = alpha[t - 1]
        step = np.full(s_len, NEG_INF)
        step[1:] = prev[:-1]
        acc = np.logaddexp(prev, step)
        if s_len > 2:
            skip = np.full(s_len, NEG_INF)
            skip[2:] = prev[:-2]
            acc = np.where(skip_ok, np.logaddexp(acc, skip), acc)
        alpha[t] = acc + p[t, aug]
    return alpha


def _backward(p: np.ndarray, aug: np.ndarray) -> np.ndarray:
    t_len, s_len = p.shape[0], len(aug)
    beta = np.full((t_len, s_len), NEG_INF)
    beta[-1, -1] = p[-1, aug[-1]]
    if s_len > 1:
        beta[-1, -2] = p[-1, aug[-2]]
    skip_ok = np.zeros(s_len, dtype=bool)
    skip_ok[:-2] = (aug[:-2] != BLANK) & (aug[:-2] != aug[2:])
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1]
        step = np.full(s_len, NEG_INF)
        step[:-1] = nxt[1:]
        acc = np.logaddexp(nxt, step)
        if s_len > 2:
            skip = np.full(s_len, NEG_INF)
            skip[:-2] = nxt[2:]
            acc = np.where(skip_ok, np.logaddexp(acc, skip), acc)
        beta[t] = acc + p[t, aug]
    return beta


def ctc_loss(p: np.ndarray, y) -> float:
    """-log of the total probability of all paths collapsing to y."""
    y = _check_label(p, y)
    aug = _augment(y)
    alpha = _forward(p, aug)
    if len(aug) > 1:
        total = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    else:
        total = alpha[-1, -1]
    return float(-total)


def ctc_grad(p: np.ndarray, y) -> np.ndarray:
    """Gradient of ctc_loss with respect to the pre-softmax logits.

    Valid for any logits consistent with p, since softmax is invariant
    to per-row shifts: grad = softmax - path posterior.
    """
    y = _check_label(p, y)
    aug = _augment(y)
    alpha = _forward(p, aug)
    beta = _backward(p, aug)
    if len(aug) > 1:
        log_z = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    else:
        log_z = alpha[-1, -1]
    # alpha + beta double-counts the emission at t
    gamma = alpha + beta - p[:, aug]
    t_len, k = p.shape
    post = np.full((t_len, k), NEG_INF)
    for s, sym in enumerate(aug):
        post[:, sym] = np.logaddexp(post[:, sym], gamma[:, s])
    return np.exp(p) - np.exp(post - log_z)


def collapse(path) -> list[int]:
    """Merge adjacent equal ids, then drop blanks."""
    out: list[int] = []
    prev = None
    for sym in path:
        if sym != prev:
            out.append(int(sym))
        prev = sym
    return [s for s in out if s != BLANK]


def decode_best_path(p: np.ndarray) -> list[int]:
    """Greedy decoding: per-frame argmax (ties to the lowest id), collapsed."""
    return collapse(np.argmax(p, axis=1))


# --- toy recurrent model --------------------------------------------------------

@dataclass
class ToyModel:
    """One tanh recurrence over flattened frames, linear readout to
    alphabet+blank logits."""

    frame_height: int
    frame_width: int
    alphabet_size: int
    state_size: int
    wx: np.ndarray  # (S, D)
    wh: np.ndarray  # (S, S)
    bh: np.ndarray  # (S,)
    wo: np.ndarray  # (K, S)
    bo: np.ndarray  # (K,)
    seed: int = 0
    epoch: int = 0
    loss_curve: list[float] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.frame_height * self.frame_width

    def forward(self, frames: FrameSequence) -> np.ndarray:
        """Per-frame log-probabilities, shape (T, alphabet_size+1)."""
        _, logits, _ = self._states(frames)
        return log_softmax(logits)

    def _states(self, frames: FrameSequence):
        x = frames.frames.reshape(frames.t, -1).astype(np.float64)
        if x.shape[1] != self.input_dim:
            raise ValueError(
                f"frame size {frames.height}x{frames.window} does not match "
                f"model {self.frame_height}x{self.frame_width}"
            )
        proj = x @ self.wx.T + self.bh
        h = np.empty((frames.t, self.state_size))
        prev = np.zeros(self.state_size)
        for t in range(frames.t):
            prev = np.tanh(proj[t] + self.wh @ prev)
            h[t] = prev
        logits = h @ self.wo.T + self.bo
        return x, logits, h

    def copy(self) -> "ToyModel":
        return copy.deepcopy(self)


def init_model(frame_height: int, frame_width: int, alphabet_size: int,
               state_size: int, seed: int) -> ToyModel:
    rng = np.random.default_rng(seed)
    d = frame_height * frame_width
    k = alphabet_size + 1
    return ToyModel(
        frame_height=frame_height,
        frame_width=frame_width,
        alphabet_size=alphabet_size,
        state_size=state_size,
        wx=rng.normal(0.0, 1.0 / np.sqrt(d), (state_size, d)),
        wh=rng.normal(0.0, 1.0 / np.sqrt(state_size), (state_size, state_size)),
        bh=np.zeros(state_size),
        wo=rng.normal(0.0, 1.0 / np.sqrt(state_size), (k, state_size)),
        bo=np.zeros(k),
        seed=seed,
    )


def _sample_grads(model: ToyModel, frames: FrameSequence, y) -> tuple[float, tuple]:
    x, logits, h = model._states(frames)
    p = log_softmax(logits)
    loss = ctc_loss(p, y)
    dlogits = ctc_grad(p, y)                 # (T, K)
    dwo = dlogits.T @ h
    dbo = dlogits.sum(axis=0)
    dh_out = dlogits @ model.wo              # (T, S)
    t_len = frames.t
    da = np.zeros_like(h)
    carry = np.zeros(model.state_size)
    for t in range(t_len - 1, -1, -1):
        dh = dh_out[t] + carry
        da[t] = dh * (1.0 - h[t] ** 2)
        carry = model.wh.T @ da[t]
    dwx = da.T @ x
    dbh = da.sum(axis=0)
    hprev = np.vstack([np.zeros(model.state_size), h[:-1]])
    dwh = da.T @ hprev
    return loss, (dwx, dwh, dbh, dwo, dbo)


MAX_GRAD_NORM = 5.0


def train_toy(model: ToyModel, corpus, epochs: int, lr: float, seed: int) -> ToyModel:
    """Plain SGD on per-sample CTC loss with global gradient clipping.

    corpus: list of (FrameSequence, label id list). Deterministic for a
    fixed seed; raises TrainingDivergedError carrying the last finite
    model if the loss goes non-finite.
    """
    out = model.copy()
    out.loss_curve = list(model.loss_curve)
    if epochs == 0:
        return out
    rng = np.random.default_rng(seed)
    n = len(corpus)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        last_good = out.copy()
        for idx in order:
            frames, label = corpus[idx]
            loss, grads = _sample_grads(out, frames, label)
            if not np.isfinite(loss):
                raise TrainingDivergedError(out.epoch + epoch, last_good)
            total += loss
            norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads))
            scale = lr * (MAX_GRAD_NORM / norm if norm > MAX_GRAD_NORM else 1.0)
            dwx, dwh, dbh, dwo, dbo = grads
            out.wx -= scale * dwx
            out.wh -= scale * dwh
            out.bh -= scale * dbh
            out.wo -= scale * dwo
            out.bo -= scale * dbo
        mean = total / n
        if not np.isfinite(mean):
            raise TrainingDivergedError(out.epoch + epoch, last_good)
        out.loss_curve.append(float(mean))
        out.epoch += 1
    return out


# --- checkpoint bytes: one JSON header line, then f64 little-endian blocks ------

def save_checkpoint(path, model: ToyModel) -> None:
    header = {
        "format": "toy-rnn-v1",
        "frame_height": model.frame_height,
        "frame_width": model.frame_width,
        "alphabet_size": model.alphabet_size,
        "state_size": model.state_size,
        "seed": model.seed,
        "epoch": model.epoch,
        "loss_curve": model.loss_curve,
    }
    blocks = [model.wx, model.wh, model.bh, model.wo, model.bo]
    payload = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blocks)
    data = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload
    Path(path).write_bytes(data)


def load_checkpoint(path) -> ToyModel:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("format") != "toy-rnn-v1":
        raise ValueError("unrecognized checkpoint format")
    s = header["state_size"]
    d = header["frame_height"] * header["frame_width"]
    k = header["alphabet_size"] + 1
    shapes = [(s, d), (s, s), (s,), (k, s), (k,)]
    blob = raw[nl + 1 :]
    expected = sum(int(np.prod(sh)) for sh in shapes) * 8
    if len(blob) != expected:
        raise ValueError(f"checkpoint payload is {len(blob)} bytes, expected {expected}")
    arrays = []
    pos = 0
    for sh in shapes:
        count = int(np.prod(sh))
        arrays.append(
            np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(sh).copy()
        )
        pos += count * 8
    wx, wh, bh, wo, bo = arrays
    return ToyModel(
        frame_height=header["frame_height"],
        frame_width=header["frame_width"],
        alphabet_size=header["alphabet_size"],
        state_size=s,
        wx=wx, wh=wh, bh=bh, wo=wo, bo=bo,
        seed=header["seed"],
        epoch=header["epoch"],
        loss_curve=list(header["loss_curve"]),
    )
