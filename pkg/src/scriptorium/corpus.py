"""Training-corpus synthesis from a glyph atlas.

Real font rendering is replaced by compositing small per-symbol bitmaps:
lines are horizontal concatenations with a configurable overlap band
(ORed, imitating cursive joins) and a fixed-width gap for the space
symbol. The n-gram plan covers single symbols, symbol pairs and
pair-with-space samples so a model sees every join and the inter-word
gap.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import BinaryImage, load_image, save_pgm

GROUPS = ("letter", "digit", "diacritic")


@dataclass(frozen=True)
class GlyphSet:
    glyphs: dict[int, BinaryImage]      # symbol id -> bitmap; excludes the space id
    groups: dict[int, str]              # symbol id -> letter | digit | diacritic
    chars: dict[int, str]               # display character per id (space included)
    join_overlap: int
    space_id: int
    space_width: int

    def __post_init__(self):
        if not self.glyphs:
            raise ValueError("empty glyph set")
        heights = {img.height for img in self.glyphs.values()}
        if len(heights) != 1:
            raise ValueError("glyph heights differ")
        if self.join_overlap >= min(img.width for img in self.glyphs.values()):
            raise ValueError("join_overlap must be smaller than the narrowest glyph")
        if self.join_overlap < 0 or self.space_width < 1:
            raise ValueError("bad join_overlap or space_width")
        if self.space_id in self.glyphs:
            raise ValueError("space id must not carry a bitmap")
        ids = sorted(self.glyphs) + [self.space_id]
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise ValueError("symbol ids must be contiguous from 1")
        for gid, group in self.groups.items():
            if group not in GROUPS:
                raise ValueError(f"unknown group {group!r} for symbol {gid}")

    @property
    def height(self) -> int:
        return next(iter(self.glyphs.values())).height

    @property
    def symbol_ids(self) -> list[int]:
        return sorted(list(self.glyphs) + [self.space_id])

    def non_diacritics(self) -> list[int]:
        return [g for g in sorted(self.glyphs) if self.groups.get(g) != "diacritic"]

    def diacritics(self) -> list[int]:
        return [g for g in sorted(self.glyphs) if self.groups.get(g) == "diacritic"]


@dataclass(frozen=True)
class NgramPlan:
    strings: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.strings)


def build_plan(gs: GlyphSet, extra_trigrams=()) -> NgramPlan:
    """Unigrams (no diacritics), all valid bigrams (no diacritic pairs),
    all x-space-y trigrams over non-diacritics, then extras, deduplicated
    in that order."""
    known = set(gs.glyphs) | {gs.space_id}
    for tri in extra_trigrams:
        for sym in tri:
            if sym not in known:
                raise ValueError(f"extra trigram uses unknown symbol {sym}")
    base = gs.non_diacritics()
    diac = set(gs.diacritics())
    all_glyphs = sorted(gs.glyphs)
    strings: list[tuple[int, ...]] = []
    strings += [(g,) for g in base]
    strings += [
        (a, b)
        for a in all_glyphs
        for b in all_glyphs
        if not (a in diac and b in diac)
    ]
    strings += [(a, gs.space_id, b) for a in base for b in base]
    strings += [tuple(t) for t in extra_trigrams]
    seen = set()
    unique = []
    for s in strings:
        if s not in seen:
            seen.add(s)
            unique.append(s)
    return NgramPlan(tuple(unique))


def line_width(gs: GlyphSet, text) -> int:
    width = 0
    prev_glyph = False
    for sym in text:
        if sym == gs.space_id:
            width += gs.space_width
            prev_glyph = False
        else:
            width += gs.glyphs[sym].width - (gs.join_overlap if prev_glyph else 0)
            prev_glyph = True
    return width


def synthesize_line(gs: GlyphSet, text, seed: int = 0,
                    salt_p: float = 0.0) -> tuple[BinaryImage, list[int]]:
    """Compose a line image for the symbol ids; the ground-truth label is
    returned unchanged. Adjacent glyphs overlap by join_overlap columns
    (ORed); a space inserts a clean gap and suppresses the join. Salt
    noise, when enabled, sets random extra pixels with the seeded RNG."""
    text = [int(s) for s in text]
    if not text:
        raise ValueError("empty text")
    for sym in text:
        if sym != gs.space_id and sym not in gs.glyphs:
            raise ValueError(f"unknown symbol id {sym}")
    h = gs.height
    canvas = np.zeros((h, line_width(gs, text)), dtype=bool)
    x = 0
    prev_glyph = False
    for sym in text:
        if sym == gs.space_id:
            x += gs.space_width
            prev_glyph = False
            continue
        if prev_glyph:
            x -= gs.join_overlap
        g = gs.glyphs[sym].foreground
        canvas[:, x : x + g.shape[1]] |= g
        x += g.shape[1]
        prev_glyph = True
    if salt_p > 0.0:
        rng = np.random.default_rng(seed)
        canvas |= rng.random(canvas.shape) < salt_p
    return BinaryImage(canvas), list(text)


def random_line_text(gs: GlyphSet, rng: np.random.Generator,
                     min_len: int, max_len: int) -> list[int]:
    """Random symbol sequence of the given length range: non-diacritic
    glyphs with single spaces sprinkled between them."""
    n = int(rng.integers(min_len, max_len + 1))
    base = gs.non_diacritics()
    out: list[int] = []
    while len(out) < n:
        if out and out[-1] != gs.space_id and len(out) < n - 1 and rng.random() < 0.18:
            out.append(gs.space_id)
        else:
            out.append(int(rng.choice(base)))
    return out


# --- demo atlas -----------------------------------------------------------------

def _demo_glyph(height: int, width: int, kind: int) -> np.ndarray:
    g = np.zeros((height, width), dtype=bool)
    if kind == 0:       # solid block
        g[1:-1, 1:-1] = True
    elif kind == 1:     # left bar with top arm
        g[:, 0:2] = True
        g[0:2, :] = True
    elif kind == 2:     # right bar with bottom arm
        g[:, -2:] = True
        g[-2:, :] = True
    elif kind == 3:     # X
        for y in range(height):
            x = int(round(y * (width - 1) / (height - 1)))
            g[y, x] = True
            g[y, width - 1 - x] = True
            g[y, max(0, x - 1)] = True
            g[y, min(width - 1, width - x)] = True
    elif kind == 4:     # ring
        g[0:2, :] = True
        g[-2:, :] = True
        g[:, 0:2] = True
        g[:, -2:] = True
    elif kind == 5:     # middle dash
        mid = height // 2
        g[mid - 1 : mid + 1, :] = True
    elif kind == 6:     # T
        g[0:2, :] = True
        c = width // 2
        g[:, c - 1 : c + 1] = True
    elif kind == 7:     # U
        g[:, 0:2] = True
        g[:, -2:] = True
        g[-2:, :] = True
    elif kind == 8:     # comb
        g[-2:, :] = True
        g[::3, :] = True
    else:
        raise ValueError(f"no demo glyph kind {kind}")
    return g


DEMO_CHARS = "abcdefghi"


def make_demo_glyph_set(count: int = 9, height: int = 12, width: int = 8,
                        join_overlap: int = 1) -> GlyphSet:
    """Procedural stand-in for a real font: `count` distinct glyphs plus a
    trailing space symbol."""
    if not 1 <= count <= 9:
        raise ValueError("demo atlas supports 1..9 glyphs")
    glyphs = {
        i + 1: BinaryImage(_demo_glyph(height, width, i)) for i in range(count)
    }
    return GlyphSet(
        glyphs=glyphs,
        groups={i + 1: "letter" for i in range(count)},
        chars={**{i + 1: DEMO_CHARS[i] for i in range(count)}, count + 1: " "},
        join_overlap=join_overlap,
        space_id=count + 1,
        space_width=max(1, height // 3),
    )


# --- atlas and manifest files -----------------------------------------------------

def save_atlas(directory, gs: GlyphSet) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "height": gs.height,
        "join_overlap": gs.join_overlap,
        "space_id": gs.space_id,
        "space_width": gs.space_width,
        "glyphs": [
            {
                "id": gid,
                "char": gs.chars.get(gid, "?"),
                "group": gs.groups.get(gid, "letter"),
                "file": f"{gid}.pgm",
            }
            for gid in sorted(gs.glyphs)
        ],
        "space_char": gs.chars.get(gs.space_id, " "),
    }
    for gid, img in gs.glyphs.items():
        save_pgm(d / f"{gid}.pgm", img)
    (d / "atlas.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_atlas(directory) -> GlyphSet:
    d = Path(directory)
    meta = json.loads((d / "atlas.json").read_text())
    glyphs = {}
    groups = {}
    chars = {}
    for rec in meta["glyphs"]:
        gray = load_image(d / rec["file"])
        glyphs[rec["id"]] = BinaryImage(gray.pixels > 127)
        groups[rec["id"]] = rec["group"]
        chars[rec["id"]] = rec["char"]
    chars[meta["space_id"]] = meta.get("space_char", " ")
    return GlyphSet(
        glyphs=glyphs,
        groups=groups,
        chars=chars,
        join_overlap=meta["join_overlap"],
        space_id=meta["space_id"],
        space_width=meta["space_width"],
    )


def write_manifest(path, records) -> None:
    """records: iterable of {image_path, label_ids, seed}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
