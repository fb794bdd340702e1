"""Edit-distance scoring with configurable codepoint equivalence.

Validation against reference text can report false errors when visually
identical glyphs carry different codes (two Unicode digit systems share
shapes, for example); an equivalence map folds such classes together
before symbols are compared.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class EquivalenceMap:
    """Partition of symbols into equivalence classes; unlisted symbols
    are singletons."""

    canonical: dict = field(default_factory=dict)  # symbol -> class representative

    @staticmethod
    def identity() -> "EquivalenceMap":
        return EquivalenceMap({})

    @staticmethod
    def from_classes(classes) -> "EquivalenceMap":
        canonical = {}
        for cls in classes:
            cls = list(cls)
            rep = cls[0]
            for sym in cls:
                if sym in canonical:
                    raise ValueError(f"symbol {sym!r} in more than one class")
                canonical[sym] = rep
        return EquivalenceMap(canonical)

    def key(self, sym):
        return self.canonical.get(sym, sym)

    def same(self, a, b) -> bool:
        return self.key(a) == self.key(b)


def load_equivalence(path) -> EquivalenceMap:
    doc = json.loads(Path(path).read_text())
    return EquivalenceMap.from_classes(doc["classes"])


def edit_distance(ref, hyp, eq: EquivalenceMap | None = None) -> int:
    """Minimal number of single-symbol deletions, insertions and
    substitutions turning ref into hyp; symbols compare equal when the
    equivalence map puts them in one class."""
    eq = eq or EquivalenceMap.identity()
    a = [eq.key(s) for s in ref]
    b = [eq.key(s) for s in hyp]
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, sb in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (sa != sb),
            )
        prev = cur
    return prev[len(b)]


def cer(refs, hyps, eq: EquivalenceMap | None = None) -> float:
    """Total edit distance over total reference length; accuracy = 1 - cer."""
    refs = list(refs)
    hyps = list(hyps)
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    total_len = sum(len(r) for r in refs)
    if total_len == 0:
        raise ValueError("empty reference set")
    total_dist = sum(edit_distance(r, h, eq) for r, h in zip(refs, hyps))
    return total_dist / total_len
