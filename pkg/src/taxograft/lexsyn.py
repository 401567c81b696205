"""String-shape and corpus-frequency features for term pairs.

Seven numbers per (query, anchor) pair: three binary string flags, a
normalized longest-common-substring length, a normalized length
difference, a directed co-occurrence frequency contrast, and a
generality contrast from distinct-hyponym counts. A query against an
L-term path concatenates L such blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FrequencyError
from .taxonomy import normalize_surface

FEATURES_PER_PAIR = 7


def lcs_length(x: str, y: str) -> int:
    """Length of the longest contiguous substring common to x and y."""
    if not x or not y:
        return 0
    best = 0
    prev = [0] * (len(y) + 1)
    for cx in x:
        cur = [0] * (len(y) + 1)
        for j, cy in enumerate(y, start=1):
            if cx == cy:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


def lex_flags(x: str, y: str, k: int = 3) -> tuple[int, int, int]:
    """(y ends with x, y contains x, the two k-char suffixes agree).

    The suffix flag is 0 whenever either string is shorter than k.
    """
    if k < 1:
        raise ValueError("suffix length k must be at least 1")
    ends_with = int(bool(x) and y.endswith(x))
    contains = int(bool(x) and x in y)
    suffix_match = int(len(x) >= k and len(y) >= k and x[-k:] == y[-k:])
    return ends_with, contains, suffix_match


def length_diff(x: str, y: str) -> float:
    longest = max(len(x), len(y))
    if longest == 0:
        return 0.0
    return abs(len(x) - len(y)) / longest


class PairFrequencyTable:
    """Directed pair counts from a noisy hypernym-candidate extraction.

    A row (x, y, count) records how often x was seen as a hyponym
    candidate of y. normalized_freq divides by the row-maximum over all
    pairs sharing the same first term, so values land in [0, 1] and are
    invariant to rescaling every count.
    """

    def __init__(self, counts: dict[tuple[str, str], float] | None = None):
        self._counts: dict[tuple[str, str], float] = {}
        self._max_out: dict[str, float] = {}
        self._hyponyms: dict[str, set[str]] = {}
        if counts:
            for (x, y), count in counts.items():
                self.add(x, y, count)

    def add(self, x: str, y: str, count: float) -> None:
        if count < 0:
            raise ValueError("counts must be non-negative")
        x, y = normalize_surface(x), normalize_surface(y)
        self._counts[(x, y)] = self._counts.get((x, y), 0.0) + count
        total = self._counts[(x, y)]
        if total > self._max_out.get(x, 0.0):
            self._max_out[x] = total
        if count > 0:
            self._hyponyms.setdefault(y, set()).add(x)

    @classmethod
    def from_pairs(cls, rows: Iterable[tuple[str, str, float]]) -> "PairFrequencyTable":
        table = cls()
        for x, y, count in rows:
            table.add(x, y, count)
        return table

    @classmethod
    def load(cls, path: str | Path) -> "PairFrequencyTable":
        path = Path(path)
        table = cls()
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise FrequencyError(
                        f"{path.name}: line {lineno}: expected 'x<TAB>y<TAB>count'"
                    )
                try:
                    count = float(fields[2])
                except ValueError as exc:
                    raise FrequencyError(
                        f"{path.name}: line {lineno}: bad count {fields[2]!r}"
                    ) from exc
                if count < 0:
                    raise FrequencyError(f"{path.name}: line {lineno}: negative count")
                table.add(fields[0], fields[1], count)
        return table

    def __len__(self) -> int:
        return len(self._counts)

    def count(self, x: str, y: str) -> float:
        return self._counts.get((normalize_surface(x), normalize_surface(y)), 0.0)

    def normalized_freq(self, x: str, y: str) -> float:
        x, y = normalize_surface(x), normalize_surface(y)
        denom = self._max_out.get(x, 0.0)
        if denom == 0.0:
            return 0.0
        return self._counts.get((x, y), 0.0) / denom

    def hyponym_count(self, term: str) -> int:
        return len(self._hyponyms.get(normalize_surface(term), ()))


def freq_features(table: PairFrequencyTable, x: str, y: str) -> tuple[float, float]:
    """Directed frequency contrast f and generality contrast g for (x, y)."""
    f = table.normalized_freq(x, y) - table.normalized_freq(y, x)
    g = math.log1p(table.hyponym_count(x)) - math.log1p(table.hyponym_count(y))
    return f, g


@dataclass(frozen=True)
class LexSynVector:
    ends_with: int
    contains: int
    suffix_match: int
    lcs_len: int  # raw length, kept for audit
    lcs_norm: float
    length_diff: float
    freq_diff: float
    generality_diff: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.ends_with,
                self.contains,
                self.suffix_match,
                self.lcs_norm,
                self.length_diff,
                self.freq_diff,
                self.generality_diff,
            ],
            dtype=np.float64,
        )


def pair_vector(table: PairFrequencyTable, x: str, y: str, k: int = 3) -> LexSynVector:
    x, y = normalize_surface(x), normalize_surface(y)
    ends, cont, suff = lex_flags(x, y, k)
    lcs = lcs_length(x, y)
    longest = max(len(x), len(y))
    f, g = freq_features(table, x, y)
    return LexSynVector(
        ends_with=ends,
        contains=cont,
        suffix_match=suff,
        lcs_len=lcs,
        lcs_norm=lcs / longest if longest else 0.0,
        length_diff=length_diff(x, y),
        freq_diff=f,
        generality_diff=g,
    )


def lexsyn_bundle(
    query: str, path_terms: Sequence[str], table: PairFrequencyTable, k: int = 3
) -> np.ndarray:
    """Concatenated per-anchor feature blocks, shape (len(path_terms)*7,)."""
    if not path_terms:
        raise ValueError("path_terms must be nonempty")
    blocks = [pair_vector(table, query, anchor, k).as_array() for anchor in path_terms]
    return np.concatenate(blocks)
