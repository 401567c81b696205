"""Dependency-path evidence between term pairs, encoded to fixed vectors.

The store maps a (query, anchor) surface pair to the dependency paths
observed between the two terms in a corpus, each path a sequence of
(lemma, POS tag, dependency label, direction) edges. A single-layer
recurrent encoder turns one path into a hidden vector; attention
pooling averages a pair's paths; pairs with no observed path fall back
to a trainable vector owned by the anchor's slot on the mini-path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Parameter, Tensor, concat
from .errors import DepPathError
from .taxonomy import normalize_surface

log = logging.getLogger(__name__)

OOV_TOKEN = "<unk>"
DIRECTIONS = ("<", ">")


@dataclass(frozen=True)
class DepEdge:
    lemma: int
    pos_tag: int
    dep_label: int
    direction: int  # 0 for '<', 1 for '>'


class DepVocab:
    """Index maps for lemma, POS and dependency-label symbols.

    Index 0 in each map is reserved for unseen symbols, so tables built
    from one file still accept edges mentioning new symbols later.
    """

    def __init__(self, lemmas: list[str], pos_tags: list[str], dep_labels: list[str]):
        for table in (lemmas, pos_tags, dep_labels):
            if not table or table[0] != OOV_TOKEN:
                raise ValueError("symbol tables must start with the OOV token")
        self.lemmas = lemmas
        self.pos_tags = pos_tags
        self.dep_labels = dep_labels
        self._lemma_idx = {s: i for i, s in enumerate(lemmas)}
        self._pos_idx = {s: i for i, s in enumerate(pos_tags)}
        self._dep_idx = {s: i for i, s in enumerate(dep_labels)}

    @classmethod
    def from_symbols(cls, lemmas: set[str], pos_tags: set[str], dep_labels: set[str]) -> "DepVocab":
        return cls(
            [OOV_TOKEN] + sorted(lemmas),
            [OOV_TOKEN] + sorted(pos_tags),
            [OOV_TOKEN] + sorted(dep_labels),
        )

    def encode(self, lemma: str, pos: str, dep: str, direction: str) -> DepEdge:
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
        return DepEdge(
            self._lemma_idx.get(lemma, 0),
            self._pos_idx.get(pos, 0),
            self._dep_idx.get(dep, 0),
            DIRECTIONS.index(direction),
        )

    def sizes(self) -> tuple[int, int, int]:
        return len(self.lemmas), len(self.pos_tags), len(self.dep_labels)

    def to_dict(self) -> dict:
        return {
            "lemmas": self.lemmas,
            "pos_tags": self.pos_tags,
            "dep_labels": self.dep_labels,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DepVocab":
        return cls(
            list(payload["lemmas"]),
            list(payload["pos_tags"]),
            list(payload["dep_labels"]),
        )


def _parse_edge(token: str, where: str) -> tuple[str, str, str, str]:
    fields = token.split("|")
    if len(fields) != 4:
        raise DepPathError(f"{where}: expected 'lemma|pos|dep|dir', got {token!r}")
    lemma, pos, dep, direction = fields
    if direction not in DIRECTIONS:
        raise DepPathError(f"{where}: direction must be '<' or '>', got {direction!r}")
    if not lemma:
        raise DepPathError(f"{where}: empty lemma")
    return lemma, pos, dep, direction


class DepPathStore:
    """(query, anchor) surface pair to its list of dependency paths."""

    def __init__(self, paths: dict[tuple[str, str], list[list[DepEdge]]], vocab: DepVocab):
        self._paths = paths
        self.vocab = vocab

    @classmethod
    def load(cls, path: str | Path, max_len: int = 10) -> "DepPathStore":
        """Parse `query<TAB>anchor<TAB>edge;edge;...` lines.

        Paths longer than max_len keep their first max_len edges; every
        truncation is logged. The symbol vocabularies are the sorted
        distinct symbols of the file, after truncation.
        """
        if max_len < 1:
            raise ValueError("max_len must be at least 1")
        path = Path(path)
        raw: dict[tuple[str, str], list[list[tuple[str, str, str, str]]]] = {}
        truncated = 0
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise DepPathError(
                        f"{path.name}: line {lineno}: expected "
                        "'query<TAB>anchor<TAB>edge;edge;...'"
                    )
                where = f"{path.name}: line {lineno}"
                tokens = [t for t in fields[2].split(";") if t]
                if not tokens:
                    raise DepPathError(f"{where}: empty edge sequence")
                edges = [_parse_edge(t, where) for t in tokens]
                if len(edges) > max_len:
                    edges = edges[:max_len]
                    truncated += 1
                    log.warning("%s: path truncated to %d edges", where, max_len)
                key = (normalize_surface(fields[0]), normalize_surface(fields[1]))
                raw.setdefault(key, []).append(edges)
        if truncated:
            log.warning("%s: truncated %d path(s) to %d edges", path.name, truncated, max_len)

        lemmas: set[str] = set()
        pos_tags: set[str] = set()
        dep_labels: set[str] = set()
        for seqs in raw.values():
            for seq in seqs:
                for lemma, pos, dep, _ in seq:
                    lemmas.add(lemma)
                    pos_tags.add(pos)
                    dep_labels.add(dep)
        vocab = DepVocab.from_symbols(lemmas, pos_tags, dep_labels)
        encoded = {
            key: [[vocab.encode(*edge) for edge in seq] for seq in seqs]
            for key, seqs in raw.items()
        }
        return cls(encoded, vocab)

    @classmethod
    def empty(cls) -> "DepPathStore":
        return cls({}, DepVocab.from_symbols(set(), set(), set()))

    def sequences(self, query: str, anchor: str) -> list[list[DepEdge]]:
        return self._paths.get((normalize_surface(query), normalize_surface(anchor)), [])

    def __len__(self) -> int:
        return len(self._paths)


@dataclass(frozen=True)
class ContextDims:
    lemma: int = 50
    pos: int = 4
    dep: int = 5
    direction: int = 1
    hidden: int = 200
    attention: int = 0  # 0 means "same as hidden"

    @property
    def input_size(self) -> int:
        return self.lemma + self.pos + self.dep + self.direction

    @property
    def attention_size(self) -> int:
        return self.attention or self.hidden


class ContextEncoderParams:
    """Embedding tables, recurrent gate weights, attention, no-path rows.

    Embedding tables and the per-slot no-path rows are flagged decay
    free, matching how the optimizer treats biases.
    """

    def __init__(self, vocab: DepVocab, dims: ContextDims, path_length: int, rng: np.random.Generator):
        n_lemma, n_pos, n_dep = vocab.sizes()
        self.vocab = vocab
        self.dims = dims
        self.path_length = path_length
        d_in, d_h, d_a = dims.input_size, dims.hidden, dims.attention_size

        def table(name: str, rows: int, cols: int) -> Parameter:
            return Parameter(name, rng.normal(0.0, 0.1, size=(rows, cols)), decay=False)

        def glorot(name: str, rows: int, cols: int) -> Parameter:
            scale = np.sqrt(6.0 / (rows + cols))
            return Parameter(name, rng.uniform(-scale, scale, size=(rows, cols)))

        self.lemma_table = table("context.lemma_table", n_lemma, dims.lemma)
        self.pos_table = table("context.pos_table", n_pos, dims.pos)
        self.dep_table = table("context.dep_table", n_dep, dims.dep)
        self.dir_table = table("context.dir_table", len(DIRECTIONS), dims.direction)
        self.gates = {}
        for gate in ("i", "f", "g", "o"):
            self.gates[gate] = (
                glorot(f"context.w_{gate}", d_in, d_h),
                glorot(f"context.u_{gate}", d_h, d_h),
                Parameter(f"context.b_{gate}", np.zeros((1, d_h)), decay=False),
            )
        self.attn_w = glorot("context.attn_w", d_h, d_a)
        self.attn_u = glorot("context.attn_u", d_a, 1)
        self.no_path = table("context.no_path", path_length, d_h)

    def parameters(self) -> list[Parameter]:
        out = [self.lemma_table, self.pos_table, self.dep_table, self.dir_table]
        for gate in ("i", "f", "g", "o"):
            out.extend(self.gates[gate])
        out.extend([self.attn_w, self.attn_u, self.no_path])
        return out


def edge_vector(params: ContextEncoderParams, edge: DepEdge) -> Tensor:
    return concat(
        [
            params.lemma_table.take_rows([edge.lemma]),
            params.pos_table.take_rows([edge.pos_tag]),
            params.dep_table.take_rows([edge.dep_label]),
            params.dir_table.take_rows([edge.direction]),
        ],
        axis=1,
    )


def encode_path(params: ContextEncoderParams, edges: list[DepEdge]) -> Tensor:
    """Final hidden state of the recurrent encoder, shape (1, hidden)."""
    if not edges:
        raise ValueError("cannot encode an empty dependency path")
    d_h = params.dims.hidden
    hidden = Tensor(np.zeros((1, d_h)))
    cell = Tensor(np.zeros((1, d_h)))
    for edge in edges:
        x = edge_vector(params, edge)
        w_i, u_i, b_i = params.gates["i"]
        w_f, u_f, b_f = params.gates["f"]
        w_g, u_g, b_g = params.gates["g"]
        w_o, u_o, b_o = params.gates["o"]
        gate_in = (x @ w_i + hidden @ u_i + b_i).sigmoid()
        gate_forget = (x @ w_f + hidden @ u_f + b_f).sigmoid()
        candidate = (x @ w_g + hidden @ u_g + b_g).tanh()
        gate_out = (x @ w_o + hidden @ u_o + b_o).sigmoid()
        cell = gate_forget * cell + gate_in * candidate
        hidden = gate_out * cell.tanh()
    return hidden


def attend_pool(params: ContextEncoderParams, encodings: list[Tensor]) -> Tensor:
    """Softmax-weighted average of path encodings, shape (1, hidden)."""
    if not encodings:
        raise ValueError("cannot pool an empty encoding list")
    stacked = concat(encodings, axis=0)  # (k, hidden)
    scores = (stacked @ params.attn_w).tanh() @ params.attn_u  # (k, 1)
    weights = scores.transpose().softmax(axis=-1)  # (1, k)
    return weights @ stacked


def pair_block(
    params: ContextEncoderParams,
    store: DepPathStore,
    query: str,
    anchor: str,
    slot: int,
    cache: dict | None = None,
) -> Tensor:
    """Pooled representation for one (query, anchor) pair at a path slot."""
    sequences = store.sequences(query, anchor)
    if not sequences:
        return params.no_path.take_rows([slot])
    key = (normalize_surface(query), normalize_surface(anchor))
    if cache is not None and key in cache:
        return cache[key]
    block = attend_pool(params, [encode_path(params, seq) for seq in sequences])
    if cache is not None:
        cache[key] = block
    return block


def context_bundle(
    params: ContextEncoderParams,
    store: DepPathStore,
    query: str,
    path_terms: list[str],
    cache: dict | None = None,
) -> Tensor:
    """Concatenated per-anchor blocks, shape (1, L*hidden)."""
    if len(path_terms) != params.path_length:
        raise ValueError(
            f"expected {params.path_length} path terms, got {len(path_terms)}"
        )
    blocks = [
        pair_block(params, store, query, anchor, slot, cache)
        for slot, anchor in enumerate(path_terms)
    ]
    return concat(blocks, axis=1)
