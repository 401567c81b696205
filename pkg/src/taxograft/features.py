"""Shared read-only inputs for feature assembly across the three views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .context import DepPathStore
from .embeddings import EmbeddingTable
from .lexsyn import FEATURES_PER_PAIR, PairFrequencyTable, lexsyn_bundle
from .taxonomy import MiniPath, Taxonomy


@dataclass(frozen=True)
class FeatureBundle:
    """One batch of per-view inputs, all shaped (batch, view width)."""

    distributed: Tensor
    context: Tensor
    lexsyn: Tensor

    @property
    def batch_size(self) -> int:
        return self.distributed.shape[0]


class FeatureContext:
    """Everything the views read: tree, vectors, paths, pair counts."""

    def __init__(
        self,
        taxonomy: Taxonomy,
        embeddings: EmbeddingTable,
        dep_store: DepPathStore,
        freq_table: PairFrequencyTable,
        suffix_k: int = 3,
    ):
        self.taxonomy = taxonomy
        self.embeddings = embeddings
        self.dep_store = dep_store
        self.freq_table = freq_table
        self.suffix_k = suffix_k
        self._lexsyn_cache: dict[tuple[str, tuple[int, ...]], np.ndarray] = {}

    def path_surfaces(self, path: MiniPath) -> list[str]:
        return [self.taxonomy.surface(tid) for tid in path.node_ids]

    def lexsyn_vector(self, query: str, path: MiniPath) -> np.ndarray:
        key = (query, path.node_ids)
        cached = self._lexsyn_cache.get(key)
        if cached is None:
            cached = lexsyn_bundle(query, self.path_surfaces(path), self.freq_table, self.suffix_k)
            self._lexsyn_cache[key] = cached
        return cached

    def view_widths(self, path_length: int, propagated_dim: int, hidden_dim: int) -> tuple[int, int, int]:
        return (
            self.embeddings.dim + path_length * propagated_dim,
            path_length * hidden_dim,
            path_length * FEATURES_PER_PAIR,
        )
