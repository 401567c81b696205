"""Pretrained term vectors and their propagation over the seed tree.

The table is a frozen surface-to-vector map read from disk. Anchor
terms get a propagated representation: project every member of the
node's one-hop ego network (itself, its parent, its children), add a
trainable embedding for the member's role relative to the node, then
combine with attention weights. Query terms sit outside the tree and
use their raw table vector.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .autodiff import Parameter, Tensor, concat
from .errors import EmbeddingError
from .taxonomy import MiniPath, Taxonomy, normalize_surface

log = logging.getLogger(__name__)

ROLES = ("self", "parent", "child")
OOV_POLICIES = ("zero", "mean")


class EmbeddingTable:
    def __init__(self, vectors: dict[str, np.ndarray], dim: int, oov_policy: str = "zero"):
        if oov_policy not in OOV_POLICIES:
            raise ValueError(f"oov_policy must be one of {OOV_POLICIES}")
        self._vectors = vectors
        self.dim = dim
        self.oov_policy = oov_policy
        self._fallback: np.ndarray | None = None

    @classmethod
    def load(cls, path: str | Path, oov_policy: str = "zero") -> "EmbeddingTable":
        """Parse `term<TAB>v1 v2 ... vD` lines; all rows must share D."""
        path = Path(path)
        vectors: dict[str, np.ndarray] = {}
        dim = None
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise EmbeddingError(
                        f"{path.name}: line {lineno}: expected 'term<TAB>v1 v2 ...'"
                    )
                term = normalize_surface(fields[0])
                try:
                    vec = np.array([float(v) for v in fields[1].split()], dtype=np.float64)
                except ValueError as exc:
                    raise EmbeddingError(
                        f"{path.name}: line {lineno}: non-numeric vector entry"
                    ) from exc
                if vec.size == 0:
                    raise EmbeddingError(f"{path.name}: line {lineno}: empty vector")
                if not np.all(np.isfinite(vec)):
                    raise EmbeddingError(f"{path.name}: line {lineno}: non-finite entry")
                if dim is None:
                    dim = vec.size
                elif vec.size != dim:
                    raise EmbeddingError(
                        f"{path.name}: line {lineno}: dimension {vec.size} != {dim}"
                    )
                if term in vectors:
                    log.warning("%s: line %d: duplicate term %r, last wins", path.name, lineno, term)
                vectors[term] = vec
        if dim is None:
            raise EmbeddingError(f"{path.name}: no embedding rows")
        return cls(vectors, dim, oov_policy)

    @classmethod
    def from_dict(cls, vectors: dict[str, np.ndarray], oov_policy: str = "zero") -> "EmbeddingTable":
        dims = {v.size for v in vectors.values()}
        if len(dims) != 1:
            raise EmbeddingError("inconsistent embedding dimensions")
        (dim,) = dims
        return cls(
            {normalize_surface(k): np.asarray(v, dtype=np.float64) for k, v in vectors.items()},
            dim,
            oov_policy,
        )

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, surface: str) -> bool:
        return normalize_surface(surface) in self._vectors

    def vector(self, surface: str) -> np.ndarray:
        vec = self._vectors.get(normalize_surface(surface))
        if vec is not None:
            return vec
        if self._fallback is None:
            if self.oov_policy == "zero" or not self._vectors:
                self._fallback = np.zeros(self.dim)
            else:
                self._fallback = np.mean(list(self._vectors.values()), axis=0)
        return self._fallback


class GatParams:
    """Projection, attention vector and role embeddings for propagation."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, leaky_slope: float = 0.2):
        scale = np.sqrt(6.0 / (in_dim + out_dim))
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.leaky_slope = leaky_slope
        self.projection = Parameter(
            "gat.projection", rng.uniform(-scale, scale, size=(in_dim, out_dim))
        )
        self.attention = Parameter(
            "gat.attention", rng.uniform(-scale, scale, size=(out_dim, 1))
        )
        self.role_table = Parameter(
            "gat.role_table", rng.normal(0.0, 0.1, size=(len(ROLES), out_dim)), decay=False
        )

    def parameters(self) -> list[Parameter]:
        return [self.projection, self.attention, self.role_table]


def ego_network(taxonomy: Taxonomy, node: int) -> list[tuple[int, int]]:
    """(member id, role index) pairs: self, then parent, then children by id."""
    members = [(node, ROLES.index("self"))]
    parent = taxonomy.parent(node)
    if parent is not None:
        members.append((parent, ROLES.index("parent")))
    for child in sorted(taxonomy.children(node)):
        members.append((child, ROLES.index("child")))
    return members


def propagate(
    params: GatParams,
    taxonomy: Taxonomy,
    table: EmbeddingTable,
    node: int,
    cache: dict[int, Tensor] | None = None,
) -> Tensor:
    """Attention-pooled ego-network representation, shape (1, out_dim)."""
    if cache is not None and node in cache:
        return cache[node]
    members = ego_network(taxonomy, node)
    inputs = np.stack([table.vector(taxonomy.surface(tid)) for tid, _ in members])
    roles = [role for _, role in members]
    projected = Tensor(inputs) @ params.projection + params.role_table.take_rows(roles)
    scores = (projected @ params.attention).leaky_relu(params.leaky_slope)  # (k, 1)
    weights = scores.transpose().softmax(axis=-1)  # (1, k)
    out = weights @ projected
    if cache is not None:
        cache[node] = out
    return out


def distributed_bundle(
    params: GatParams,
    taxonomy: Taxonomy,
    table: EmbeddingTable,
    query: str,
    path: MiniPath,
    cache: dict[int, Tensor] | None = None,
) -> Tensor:
    """Raw query vector next to propagated anchors, shape (1, D + L*D')."""
    blocks = [Tensor(table.vector(query)[None, :])]
    for node in path.node_ids:
        blocks.append(propagate(params, taxonomy, table, node, cache))
    return concat(blocks, axis=1)
