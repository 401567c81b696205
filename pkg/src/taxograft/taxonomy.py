"""Rooted is-a taxonomy: loading, structural queries, mini-path enumeration.

The on-disk format is one edge per line, parent TAB child, with blank
lines and '#' comments ignored. Surfaces are case-folded and have
internal whitespace collapsed before interning, so "Sea  Bass" and
"sea bass" are the same term. The loader tolerates two artifact row
kinds seen in real resources, self loops and extra parents for an
already-attached child, by dropping them with a warning; an exactly
duplicated edge row is treated as a corrupt file and rejected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import TaxonomyError

log = logging.getLogger(__name__)


def normalize_surface(text: str) -> str:
    """Case-fold and collapse runs of whitespace to single spaces."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True, order=True)
class MiniPath:
    """A top-down chain of term ids; consecutive entries are parent, child."""

    node_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.node_ids:
            raise ValueError("a mini-path needs at least one node")

    @property
    def length(self) -> int:
        return len(self.node_ids)

    def is_chain(self, taxonomy: "Taxonomy") -> bool:
        return all(
            taxonomy.parent(child) == parent
            for parent, child in zip(self.node_ids, self.node_ids[1:])
        )


class Taxonomy:
    """Immutable rooted tree over interned terms.

    Term ids are dense ints in file order of first mention. Every
    structural query (parent, children, depth, ancestors, lca) is O(1)
    or O(depth) off precomputed arrays.
    """

    def __init__(
        self,
        surfaces: list[str],
        displays: list[str],
        parent: list[int | None],
        children: list[list[int]],
        edges: list[tuple[int, int]],
        source: str = "<edges>",
    ):
        self._surfaces = surfaces
        self._displays = displays
        self._parent = parent
        self._children = children
        self._edges = edges
        self._source = source
        self._index = {s: i for i, s in enumerate(surfaces)}

        roots = [i for i, p in enumerate(parent) if p is None]
        if not roots:
            raise TaxonomyError(f"{source}: cycle detected, no root term remains")
        if len(roots) > 1:
            names = ", ".join(repr(displays[r]) for r in roots)
            isolated = [r for r in roots if not children[r]]
            if isolated and len(roots) - len(isolated) == 1:
                raise TaxonomyError(f"{source}: orphan terms not connected to the tree: {names}")
            raise TaxonomyError(f"{source}: multiple roots: {names}")
        self._root = roots[0]

        self._depth = [0] * len(surfaces)
        self._depth[self._root] = 1
        queue = [self._root]
        reached = 1
        while queue:
            nxt: list[int] = []
            for node in queue:
                for child in children[node]:
                    self._depth[child] = self._depth[node] + 1
                    reached += 1
                    nxt.append(child)
            queue = nxt
        if reached != len(surfaces):
            stranded = [displays[i] for i in range(len(surfaces)) if self._depth[i] == 0]
            raise TaxonomyError(
                f"{source}: cycle detected among terms unreachable from the root: "
                + ", ".join(map(repr, stranded[:5]))
            )

    # ---- construction ------------------------------------------------------

    @classmethod
    def from_edges(cls, rows: Iterable[tuple[str, str]], source: str = "<edges>") -> "Taxonomy":
        surfaces: list[str] = []
        displays: list[str] = []
        index: dict[str, int] = {}
        parent: list[int | None] = []
        children: list[list[int]] = []
        edges: list[tuple[int, int]] = []
        seen_rows: set[tuple[int, int]] = set()

        def intern(raw: str) -> int:
            key = normalize_surface(raw)
            if not key:
                raise TaxonomyError(f"{source}: empty term surface")
            if key not in index:
                index[key] = len(surfaces)
                surfaces.append(key)
                displays.append(" ".join(raw.split()))
                parent.append(None)
                children.append([])
            return index[key]

        for raw_parent, raw_child in rows:
            p = intern(raw_parent)
            c = intern(raw_child)
            if p == c:
                log.warning("%s: dropping self-referential edge %r", source, displays[p])
                continue
            if (p, c) in seen_rows:
                raise TaxonomyError(
                    f"{source}: duplicate edge row {displays[p]!r} -> {displays[c]!r}"
                )
            seen_rows.add((p, c))
            if parent[c] is not None:
                log.warning(
                    "%s: dropping extra parent %r for %r, keeping %r",
                    source,
                    displays[p],
                    displays[c],
                    displays[parent[c]],
                )
                continue
            parent[c] = p
            children[p].append(c)
            edges.append((p, c))

        if not surfaces:
            raise TaxonomyError(f"{source}: no edges found")
        return cls(surfaces, displays, parent, children, edges, source)

    @classmethod
    def load(cls, path: str | Path) -> "Taxonomy":
        path = Path(path)
        rows: list[tuple[str, str]] = []
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise TaxonomyError(
                        f"{path.name}: line {lineno}: expected 'parent<TAB>child', got {line!r}"
                    )
                rows.append((fields[0], fields[1]))
        return cls.from_edges(rows, source=path.name)

    # ---- basic queries -----------------------------------------------------

    def __len__(self) -> int:
        return len(self._surfaces)

    @property
    def num_terms(self) -> int:
        return len(self._surfaces)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    @property
    def root(self) -> int:
        return self._root

    def term_ids(self) -> range:
        return range(len(self._surfaces))

    def _check(self, term_id: int) -> int:
        if not 0 <= term_id < len(self._surfaces):
            raise TaxonomyError(f"unknown term id {term_id}")
        return term_id

    def surface(self, term_id: int) -> str:
        return self._surfaces[self._check(term_id)]

    def display(self, term_id: int) -> str:
        return self._displays[self._check(term_id)]

    def lookup(self, surface: str) -> int | None:
        return self._index.get(normalize_surface(surface))

    def id_of(self, surface: str) -> int:
        tid = self.lookup(surface)
        if tid is None:
            raise TaxonomyError(f"unknown term {surface!r}")
        return tid

    def parent(self, term_id: int) -> int | None:
        return self._parent[self._check(term_id)]

    def children(self, term_id: int) -> tuple[int, ...]:
        return tuple(self._children[self._check(term_id)])

    def is_edge(self, parent_id: int, child_id: int) -> bool:
        return self._parent[self._check(child_id)] == self._check(parent_id)

    def depth(self, term_id: int) -> int:
        """Depth of a term, with the root at depth 1."""
        return self._depth[self._check(term_id)]

    def height(self) -> int:
        return max(self._depth)

    def ancestors(self, term_id: int) -> list[int]:
        """Path from the root down to and including the term."""
        node: int | None = self._check(term_id)
        chain: list[int] = []
        while node is not None:
            chain.append(node)
            node = self._parent[node]
        chain.reverse()
        return chain

    def lca(self, a: int, b: int) -> int:
        a, b = self._check(a), self._check(b)
        while self._depth[a] > self._depth[b]:
            a = self._parent[a]  # type: ignore[assignment]
        while self._depth[b] > self._depth[a]:
            b = self._parent[b]  # type: ignore[assignment]
        while a != b:
            a = self._parent[a]  # type: ignore[assignment]
            b = self._parent[b]  # type: ignore[assignment]
        return a

    # ---- serialization -----------------------------------------------------

    def edges(self) -> Iterator[tuple[int, int]]:
        return iter(self._edges)

    def edge_lines(self) -> list[str]:
        return [f"{self._displays[p]}\t{self._displays[c]}" for p, c in self._edges]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.edge_lines()) + "\n", encoding="utf-8")

    # ---- mini-paths ----------------------------------------------------------

    def enumerate_minipaths(
        self, length: int, max_paths: int = 0, seed: int = 0
    ) -> list[MiniPath]:
        """All top-down chains of exactly `length` terms, sorted by id tuple.

        A chain may start anywhere in the tree. With max_paths > 0 a
        uniform sample without replacement of that size is returned,
        still sorted, drawn reproducibly from `seed`.
        """
        if length < 1:
            raise ValueError("mini-path length must be at least 1")
        found: list[tuple[int, ...]] = []
        for start in range(len(self._surfaces)):
            stack: list[tuple[int, ...]] = [(start,)]
            while stack:
                chain = stack.pop()
                if len(chain) == length:
                    found.append(chain)
                    continue
                for child in self._children[chain[-1]]:
                    stack.append(chain + (child,))
        found.sort()
        if max_paths and len(found) > max_paths:
            rng = np.random.default_rng(seed)
            keep = sorted(rng.choice(len(found), size=max_paths, replace=False))
            found = [found[i] for i in keep]
        return [MiniPath(chain) for chain in found]


def read_term_list(path: str | Path) -> list[str]:
    """One surface per line, '#' comments and blanks skipped, order kept."""
    path = Path(path)
    out: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(line)
    return out


def load_test_pairs(path: str | Path, taxonomy: Taxonomy) -> list[tuple[str, int]]:
    """Evaluation rows: query TAB true_parent, parent must be a known term."""
    path = Path(path)
    pairs: list[tuple[str, int]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise TaxonomyError(
                    f"{path.name}: line {lineno}: expected 'query<TAB>true_parent'"
                )
            query, parent_surface = fields
            parent_id = taxonomy.lookup(parent_surface)
            if parent_id is None:
                raise TaxonomyError(
                    f"{path.name}: line {lineno}: true parent {parent_surface!r} "
                    "is not in the taxonomy"
                )
            pairs.append((normalize_surface(query), parent_id))
    if not pairs:
        raise TaxonomyError(f"{path.name}: no test rows")
    return pairs


def path_surfaces(taxonomy: Taxonomy, path: MiniPath) -> tuple[str, ...]:
    return tuple(taxonomy.surface(tid) for tid in path.node_ids)


def count_minipaths_by_length(taxonomy: Taxonomy, max_length: int) -> dict[int, int]:
    return {
        length: len(taxonomy.enumerate_minipaths(length))
        for length in range(1, max_length + 1)
    }
