"""Self-supervised training instances harvested from the seed taxonomy.

Positives: for each mini-path and each anchor position, every child of
that anchor that is not itself on the path, labeled with the position
(1-based). Negatives: label L+1 ("attaches nowhere on this path"),
drawn with replacement by picking a path uniformly from the positives'
path multiset and then a query uniformly from that path's eligible
pool. Eligibility excludes the path nodes, every child of a path node,
and the root, so a negative can never be a disguised positive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SamplingError
from .seeding import derive_rng
from .taxonomy import MiniPath, Taxonomy

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingInstance:
    query_id: int
    path: MiniPath
    label: int  # 1..L+1, where L+1 means "not attached here"


@dataclass(frozen=True)
class SamplerConfig:
    path_length: int = 3
    negative_ratio: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.path_length < 1:
            raise ValueError("path_length must be at least 1")
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be at least 1")


def generate_positives(taxonomy: Taxonomy, paths: Sequence[MiniPath]) -> list[TrainingInstance]:
    out: list[TrainingInstance] = []
    for path in paths:
        members = set(path.node_ids)
        for position, anchor in enumerate(path.node_ids, start=1):
            for child in taxonomy.children(anchor):
                if child in members:
                    continue
                out.append(TrainingInstance(child, path, position))
    return out


def eligible_negative_pool(taxonomy: Taxonomy, path: MiniPath) -> list[int]:
    """Term ids a negative query may be drawn from for this path, ascending."""
    banned = set(path.node_ids)
    banned.add(taxonomy.root)
    for anchor in path.node_ids:
        banned.update(taxonomy.children(anchor))
    return [tid for tid in taxonomy.term_ids() if tid not in banned]


def generate_negatives(
    taxonomy: Taxonomy,
    positives: Sequence[TrainingInstance],
    cfg: SamplerConfig,
) -> list[TrainingInstance]:
    if not positives:
        raise SamplingError("no positive instances to draw negatives for")
    pools: dict[MiniPath, list[int]] = {}
    for inst in positives:
        if inst.path not in pools:
            pools[inst.path] = eligible_negative_pool(taxonomy, inst.path)
    if all(not pool for pool in pools.values()):
        raise SamplingError("taxonomy too small for negative sampling")

    rng = derive_rng(cfg.rng_seed, "negatives")
    path_choices = [inst.path for inst in positives]
    out: list[TrainingInstance] = []
    for _ in range(cfg.negative_ratio * len(positives)):
        while True:
            path = path_choices[int(rng.integers(len(path_choices)))]
            pool = pools[path]
            if pool:
                break
        query = pool[int(rng.integers(len(pool)))]
        out.append(TrainingInstance(query, path, path.length + 1))
    return out


def build_training_set(taxonomy: Taxonomy, cfg: SamplerConfig, max_paths: int = 0) -> list[TrainingInstance]:
    """Positives plus negatives, shuffled reproducibly under cfg.rng_seed."""
    paths = taxonomy.enumerate_minipaths(cfg.path_length, max_paths=max_paths, seed=cfg.rng_seed)
    positives = generate_positives(taxonomy, paths)
    if not positives:
        raise SamplingError(
            "no positive instances: no mini-path of length "
            f"{cfg.path_length} has an attachable child"
        )
    negatives = generate_negatives(taxonomy, positives, cfg)
    combined = positives + negatives
    rng = derive_rng(cfg.rng_seed, "instance-shuffle")
    order = rng.permutation(len(combined))
    return [combined[i] for i in order]


def validate_instance(taxonomy: Taxonomy, inst: TrainingInstance) -> None:
    """Re-derive the label claim from the taxonomy alone; raises on any lie."""
    path = inst.path
    if not path.is_chain(taxonomy):
        raise ValueError(f"path {path.node_ids} is not a parent-child chain")
    if not 1 <= inst.label <= path.length + 1:
        raise ValueError(f"label {inst.label} outside 1..{path.length + 1}")
    if inst.label <= path.length:
        anchor = path.node_ids[inst.label - 1]
        if taxonomy.parent(inst.query_id) != anchor:
            raise ValueError(
                f"label {inst.label} claims {taxonomy.surface(anchor)!r} is the "
                f"parent of {taxonomy.surface(inst.query_id)!r}, but it is not"
            )
    else:
        if inst.query_id in path.node_ids:
            raise ValueError("negative query lies on its own path")
        if taxonomy.parent(inst.query_id) in path.node_ids:
            raise ValueError("negative query is a child of a path anchor")


def dump_instances(
    taxonomy: Taxonomy, instances: Iterable[TrainingInstance], path: str | Path
) -> None:
    """Audit dump, one line per instance: query TAB p_1,...,p_L TAB label."""
    lines = []
    for inst in instances:
        anchors = ",".join(taxonomy.display(tid) for tid in inst.path.node_ids)
        lines.append(f"{taxonomy.display(inst.query_id)}\t{anchors}\t{inst.label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
