"""Parent ranking for query terms and the attachment metrics.

A query is scored against every mini-path; a candidate parent's score
is the mean, over the paths that contain it, of the aggregated
probability at the positions it occupies. Terms on no path (possible
near shallow leaves) are scored through a degenerate path that repeats
the term at every slot, and the ranking notes the fallback. Metrics:
exact-match accuracy, mean reciprocal rank, and Wu-Palmer similarity
between predicted and true parent (root depth 1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .taxonomy import MiniPath, Taxonomy

log = logging.getLogger(__name__)

PathScorer = Callable[[str, MiniPath], np.ndarray]


@dataclass(frozen=True)
class ParentRanking:
    query: str
    entries: tuple[tuple[int, float], ...]  # (term id, score), best first

    @property
    def predicted(self) -> int:
        return self.entries[0][0]

    def rank_of(self, term_id: int) -> int:
        for rank, (tid, _) in enumerate(self.entries, start=1):
            if tid == term_id:
                return rank
        raise ValueError(f"term id {term_id} absent from ranking for {self.query!r}")

    def top(self, k: int) -> list[tuple[int, float]]:
        return list(self.entries[:k])


def score_parents(
    scorer: PathScorer,
    taxonomy: Taxonomy,
    paths: Sequence[MiniPath],
    query: str,
    cover_uncovered: bool = True,
) -> ParentRanking:
    """Rank every candidate parent of `query` over the given paths.

    The per-path probability vectors are accumulated in sorted path
    order, so the result is independent of the enumeration order the
    caller happened to use. Ties are broken by ascending term id.
    """
    if not paths:
        raise ValueError("paths must be nonempty")
    length = paths[0].length
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for path in sorted(paths):
        if path.length != length:
            raise ValueError("all paths must share one length")
        probs = np.asarray(scorer(query, path), dtype=np.float64)
        if probs.shape[0] < length:
            raise ValueError("scorer returned fewer entries than path positions")
        for slot, tid in enumerate(path.node_ids):
            sums[tid] = sums.get(tid, 0.0) + float(probs[slot])
            counts[tid] = counts.get(tid, 0) + 1

    uncovered = [tid for tid in taxonomy.term_ids() if tid not in counts]
    if uncovered:
        if cover_uncovered:
            log.warning(
                "query %r: %d term(s) on no mini-path, scoring each via a "
                "degenerate repeated path",
                query,
                len(uncovered),
            )
            for tid in uncovered:
                probs = np.asarray(
                    scorer(query, MiniPath((tid,) * length)), dtype=np.float64
                )
                sums[tid] = float(np.mean(probs[:length]))
                counts[tid] = 1
        else:
            log.warning(
                "query %r: excluding %d uncovered term(s) from the ranking",
                query,
                len(uncovered),
            )

    scored = [(tid, sums[tid] / counts[tid]) for tid in sums]
    if not all(np.isfinite(score) for _, score in scored):
        raise ValueError(f"non-finite parent score for query {query!r}")
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return ParentRanking(query=query, entries=tuple(scored))


# ---- metrics -----------------------------------------------------------------


def accuracy(predictions: Sequence[int], truths: Sequence[int]) -> float:
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    if not truths:
        raise ValueError("accuracy of an empty test set is undefined")
    hits = sum(1 for p, t in zip(predictions, truths) if p == t)
    return hits / len(truths)


def mrr(rankings: Sequence[ParentRanking], truths: Sequence[int]) -> float:
    if len(rankings) != len(truths):
        raise ValueError("rankings and truths differ in length")
    if not truths:
        raise ValueError("mrr of an empty test set is undefined")
    return float(np.mean([1.0 / r.rank_of(t) for r, t in zip(rankings, truths)]))


def wu_palmer(taxonomy: Taxonomy, a: int, b: int) -> float:
    ancestor = taxonomy.lca(a, b)
    return 2.0 * taxonomy.depth(ancestor) / (taxonomy.depth(a) + taxonomy.depth(b))


# ---- evaluation ----------------------------------------------------------------


@dataclass(frozen=True)
class QueryRecord:
    query: str
    true_parent: int
    predicted_parent: int
    truth_rank: int
    wu_palmer: float


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    mrr: float
    wu_palmer: float
    records: tuple[QueryRecord, ...]


def evaluate(
    scorer: PathScorer,
    taxonomy: Taxonomy,
    paths: Sequence[MiniPath],
    test_pairs: Sequence[tuple[str, int]],
) -> EvalReport:
    if not test_pairs:
        raise ValueError("empty test set")
    rankings = [score_parents(scorer, taxonomy, paths, query) for query, _ in test_pairs]
    truths = [truth for _, truth in test_pairs]
    records = tuple(
        QueryRecord(
            query=query,
            true_parent=truth,
            predicted_parent=ranking.predicted,
            truth_rank=ranking.rank_of(truth),
            wu_palmer=wu_palmer(taxonomy, ranking.predicted, truth),
        )
        for (query, truth), ranking in zip(test_pairs, rankings)
    )
    return EvalReport(
        accuracy=accuracy([r.predicted_parent for r in records], truths),
        mrr=mrr(rankings, truths),
        wu_palmer=float(np.mean([r.wu_palmer for r in records])),
        records=records,
    )


def format_report_text(report: EvalReport, taxonomy: Taxonomy) -> str:
    lines = [
        "attachment evaluation",
        f"  queries:   {len(report.records)}",
        f"  accuracy:  {report.accuracy:.4f}",
        f"  mrr:       {report.mrr:.4f}",
        f"  wu_palmer: {report.wu_palmer:.4f}",
        "",
        "query\ttrue_parent\tpredicted\ttruth_rank\twu_palmer",
    ]
    for rec in report.records:
        lines.append(
            f"{rec.query}\t{taxonomy.display(rec.true_parent)}"
            f"\t{taxonomy.display(rec.predicted_parent)}"
            f"\t{rec.truth_rank}\t{rec.wu_palmer:.4f}"
        )
    return "\n".join(lines) + "\n"


def format_report_kv(report: EvalReport, taxonomy: Taxonomy) -> str:
    """Machine-readable key:value lines, one block per query."""
    lines = [
        f"queries:{len(report.records)}",
        f"accuracy:{report.accuracy!r}",
        f"mrr:{report.mrr!r}",
        f"wu_palmer:{report.wu_palmer!r}",
    ]
    for rec in report.records:
        lines.append(
            f"query:{rec.query}"
            f"\ttrue:{taxonomy.display(rec.true_parent)}"
            f"\tpredicted:{taxonomy.display(rec.predicted_parent)}"
            f"\trank:{rec.truth_rank}"
            f"\twu_palmer:{rec.wu_palmer!r}"
        )
    return "\n".join(lines) + "\n"


def format_rankings(
    rankings: Sequence[ParentRanking], taxonomy: Taxonomy, top_k: int
) -> str:
    """Per-query blocks: `query<TAB>rank<TAB>parent<TAB>score` lines."""
    lines = []
    for ranking in rankings:
        for rank, (tid, score) in enumerate(ranking.top(top_k), start=1):
            lines.append(f"{ranking.query}\t{rank}\t{taxonomy.display(tid)}\t{score!r}")
    return "\n".join(lines) + "\n"
