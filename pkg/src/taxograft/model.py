"""Three view classifiers co-trained against a shared aggregate.

Each view (distributed, context, lexsyn) feeds its feature block to a
one-hidden-layer MLP emitting C = L+1 logits. The aggregate posterior
is the softmax of the mean of the three logit vectors. The objective
combines the aggregate NLL, the per-view NLLs, and a pairwise
consistency penalty on the per-view probabilities; the two auxiliary
terms carry configurable weights. All terms are batch means so the
weights keep their meaning across batch sizes.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import Parameter, Tensor, concat, dropout
from .context import ContextDims, ContextEncoderParams, DepVocab, context_bundle
from .embeddings import GatParams, distributed_bundle
from .errors import TrainingError
from .features import FeatureBundle, FeatureContext
from .lexsyn import FEATURES_PER_PAIR
from .sampling import TrainingInstance
from .seeding import derive_rng
from .taxonomy import MiniPath

log = logging.getLogger(__name__)

VIEWS = ("distributed", "context", "lexsyn")


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to size the parameter tensors."""

    path_length: int = 3
    embed_dim: int = 8
    propagated_dim: int = 0  # 0 means "same as embed_dim"
    classifier_hidden: int = 50
    leaky_slope: float = 0.2
    seed: int = 0
    context: ContextDims = field(default_factory=ContextDims)

    @property
    def classes(self) -> int:
        return self.path_length + 1

    @property
    def propagated(self) -> int:
        return self.propagated_dim or self.embed_dim

    def to_dict(self) -> dict:
        return {
            "path_length": self.path_length,
            "embed_dim": self.embed_dim,
            "propagated_dim": self.propagated_dim,
            "classifier_hidden": self.classifier_hidden,
            "leaky_slope": self.leaky_slope,
            "seed": self.seed,
            "context": {
                "lemma": self.context.lemma,
                "pos": self.context.pos,
                "dep": self.context.dep,
                "direction": self.context.direction,
                "hidden": self.context.hidden,
                "attention": self.context.attention,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelSpec":
        data = dict(payload)
        data["context"] = ContextDims(**data["context"])
        return cls(**data)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 40
    dropout: float = 0.4
    weight_decay: float = 5e-4
    view_loss_weight: float = 0.1
    consistency_weight: float = 0.1
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.view_loss_weight < 0 or self.consistency_weight < 0:
            raise ValueError("loss weights must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "dropout": self.dropout,
            "weight_decay": self.weight_decay,
            "view_loss_weight": self.view_loss_weight,
            "consistency_weight": self.consistency_weight,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


class ViewClassifier:
    def __init__(self, name: str, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator):
        def glorot(suffix: str, rows: int, cols: int) -> Parameter:
            scale = np.sqrt(6.0 / (rows + cols))
            return Parameter(f"{name}.{suffix}", rng.uniform(-scale, scale, size=(rows, cols)))

        self.name = name
        self.in_dim = in_dim
        self.w1 = glorot("w1", in_dim, hidden)
        self.b1 = Parameter(f"{name}.b1", np.zeros((1, hidden)), decay=False)
        self.w2 = glorot("w2", hidden, out_dim)
        self.b2 = Parameter(f"{name}.b2", np.zeros((1, out_dim)), decay=False)

    def logits(self, x: Tensor, drop_rng: np.random.Generator | None = None, rate: float = 0.0) -> Tensor:
        if x.shape[1] != self.in_dim:
            raise ValueError(
                f"{self.name}: input width {x.shape[1]} does not match {self.in_dim}"
            )
        hidden = (x @ self.w1 + self.b1).relu()
        if drop_rng is not None and rate > 0.0:
            hidden = dropout(hidden, rate, drop_rng)
        return hidden @ self.w2 + self.b2

    def parameters(self) -> list[Parameter]:
        return [self.w1, self.b1, self.w2, self.b2]


def aggregate(view_logits: Sequence[Tensor]) -> Tensor:
    """Softmax of the mean of the per-view logit vectors."""
    if len(view_logits) != len(VIEWS):
        raise ValueError(f"expected {len(VIEWS)} logit tensors")
    mean = (view_logits[0] + view_logits[1] + view_logits[2]) * (1.0 / 3.0)
    return mean.softmax(axis=-1)


@dataclass
class LossParts:
    total: Tensor
    agg_nll: float
    view_nll: float
    consistency: float

    @property
    def total_value(self) -> float:
        return self.total.item()

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.total_value)
            and np.isfinite(self.agg_nll)
            and np.isfinite(self.view_nll)
            and np.isfinite(self.consistency)
        )


class CoTrainModel:
    def __init__(self, spec: ModelSpec, vocab: DepVocab):
        self.spec = spec
        rng = derive_rng(spec.seed, "param-init")
        self.gat = GatParams(spec.embed_dim, spec.propagated, rng, spec.leaky_slope)
        self.encoder = ContextEncoderParams(vocab, spec.context, spec.path_length, rng)
        widths = {
            "distributed": spec.embed_dim + spec.path_length * spec.propagated,
            "context": spec.path_length * spec.context.hidden,
            "lexsyn": spec.path_length * FEATURES_PER_PAIR,
        }
        self.classifiers = {
            view: ViewClassifier(f"view.{view}", widths[view], spec.classifier_hidden, spec.classes, rng)
            for view in VIEWS
        }

    @property
    def vocab(self) -> DepVocab:
        return self.encoder.vocab

    def parameters(self) -> list[Parameter]:
        out = self.gat.parameters() + self.encoder.parameters()
        for view in VIEWS:
            out.extend(self.classifiers[view].parameters())
        return out

    # ---- forward ----------------------------------------------------------

    def feature_bundle(
        self,
        ctx: FeatureContext,
        items: Sequence[tuple[str, MiniPath]],
        drop_rng: np.random.Generator | None = None,
        rate: float = 0.0,
    ) -> FeatureBundle:
        """Assemble the three view blocks for a batch of (query, path).

        Propagated anchors and pooled pair vectors are computed once per
        distinct anchor/pair within the batch and shared through the
        graph, so gradients still reach every contributing parameter.
        """
        if not items:
            raise ValueError("empty batch")
        gat_cache: dict[int, Tensor] = {}
        pair_cache: dict = {}
        dist_rows = []
        ctx_rows = []
        lex_rows = []
        for query, path in items:
            if path.length != self.spec.path_length:
                raise ValueError(
                    f"path length {path.length} does not match model "
                    f"length {self.spec.path_length}"
                )
            dist_rows.append(
                distributed_bundle(self.gat, ctx.taxonomy, ctx.embeddings, query, path, gat_cache)
            )
            ctx_rows.append(
                context_bundle(self.encoder, ctx.dep_store, query, ctx.path_surfaces(path), pair_cache)
            )
            lex_rows.append(ctx.lexsyn_vector(query, path))
        context_block = concat(ctx_rows, axis=0)
        if drop_rng is not None and rate > 0.0:
            context_block = dropout(context_block, rate, drop_rng)
        return FeatureBundle(
            distributed=concat(dist_rows, axis=0),
            context=context_block,
            lexsyn=Tensor(np.stack(lex_rows)),
        )

    def forward_views(
        self,
        bundle: FeatureBundle,
        drop_rng: np.random.Generator | None = None,
        rate: float = 0.0,
    ) -> tuple[Tensor, Tensor, Tensor]:
        return (
            self.classifiers["distributed"].logits(bundle.distributed, drop_rng, rate),
            self.classifiers["context"].logits(bundle.context, drop_rng, rate),
            self.classifiers["lexsyn"].logits(bundle.lexsyn, drop_rng, rate),
        )

    def loss(
        self,
        view_logits: tuple[Tensor, Tensor, Tensor],
        labels: np.ndarray,
        view_loss_weight: float,
        consistency_weight: float,
    ) -> LossParts:
        """Aggregate NLL + weighted per-view NLLs + weighted consistency."""
        batch = view_logits[0].shape[0]
        classes = view_logits[0].shape[1]
        labels = np.asarray(labels, dtype=np.intp)
        if labels.shape != (batch,):
            raise ValueError("labels must be one integer per batch row")
        if labels.min() < 1 or labels.max() > classes:
            raise ValueError(f"labels must lie in 1..{classes}")
        one_hot = np.zeros((batch, classes))
        one_hot[np.arange(batch), labels - 1] = 1.0
        hot = Tensor(one_hot)
        inv_batch = 1.0 / batch

        mean_logits = (view_logits[0] + view_logits[1] + view_logits[2]) * (1.0 / 3.0)
        agg_nll = (hot * mean_logits.log_softmax(axis=-1)).sum() * -inv_batch

        view_nll = None
        probs = []
        for logits in view_logits:
            term = (hot * logits.log_softmax(axis=-1)).sum() * -inv_batch
            view_nll = term if view_nll is None else view_nll + term
            probs.append(logits.softmax(axis=-1))
        consistency = (
            (probs[0] - probs[1]).squared_norm()
            + (probs[0] - probs[2]).squared_norm()
            + (probs[1] - probs[2]).squared_norm()
        ) * inv_batch

        total = agg_nll
        if view_loss_weight:
            total = total + view_nll * view_loss_weight
        if consistency_weight:
            total = total + consistency * consistency_weight
        return LossParts(
            total=total,
            agg_nll=agg_nll.item(),
            view_nll=view_nll.item(),
            consistency=consistency.item(),
        )

    # ---- inference ---------------------------------------------------------

    def path_scorer(self, ctx: FeatureContext) -> Callable[[str, MiniPath], np.ndarray]:
        """Frozen-parameter scorer: (query, path) -> aggregated probabilities.

        Propagated anchors and pooled pair vectors are cached across
        calls, so scoring a query set touches each anchor once.
        """
        gat_cache: dict[int, Tensor] = {}
        pair_cache: dict = {}

        def score(query: str, path: MiniPath) -> np.ndarray:
            dist = distributed_bundle(self.gat, ctx.taxonomy, ctx.embeddings, query, path, gat_cache)
            ctxb = context_bundle(self.encoder, ctx.dep_store, query, ctx.path_surfaces(path), pair_cache)
            lex = Tensor(ctx.lexsyn_vector(query, path)[None, :])
            bundle = FeatureBundle(distributed=dist, context=ctxb, lexsyn=lex)
            return aggregate(self.forward_views(bundle)).data[0].copy()

        return score


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    total: float
    agg_nll: float
    view_nll: float
    consistency: float


@dataclass
class TrainResult:
    trace: list[EpochStats]
    rng_states: dict


def format_trace(trace: Sequence[EpochStats]) -> str:
    lines = ["epoch\ttotal\tagg_nll\tview_nll\tconsistency"]
    for row in trace:
        lines.append(
            f"{row.epoch}\t{row.total!r}\t{row.agg_nll!r}\t{row.view_nll!r}\t{row.consistency!r}"
        )
    return "\n".join(lines) + "\n"


def train(
    model: CoTrainModel,
    ctx: FeatureContext,
    instances: Sequence[TrainingInstance],
    cfg: TrainConfig,
) -> TrainResult:
    """Mini-batched Adam over the co-training objective."""
    if not instances:
        raise ValueError("no training instances")
    from .optim import Adam

    params = model.parameters()
    optimizer = Adam(
        params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    shuffle_rng = derive_rng(cfg.seed, "epoch-shuffle")
    drop_rng = derive_rng(cfg.seed, "dropout")
    items = [
        (ctx.taxonomy.surface(inst.query_id), inst.path) for inst in instances
    ]
    labels = np.array([inst.label for inst in instances], dtype=np.intp)

    trace: list[EpochStats] = []
    count = len(instances)
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = shuffle_rng.permutation(count)
        sums = np.zeros(4)
        for lo in range(0, count, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            batch_items = [items[i] for i in batch]
            bundle = model.feature_bundle(ctx, batch_items, drop_rng, cfg.dropout)
            views = model.forward_views(bundle, drop_rng, cfg.dropout)
            parts = model.loss(views, labels[batch], cfg.view_loss_weight, cfg.consistency_weight)
            if not parts.is_finite():
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch starting {lo}: "
                    f"total={parts.total_value} agg={parts.agg_nll} "
                    f"views={parts.view_nll} consistency={parts.consistency}"
                )
            optimizer.zero_grad()
            parts.total.backward()
            optimizer.step()
            sums += len(batch) * np.array(
                [parts.total_value, parts.agg_nll, parts.view_nll, parts.consistency]
            )
        means = sums / count
        trace.append(EpochStats(epoch, *(float(m) for m in means)))
        if any(not np.all(np.isfinite(p.data)) for p in params):
            raise TrainingError(f"non-finite parameter after epoch {epoch}")
        log.info(
            "epoch %d/%d: total %.6f agg %.6f (%.2fs)",
            epoch,
            cfg.epochs,
            means[0],
            means[1],
            time.perf_counter() - started,
        )
    rng_states = {
        "epoch_shuffle": shuffle_rng.bit_generator.state,
        "dropout": drop_rng.bit_generator.state,
    }
    return TrainResult(trace=trace, rng_states=rng_states)
