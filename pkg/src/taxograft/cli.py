"""Command-line entry point: sample-paths, train, expand, eval.

Every command takes --config, --out and an optional --seed override,
resolves defaults, echoes the effective configuration into the output
directory, and writes delimited text artifacts plus rendered figures.
Exit codes: 0 success, 1 internal failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, write_config
from .context import DepPathStore
from .embeddings import EmbeddingTable
from .errors import CheckpointError, InputError
from .features import FeatureContext
from .inference import (
    evaluate,
    format_rankings,
    format_report_kv,
    format_report_text,
    score_parents,
)
from .lexsyn import PairFrequencyTable
from .model import CoTrainModel, format_trace, train
from .plots import save_eval_summary, save_loss_curves, save_path_counts
from .sampling import build_training_set, dump_instances
from .taxonomy import (
    Taxonomy,
    count_minipaths_by_length,
    load_test_pairs,
    read_term_list,
)

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxograft",
        description="Attach new terms to a seed taxonomy by ranking candidate parents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")

    p = sub.add_parser("sample-paths", help="enumerate mini-paths and write counts")
    common(p)
    p.set_defaults(func=cmd_sample_paths)

    p = sub.add_parser("train", help="build the training set and fit the model")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("expand", help="rank candidate parents for new terms")
    common(p)
    p.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    p.add_argument("--top-k", type=int, default=None, help="parents to list per query")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("eval", help="score a test set and report metrics")
    common(p)
    p.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    p.set_defaults(func=cmd_eval)
    return parser


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _feature_context(cfg: RunConfig, taxonomy: Taxonomy) -> tuple[FeatureContext, EmbeddingTable, DepPathStore]:
    table = EmbeddingTable.load(cfg.embeddings, cfg.oov_policy)
    store = DepPathStore.load(cfg.dep_paths, cfg.max_dep_len) if cfg.dep_paths else DepPathStore.empty()
    freq = PairFrequencyTable.load(cfg.frequencies) if cfg.frequencies else PairFrequencyTable()
    ctx = FeatureContext(taxonomy, table, store, freq, cfg.suffix_k)
    return ctx, table, store


def _checked_model(checkpoint: str, cfg: RunConfig, table: EmbeddingTable, store: DepPathStore) -> CoTrainModel:
    model, _ = load_checkpoint(checkpoint)
    if model.spec.embed_dim != table.dim:
        raise CheckpointError(
            f"checkpoint expects {model.spec.embed_dim}-dim embeddings, "
            f"file provides {table.dim}"
        )
    if model.spec.path_length != cfg.path_length:
        raise CheckpointError(
            f"checkpoint was trained with path_length {model.spec.path_length}, "
            f"config says {cfg.path_length}"
        )
    if model.vocab.to_dict() != store.vocab.to_dict():
        raise CheckpointError(
            "dependency-path vocabulary does not match the checkpoint; "
            "use the dep_paths file the model was trained with"
        )
    return model


def cmd_sample_paths(args) -> None:
    cfg = load_config(args.config, args.seed)
    cfg.require("edges")
    out = _out_dir(args)
    taxonomy = Taxonomy.load(cfg.edges)
    paths = taxonomy.enumerate_minipaths(cfg.path_length, cfg.max_paths, cfg.seed)
    counts = count_minipaths_by_length(taxonomy, max(4, cfg.path_length))

    path_lines = [
        ",".join(taxonomy.display(tid) for tid in path.node_ids) for path in paths
    ]
    (out / "paths.tsv").write_text(
        ("\n".join(path_lines) + "\n") if path_lines else "", encoding="utf-8"
    )
    count_lines = [
        f"# terms: {taxonomy.num_terms}",
        f"# edges: {taxonomy.num_edges}",
        f"# height: {taxonomy.height()}",
    ]
    count_lines += [f"{length}\t{count}" for length, count in sorted(counts.items())]
    (out / "path_counts.tsv").write_text("\n".join(count_lines) + "\n", encoding="utf-8")
    save_path_counts(counts, out / "path_counts.png")
    write_config(cfg, out / "config_effective.cfg")

    print(f"taxonomy: {taxonomy.num_terms} terms, {taxonomy.num_edges} edges, height {taxonomy.height()}")
    for length, count in sorted(counts.items()):
        print(f"mini-paths of length {length}: {count}")
    print(f"wrote {len(paths)} paths of length {cfg.path_length} to {out / 'paths.tsv'}")


def cmd_train(args) -> None:
    cfg = load_config(args.config, args.seed)
    cfg.require("edges", "embeddings")
    out = _out_dir(args)
    taxonomy = Taxonomy.load(cfg.edges)
    ctx, table, store = _feature_context(cfg, taxonomy)

    instances = build_training_set(taxonomy, cfg.sampler_config(), cfg.max_paths)
    dump_instances(taxonomy, instances, out / "training_instances.tsv")
    model = CoTrainModel(cfg.model_spec(table.dim), store.vocab)
    result = train(model, ctx, instances, cfg.train)

    (out / "loss_trace.tsv").write_text(format_trace(result.trace), encoding="utf-8")
    save_checkpoint(
        out / "model.ckpt",
        model,
        extra={"train": cfg.train.to_dict(), "rng_states": result.rng_states},
    )
    save_loss_curves(result.trace, out / "loss_curves.png")
    write_config(cfg, out / "config_effective.cfg")

    first, last = result.trace[0], result.trace[-1]
    print(f"trained on {len(instances)} instances for {cfg.train.epochs} epochs")
    print(f"aggregate nll: first epoch {first.agg_nll:.6f}, last epoch {last.agg_nll:.6f}")
    print(f"checkpoint: {out / 'model.ckpt'}")


def cmd_expand(args) -> None:
    cfg = load_config(args.config, args.seed)
    cfg.require("edges", "embeddings", "candidates")
    out = _out_dir(args)
    taxonomy = Taxonomy.load(cfg.edges)
    ctx, table, store = _feature_context(cfg, taxonomy)
    model = _checked_model(args.checkpoint, cfg, table, store)

    paths = taxonomy.enumerate_minipaths(model.spec.path_length, cfg.max_paths, cfg.seed)
    scorer = model.path_scorer(ctx)
    queries = read_term_list(cfg.candidates)
    if not queries:
        raise InputError(f"candidate file {cfg.candidates} lists no terms")
    rankings = [score_parents(scorer, taxonomy, paths, query) for query in queries]

    top_k = args.top_k if args.top_k is not None else cfg.top_k
    (out / "rankings.tsv").write_text(
        format_rankings(rankings, taxonomy, top_k), encoding="utf-8"
    )
    write_config(cfg, out / "config_effective.cfg")
    print(f"ranked parents for {len(queries)} queries (top {top_k}) in {out / 'rankings.tsv'}")


def cmd_eval(args) -> None:
    cfg = load_config(args.config, args.seed)
    cfg.require("edges", "embeddings", "test")
    out = _out_dir(args)
    taxonomy = Taxonomy.load(cfg.edges)
    ctx, table, store = _feature_context(cfg, taxonomy)
    model = _checked_model(args.checkpoint, cfg, table, store)

    paths = taxonomy.enumerate_minipaths(model.spec.path_length, cfg.max_paths, cfg.seed)
    test_pairs = load_test_pairs(cfg.test, taxonomy)
    report = evaluate(model.path_scorer(ctx), taxonomy, paths, test_pairs)

    (out / "eval_report.txt").write_text(
        format_report_text(report, taxonomy), encoding="utf-8"
    )
    (out / "eval_report.kv").write_text(
        format_report_kv(report, taxonomy), encoding="utf-8"
    )
    save_eval_summary(report, out / "eval_summary.png")
    write_config(cfg, out / "config_effective.cfg")
    print(
        f"accuracy {report.accuracy:.4f}  mrr {report.mrr:.4f}  "
        f"wu_palmer {report.wu_palmer:.4f}  ({len(report.records)} queries)"
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return 2
    except Exception:
        log.exception("internal error")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
