"""Command-line entry point: synth, etype, train, eval, oracle-loss, stats.

Exit codes: 0 success, 1 usage error, 2 data error. All JSON outputs are
byte-identical across repeated invocations with the same --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .corpus import (
    Corpus,
    CorpusFormatError,
    SynthConfig,
    corpus_stats,
    load_corpus,
    save_corpus,
    synth_corpus,
)
from .etype import Clustering, etype_cluster
from .features import FeatureSet
from .metrics import ClusteringReport, EvaluationError, evaluate, trivial_homogeneity_v
from .model import CheckpointError, save_checkpoint
from .train import (
    ORACLE_SETTINGS,
    OracleError,
    TrainConfig,
    TrainingError,
    induce_clustering,
    oracle_loss_curve,
    train,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _mean_report_dict(reports: list[ClusteringReport]) -> dict:
    dicts = [r.to_percent_dict() for r in reports]
    mean = {
        "b3": {
            k: float(np.mean([d["b3"][k] for d in dicts]))
            for k in ("precision", "recall", "f1")
        },
        "v": {
            k: float(np.mean([d["v"][k] for d in dicts]))
            for k in ("homogeneity", "completeness", "v")
        },
        "ari": float(np.mean([d["ari"] for d in dicts])),
        "n_evaluated": dicts[0]["n_evaluated"],
        "n_runs": len(dicts),
    }
    return mean


def build_parser() -> _Parser:
    parser = _Parser(
        prog="urex",
        description="Unsupervised relation extraction from entity types: "
        "generate corpora, induce and train relation clusterings, evaluate them, "
        "and probe the link predictor's training signal.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted relations")
    p.add_argument("--config", required=True, help="generator config JSON file")
    p.add_argument("--out", required=True, help="output corpus path (JSONL)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("etype", help="cluster by entity-type pair and evaluate")
    p.add_argument("--corpus", required=True, help="corpus path (JSONL)")
    p.add_argument("--out", default=None, help="write cluster labels JSON here")
    p.add_argument("--report", default=None, help="write the evaluation report JSON here")

    p = sub.add_parser("train", help="train the relation classifier through the link predictor")
    p.add_argument("--corpus", required=True, help="training corpus path (JSONL)")
    p.add_argument("--dev", default=None, help="labelled dev corpus for early stopping")
    p.add_argument("--config", default=None, help="training config JSON (defaults embedded)")
    p.add_argument("--clusters", type=int, default=None, help="number of relation slots c")
    p.add_argument(
        "--features",
        default=None,
        help="comma list of templates: TypePair,Entity,BOW,DepPath,POS,Trigger",
    )
    p.add_argument("--seed", type=int, default=None, help="base seed (run i uses seed+i)")
    p.add_argument("--runs", type=int, default=3, help="runs averaged in the report")
    p.add_argument("--out", default=None, help="write run summary JSON (histories, reports)")
    p.add_argument("--report", default=None, help="write the mean evaluation report JSON")
    p.add_argument("--save-model", default=None, help="checkpoint path prefix, one file per run")

    p = sub.add_parser("eval", help="evaluate a saved clustering against a corpus's labels")
    p.add_argument("--pred", required=True, help='clustering JSON file ({"labels": [...]})')
    p.add_argument("--corpus", required=True, help="corpus with gold labels (JSONL)")
    p.add_argument("--report", default=None, help="write the report JSON here")

    p = sub.add_parser(
        "oracle-loss", help="link-predictor loss curves under fixed relation assignments"
    )
    p.add_argument("--corpus", required=True, help="corpus path (JSONL)")
    p.add_argument(
        "--setting",
        default="all",
        help=f"one of {', '.join(ORACLE_SETTINGS)}, or 'all' (default)",
    )
    p.add_argument("--epochs", type=int, default=15, help="training epochs per run")
    p.add_argument("--runs", type=int, default=3, help="seeds averaged per setting")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--config", default=None, help="link-training config JSON")
    p.add_argument("--out", required=True, help="output directory, one curve file per setting")
    p.add_argument("--parallel", type=int, default=1, help="settings run concurrently")
    p.add_argument(
        "--include-unlabelled",
        action="store_true",
        help="keep unlabelled instances (silver settings still require labels)",
    )

    p = sub.add_parser("stats", help="corpus statistics and relation distribution")
    p.add_argument("--corpus", required=True, help="corpus path (JSONL)")
    p.add_argument("--out", default=None, help="write stats JSON here (default stdout)")

    return parser


def _cmd_synth(args) -> int:
    config = SynthConfig.from_json_file(args.config)
    if args.seed is not None:
        config = SynthConfig.from_dict({**config.to_dict(), "seed": args.seed})
    corpus = synth_corpus(config)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} instances to {args.out}")
    return 0


def _report_and_print(report_dict: dict, path: str | None, summary: str) -> None:
    print(summary)
    if path is not None:
        _write_json(path, report_dict)
        print(f"report written to {path}")


def _cmd_etype(args) -> int:
    corpus = load_corpus(args.corpus)
    clustering = etype_cluster(corpus)
    print(f"{len(set(clustering.labels))} type-pair clusters over {len(corpus)} instances")
    if args.out is not None:
        clustering.save(args.out)
        print(f"labels written to {args.out}")
    if args.report is not None:
        report = evaluate(clustering, corpus)
        gold = [corpus[i].gold_relation for i in corpus.labelled_indices]
        report_dict = report.to_percent_dict()
        report_dict["trivial_homogeneity_v"] = 100.0 * trivial_homogeneity_v(gold)
        _report_and_print(report_dict, args.report, report.summary())
    return 0


def _load_train_config(args) -> TrainConfig:
    config = (
        TrainConfig.from_json_file(args.config) if args.config is not None else TrainConfig()
    )
    overrides = config.to_dict()
    if args.clusters is not None:
        overrides["n_relations"] = args.clusters
    if args.features is not None:
        overrides["features"] = args.features.split(",")
    if args.seed is not None:
        overrides["seed"] = args.seed
    return TrainConfig.from_dict(overrides)


def _cmd_train(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    config = _load_train_config(args)
    train_corpus = load_corpus(args.corpus)
    dev_corpus = load_corpus(args.dev) if args.dev is not None else None
    eval_corpus = dev_corpus if dev_corpus is not None else train_corpus
    run_rows = []
    reports = []
    for run in range(args.runs):
        run_config = TrainConfig.from_dict({**config.to_dict(), "seed": config.seed + run})
        result = train(run_config, train_corpus, dev_corpus)
        clustering = induce_clustering(
            result.params, eval_corpus, run_config.feature_set, result.vocabs, result.feature_index
        )
        report = evaluate(clustering, eval_corpus)
        reports.append(report)
        row = {
            "seed": run_config.seed,
            "history": result.history.to_dict(),
            "report": report.to_percent_dict(),
        }
        run_rows.append(row)
        print(f"run {run} (seed {run_config.seed}): {report.summary()}")
        if args.save_model is not None:
            path = (
                f"{args.save_model}.run{run}.json" if args.runs > 1 else f"{args.save_model}"
            )
            save_checkpoint(
                path, result.params, result.vocabs.hash_digest(), extra={"seed": run_config.seed}
            )
            print(f"checkpoint written to {path}")
    mean_report = _mean_report_dict(reports)
    print(
        "mean of {n} runs: B3 F1 = {f1:.1f} | V = {v:.1f} | ARI = {ari:.1f}".format(
            n=args.runs, f1=mean_report["b3"]["f1"], v=mean_report["v"]["v"], ari=mean_report["ari"]
        )
    )
    if args.out is not None:
        _write_json(
            args.out,
            {"config": config.to_dict(), "runs": run_rows, "mean_report": mean_report},
        )
        print(f"summary written to {args.out}")
    if args.report is not None:
        _write_json(args.report, mean_report)
        print(f"report written to {args.report}")
    return 0


def _cmd_eval(args) -> int:
    clustering = Clustering.load(args.pred)
    corpus = load_corpus(args.corpus)
    report = evaluate(clustering, corpus)
    _report_and_print(report.to_percent_dict(), args.report, report.summary())
    return 0


def _oracle_worker(corpus_path, setting, config_dict, epochs, runs, labelled_only):
    corpus = load_corpus(corpus_path)
    config = TrainConfig.from_dict(config_dict)
    curve = oracle_loss_curve(
        corpus, setting, config=config, epochs=epochs, runs=runs, labelled_only=labelled_only
    )
    return curve.to_dict()


def _cmd_oracle_loss(args) -> int:
    if args.setting == "all":
        settings = list(ORACLE_SETTINGS)
    elif args.setting in ORACLE_SETTINGS:
        settings = [args.setting]
    else:
        raise UsageError(
            f"unknown setting {args.setting!r}; choose from {', '.join(ORACLE_SETTINGS)} or 'all'"
        )
    if args.config is not None:
        config = TrainConfig.from_json_file(args.config)
    else:
        config = TrainConfig(optimizer="adam", learning_rate=0.005)
    config = TrainConfig.from_dict({**config.to_dict(), "seed": args.seed})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    labelled_only = not args.include_unlabelled

    jobs = [
        (args.corpus, setting, config.to_dict(), args.epochs, args.runs, labelled_only)
        for setting in settings
    ]
    if args.parallel > 1 and len(settings) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_oracle_worker, *zip(*jobs)))
    else:
        results = [_oracle_worker(*job) for job in jobs]
    for setting, result in zip(settings, results):
        path = out_dir / f"oracle_{setting}.json"
        _write_json(path, result)
        final = result["epochs"][-1]["nll_pos"]
        print(f"{setting}: final positive-term NLL {final:.4f} -> {path}")
    return 0


def _cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    stats = corpus_stats(corpus)
    if args.out is not None:
        _write_json(args.out, stats)
        print(f"stats written to {args.out}")
    else:
        print(json.dumps(stats, indent=2, ensure_ascii=False))
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "etype": _cmd_etype,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "oracle-loss": _cmd_oracle_loss,
    "stats": _cmd_stats,
}

_DATA_ERRORS = (
    CorpusFormatError,
    EvaluationError,
    OracleError,
    TrainingError,
    CheckpointError,
    FileNotFoundError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as e:
        message = e.args[0] if e.args else e
        print(f"error: {message}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
