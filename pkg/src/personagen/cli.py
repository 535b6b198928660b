"""Command-line entry point: ``personagen <command> [options]``.

Every command reads and writes files, so stages can be rerun on their own.
Beside its main artifact each command writes ``<out stem>.summary.json``.
Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.
The API key is taken from the environment variable named in the config
(``llm.api_key_env``), never from the command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from .classify import single_corpus_experiment, substitution_experiment
from .embedding import EmbeddingProvider, embed_corpus
from .errors import (
    ColumnNotFound,
    DegenerateLabels,
    DimensionMismatch,
    InfeasibleConstraints,
    InsufficientSamples,
    LabelSetMismatch,
    MalformedRecord,
    ParseError,
    PersonaGenError,
    UnknownLabel,
    ValidationError,
)
from .llm import LLMBackend
from .metrics import evaluate_diversity, evaluate_similarity, projection_table
from .pipeline import (
    PERSONA_STAGE,
    build_personas,
    generate_samples,
    judge_samples,
    make_backend,
    make_embedding_provider,
    plan_generation,
    slot_rng,
)
from .persona import sample_background, sample_base_persona
from .store import (
    GoldenIngestSpec,
    ingest_golden,
    load_config,
    read_corpus,
    read_records,
    write_corpus,
    write_records,
    write_report,
    write_table,
)
from .store.config import RunConfig

logger = logging.getLogger(__name__)

OK, INVALID, FAILED = 0, 1, 2

# Errors caused by the configuration or input files rather than by the run itself.
INPUT_ERRORS = (
    ValidationError,
    ParseError,
    InfeasibleConstraints,
    InsufficientSamples,
    DimensionMismatch,
    LabelSetMismatch,
    DegenerateLabels,
    UnknownLabel,
    MalformedRecord,
    ColumnNotFound,
    FileNotFoundError,
)


@dataclass
class CommandOutcome:
    exit_code: int
    summary: dict[str, Any] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if (self.exit_code != OK) != bool(self.errors):
            raise ValueError("a nonzero exit code requires errors, and errors require one")

    def to_dict(self) -> dict[str, Any]:
        return {
            "exit_code": self.exit_code,
            "summary": self.summary,
            "artifacts": list(self.artifacts),
            "errors": list(self.errors),
        }


def summary_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".summary.json")


def side_path(out: str | Path, suffix: str) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}.{suffix}")


def _finish(out: str | Path | None, outcome: CommandOutcome, write: bool = True) -> CommandOutcome:
    if write and out is not None:
        path = summary_path(out)
        outcome.artifacts.append(str(path))
        write_report(path, outcome.to_dict())
    return outcome


def _read_kind(path: str | Path, kind: str) -> list[Any]:
    return read_records(path, kind, strict=True).records


def _detect_kind(path: str | Path) -> str:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return json.loads(line).get("kind", "")
    raise InsufficientSamples(f"{path} contains no records")


# --- commands ----------------------------------------------------------------


def cmd_personas(
    config: RunConfig,
    count: int,
    out: str | Path,
    backend: LLMBackend | None = None,
    dry_run: bool = False,
) -> CommandOutcome:
    if count < 1:
        return _finish(out, CommandOutcome(INVALID, errors=["count must be positive"]), not dry_run)
    if dry_run:
        plan = []
        for i in range(min(count, 5)):
            rng = slot_rng(config.seed, PERSONA_STAGE, i)
            base = sample_base_persona(config.persona.base, config.persona.rules, rng)
            bg = sample_background(base, config.persona.background, rng, config.persona.rules)
            plan.append({**base.as_dict(), **bg.as_dict()})
        return CommandOutcome(OK, {"dry_run": True, "count": count, "seed": config.seed, "first_draws": plan})
    backend = backend or make_backend(config)
    batch = build_personas(config, count, backend)
    write_records(out, batch.personas)
    summary = {
        "requested": count,
        "produced": len(batch.personas),
        "judgments": dict(batch.judgments),
        "rejected": batch.rejected,
        "failed_slots": len(batch.failures),
    }
    errors = [f"slot {f.slot}: {f.reason}" for f in batch.failures]
    return _finish(out, CommandOutcome(FAILED if errors else OK, summary, [str(out)], errors))


def cmd_generate(
    config: RunConfig,
    personas_path: str | Path,
    out: str | Path,
    backend: LLMBackend | None = None,
    dry_run: bool = False,
) -> CommandOutcome:
    personas = [p for p in _read_kind(personas_path, "persona") if p.validated]
    if not personas:
        return _finish(out, CommandOutcome(INVALID, errors=[f"{personas_path}: no validated personas"]), not dry_run)
    if dry_run:
        slots = plan_generation(config, personas)
        per_emotion = {e: sum(s.emotion == e for s in slots) for e in config.emotion_set}
        return CommandOutcome(
            OK, {"dry_run": True, "slots": len(slots), "per_emotion": per_emotion, "personas": len(personas)}
        )
    backend = backend or make_backend(config)
    batch = generate_samples(config, personas, backend)
    write_records(out, batch.samples)
    per_emotion = {e: 0 for e in config.emotion_set}
    for s in batch.samples:
        per_emotion[s.emotion] += 1
    summary = {
        "produced": len(batch.samples),
        "per_emotion": per_emotion,
        "truncated": batch.truncated,
        "scene_judgments": dict(batch.scene_judgments),
        "failed_slots": len(batch.failures),
        "personas": len(personas),
    }
    errors = [f"slot {f.slot}: {f.reason}" for f in batch.failures]
    return _finish(out, CommandOutcome(FAILED if errors else OK, summary, [str(out)], errors))


def cmd_embed(
    config: RunConfig,
    input_path: str | Path,
    out: str | Path,
    provider: EmbeddingProvider | None = None,
    dry_run: bool = False,
) -> CommandOutcome:
    kind = _detect_kind(input_path)
    if kind not in ("sample", "golden"):
        return _finish(out, CommandOutcome(INVALID, errors=[f"{input_path}: cannot embed {kind!r} records"]), not dry_run)
    records = _read_kind(input_path, kind)
    label_of = (lambda r: r.emotion) if kind == "sample" else (lambda r: r.label)
    if dry_run:
        return CommandOutcome(OK, {"dry_run": True, "records": len(records), "kind": kind})
    provider = provider or make_embedding_provider(config)
    corpus = embed_corpus(
        [r.id for r in records], [r.text for r in records], [label_of(r) for r in records], provider
    )
    write_corpus(out, corpus)
    summary = {"embedded": len(corpus), "dim": corpus.dim, "provider_tag": corpus.provider_tag, "kind": kind}
    return _finish(out, CommandOutcome(OK, summary, [str(out)]))


def cmd_eval_diversity(config: RunConfig, corpus_path: str | Path, out: str | Path, dry_run: bool = False):
    corpus = read_corpus(corpus_path)
    if dry_run:
        return CommandOutcome(OK, {"dry_run": True, "vectors": len(corpus), "labels": corpus.label_set})
    m = config.metrics
    report = evaluate_diversity(corpus, k_clusters=m.k_clusters, seed=m.seed)
    write_report(out, report)
    pca = side_path(out, "pca.csv")
    write_table(pca, projection_table(corpus), ["sample_id", "label", "x", "y"])
    return _finish(out, CommandOutcome(OK, report.to_dict(), [str(out), str(pca)]))


def cmd_eval_similarity(
    config: RunConfig, real_path: str | Path, synthetic_path: str | Path, out: str | Path, dry_run: bool = False
):
    real, synthetic = read_corpus(real_path), read_corpus(synthetic_path)
    if dry_run:
        return CommandOutcome(OK, {"dry_run": True, "real": len(real), "synthetic": len(synthetic)})
    m = config.metrics
    report = evaluate_similarity(real, synthetic, k_bins=m.k_bins, beta=m.beta, epsilon=m.epsilon, seed=m.seed)
    write_report(out, report)
    return _finish(out, CommandOutcome(OK, report.to_dict(), [str(out)]))


def cmd_eval_classify(
    config: RunConfig,
    corpus_path: str | Path | None,
    out: str | Path,
    golden_path: str | Path | None = None,
    synthetic_path: str | Path | None = None,
    dry_run: bool = False,
) -> CommandOutcome:
    spec, hp = config.classify.split, config.classify.hyperparams
    pair_mode = golden_path is not None or synthetic_path is not None
    if pair_mode and (golden_path is None or synthetic_path is None):
        return _finish(out, CommandOutcome(INVALID, errors=["pair mode needs both --golden and --synthetic"]), not dry_run)
    if not pair_mode and corpus_path is None:
        return _finish(out, CommandOutcome(INVALID, errors=["give --corpus, or --golden with --synthetic"]), not dry_run)
    if pair_mode:
        golden, synthetic = read_corpus(golden_path), read_corpus(synthetic_path)
        if dry_run:
            return CommandOutcome(OK, {"dry_run": True, "golden": len(golden), "synthetic": len(synthetic)})
        result = substitution_experiment(golden, synthetic, spec, hp)
        report = {"kind": "substitution_report", "golden": result.golden, "synthetic": result.synthetic}
        write_report(out, report)
        artifacts = [str(out)]
        for name, rep in (("golden", result.golden), ("synthetic", result.synthetic)):
            path = side_path(out, f"{name}.confusion.csv")
            write_table(path, rep.confusion_rows(), ["true", *rep.class_labels])
            artifacts.append(str(path))
        summary = {
            "mode": "substitution",
            "golden_accuracy": result.golden.accuracy,
            "synthetic_accuracy": result.synthetic.accuracy,
            "golden_macro_f1": result.golden.macro["f1"],
            "synthetic_macro_f1": result.synthetic.macro["f1"],
            "test_size": result.golden.total,
        }
        return _finish(out, CommandOutcome(OK, summary, artifacts))
    corpus = read_corpus(corpus_path)
    if dry_run:
        return CommandOutcome(OK, {"dry_run": True, "vectors": len(corpus), "labels": corpus.label_set})
    report = single_corpus_experiment(corpus, spec, hp)
    write_report(out, report)
    confusion = side_path(out, "confusion.csv")
    write_table(confusion, report.confusion_rows(), ["true", *report.class_labels])
    summary = {
        "mode": "single",
        "accuracy": report.accuracy,
        "macro_f1": report.macro["f1"],
        "test_size": report.total,
    }
    return _finish(out, CommandOutcome(OK, summary, [str(out), str(confusion)]))


def cmd_judge(
    config: RunConfig,
    samples_path: str | Path,
    out: str | Path,
    backend: LLMBackend | None = None,
    dry_run: bool = False,
) -> CommandOutcome:
    samples = _read_kind(samples_path, "sample")
    if dry_run:
        return CommandOutcome(OK, {"dry_run": True, "samples": len(samples)})
    backend = backend or make_backend(config)
    batch = judge_samples(config, samples, backend)
    write_records(out, batch.samples)
    scores = side_path(out, "scores.csv")
    write_table(scores, batch.distribution(), ["criterion", "1", "2", "3", "4", "5"])
    summary = {
        "scored": len(batch.samples) - len(batch.failures),
        "unparsable": len(batch.failures),
        "failure_rate": batch.failure_rate,
        "threshold": config.judge_failure_threshold,
        "means": batch.means(),
    }
    errors = []
    if batch.failure_rate > config.judge_failure_threshold:
        errors.append(
            f"unparsable judgments {batch.failure_rate:.3f} exceed threshold {config.judge_failure_threshold}"
        )
    return _finish(out, CommandOutcome(FAILED if errors else OK, summary, [str(out), str(scores)], errors))


def cmd_ingest_golden(config: RunConfig, spec: GoldenIngestSpec, out: str | Path, dry_run: bool = False):
    records, summary = ingest_golden(spec)
    if dry_run:
        return CommandOutcome(OK, {"dry_run": True, **summary.to_dict()})
    write_records(out, records)
    return _finish(out, CommandOutcome(OK, summary.to_dict(), [str(out)]))


# --- argument parsing ----------------------------------------------------------

DEFAULT_OUT = {
    "personas": "personas.jsonl",
    "generate": "samples.jsonl",
    "embed": "embeddings.jsonl",
    "eval-diversity": "diversity.json",
    "eval-similarity": "similarity.json",
    "eval-classify": "classify.json",
    "judge": "judged.jsonl",
    "ingest-golden": "golden.jsonl",
}


def _label_map(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        source, sep, target = item.partition("=")
        if not sep or not source or not target:
            raise argparse.ArgumentTypeError(f"--label-map expects SOURCE=TARGET, got {item!r}")
        out[source] = target
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration YAML (default: the shipped config)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="main output file; the summary goes next to it")
    common.add_argument("--backend", choices=("mock", "remote"), help="override LLM and embedding backends")
    common.add_argument("--dry-run", action="store_true", help="validate and print the plan; no network, no files")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="personagen", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("personas", parents=[common], help="sample and validate personas")
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("generate", parents=[common], help="generate emotion texts")
    p.add_argument("--personas", required=True)

    p = sub.add_parser("embed", parents=[common], help="embed a sample or golden record file")
    p.add_argument("--input", required=True)

    p = sub.add_parser("eval-diversity", parents=[common], help="MCD, CE and CD of an embedded corpus")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("eval-similarity", parents=[common], help="FID, PRD-F-beta, KL and HC between corpora")
    p.add_argument("--real", required=True)
    p.add_argument("--synthetic", required=True)

    p = sub.add_parser("eval-classify", parents=[common], help="train and evaluate the emotion classifier")
    p.add_argument("--corpus")
    p.add_argument("--golden")
    p.add_argument("--synthetic")

    p = sub.add_parser("judge", parents=[common], help="score samples on the four-criterion rubric")
    p.add_argument("--samples", required=True)

    p = sub.add_parser("ingest-golden", parents=[common], help="convert a labelled CSV into golden records")
    p.add_argument("--csv", required=True)
    p.add_argument("--delimiter")
    p.add_argument("--text-column")
    p.add_argument("--label-column")
    p.add_argument("--label-map", action="append", default=[], metavar="SOURCE=TARGET")
    return parser


def _configure(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.backend is not None:
        config = replace(config, backend=args.backend, embedding=replace(config.embedding, provider=args.backend))
    return config


def _dispatch(args: argparse.Namespace, config: RunConfig, out: str) -> CommandOutcome:
    dry = args.dry_run
    cmd = args.command
    if cmd == "personas":
        return cmd_personas(config, args.count, out, dry_run=dry)
    if cmd == "generate":
        return cmd_generate(config, args.personas, out, dry_run=dry)
    if cmd == "embed":
        return cmd_embed(config, args.input, out, dry_run=dry)
    if cmd == "eval-diversity":
        return cmd_eval_diversity(config, args.corpus, out, dry_run=dry)
    if cmd == "eval-similarity":
        return cmd_eval_similarity(config, args.real, args.synthetic, out, dry_run=dry)
    if cmd == "eval-classify":
        return cmd_eval_classify(config, args.corpus, out, args.golden, args.synthetic, dry_run=dry)
    if cmd == "judge":
        return cmd_judge(config, args.samples, out, dry_run=dry)
    if cmd == "ingest-golden":
        g = config.golden
        spec = GoldenIngestSpec(
            args.csv,
            delimiter=args.delimiter or g.delimiter,
            text_column=args.text_column or g.text_column,
            label_column=args.label_column or g.label_column,
            label_map=_label_map(args.label_map) or dict(g.label_map),
            emotion_set=g.emotion_set,
        )
        return cmd_ingest_golden(config, spec, out, dry_run=dry)
    raise AssertionError(cmd)


def run(argv: Sequence[str] | None = None) -> CommandOutcome:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    out = args.out or DEFAULT_OUT[args.command]
    try:
        config = _configure(args)
        return _dispatch(args, config, out)
    except INPUT_ERRORS as exc:
        outcome = CommandOutcome(INVALID, errors=[f"{type(exc).__name__}: {exc}"])
    except (PersonaGenError, OSError) as exc:
        outcome = CommandOutcome(FAILED, errors=[f"{type(exc).__name__}: {exc}"])
    except (argparse.ArgumentTypeError, ValueError) as exc:
        outcome = CommandOutcome(INVALID, errors=[f"{type(exc).__name__}: {exc}"])
    if not args.dry_run:
        try:
            _finish(out, outcome)
        except OSError:
            logger.warning("could not write %s", summary_path(out))
    return outcome


def main(argv: Sequence[str] | None = None, stdout: Callable[[str], Any] | None = None) -> int:
    outcome = run(argv)
    emit = stdout or (lambda s: print(s))
    emit(json.dumps(outcome.to_dict(), ensure_ascii=False, sort_keys=True, indent=2))
    for err in outcome.errors:
        print(f"error: {err}", file=sys.stderr)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
