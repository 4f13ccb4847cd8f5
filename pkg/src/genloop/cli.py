"""Single entry point exposing the pipeline stages as subcommands.

Every subcommand is a pure function of its inputs (flags, config file,
seed): re-running with the same inputs rewrites the same outputs. Errors
leave a machine-readable JSON object on stderr and a distinct exit code:

    2  usage (argparse)          4  bad configuration
    3  bad input data            5  pipeline halted (empty filtered pool)
    6  bridge failure or conformance mismatch
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import benchmark as benchmark_mod
from . import bridge as bridge_mod
from . import critic as critic_mod
from . import evalkit, lm, prompts, selfimit
from .decoder import DecodeJob, DecoderConfig, batch_decode, read_jsonl, write_jsonl
from .errors import BridgeError, ConfigError, GenloopError, InputError, LoopHalted

EXIT_INPUT = 3
EXIT_CONFIG = 4
EXIT_HALTED = 5
EXIT_BRIDGE = 6

CONFIG_VERSION = 1

logger = logging.getLogger("genloop")


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "message": record.getMessage()}, sort_keys=True)


def _setup_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLogFormatter())
    logging.basicConfig(level=getattr(logging, level.upper()), handlers=[handler])


def _read_lines(path: str) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.readlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _out_stream(path: str | None):
    return open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout


def _parse_job_line(path: str, lineno: int, line: str) -> DecodeJob:
    try:
        return prompts.PromptJob.from_json(line).to_decode_job()
    except (KeyError, ValueError, InputError):
        try:
            obj = json.loads(line)
            from .constraints import ConstraintSet
            return DecodeJob(str(obj["job"]), obj["prompt"],
                             ConstraintSet.from_json(obj["constraints"]))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: bad job line: {exc}") from None


def _load_jobs(path: str) -> list[DecodeJob]:
    jobs = [_parse_job_line(path, lineno, line)
            for lineno, line in enumerate(_read_lines(path), 1) if line.strip()]
    if not jobs:
        raise InputError(f"{path}: no jobs found")
    return jobs


def _job_chunks(path: str, size: int = 512):
    """Stream a jobs file in bounded chunks so huge files never load whole."""
    chunk: list[DecodeJob] = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                chunk.append(_parse_job_line(path, lineno, line))
                if len(chunk) >= size:
                    yield chunk
                    chunk = []
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if chunk:
        yield chunk


def _load_items(path: str) -> list[evalkit.ScoredLabeledItem]:
    items = []
    for lineno, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            label = obj["label"]
            valid = label if isinstance(label, bool) else str(label).lower() in ("valid", "true")
            items.append(evalkit.ScoredLabeledItem(
                text=obj["text"], score=float(obj.get("score", 0.0)), valid=valid,
                system=obj.get("system", ""), concept=obj.get("concept", "")))
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: bad item line: {exc}") from None
    if not items:
        raise InputError(f"{path}: no items found")
    return items


def _decoder_config(args) -> DecoderConfig:
    return DecoderConfig(beam_size=args.beam, num_returns=args.returns,
                         max_len=args.max_len, min_len=args.min_len,
                         length_penalty=args.length_penalty, lam=getattr(args, "lam"),
                         diversity_bucketing=args.diversity_bucketing)


def _add_decoder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam", type=int, default=10, help="beam size (default 10)")
    p.add_argument("--returns", type=int, default=10, help="generations per prompt (default 10)")
    p.add_argument("--max-len", type=int, default=30, help="max generation length (default 30)")
    p.add_argument("--min-len", type=int, default=2, help="min generation length (default 2)")
    p.add_argument("--length-penalty", type=float, default=0.1,
                   help="length normalization exponent (default 0.1)")
    p.add_argument("--lambda", dest="lam", type=float, default=20.0,
                   help="penalty per violated clause (default 20.0)")
    p.add_argument("--diversity-bucketing", action="store_true",
                   help="spread beam slots across satisfied-clause signatures")


# -- subcommand implementations ----------------------------------------------

def _cmd_fit_lm(args) -> int:
    model = lm.fit_texts(_read_lines(args.corpus), order=args.order, discount=args.discount)
    model.save(args.out)
    print(json.dumps({"out": args.out, "vocab": len(model.vocab), "order": model.order},
                     sort_keys=True))
    return 0


def _cmd_expand_prompts(args) -> int:
    model = lm.NGramModel.load(args.model)
    concepts = prompts.read_concepts(_read_lines(args.concepts), args.concepts)
    rels = (prompts.read_relations(_read_lines(args.relations), args.relations)
            if args.relations else [prompts.RelationalPhrase(r) for r in prompts.DEFAULT_RELATIONS])
    related = prompts.read_related(_read_lines(args.related), args.related) if args.related else ()
    jobs = prompts.build_jobs(concepts, rels, model, related, args.ppl_threshold)
    out = _out_stream(args.out)
    try:
        for job in jobs:
            out.write(job.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    logger.info("wrote %d jobs", len(jobs))
    return 0


def _cmd_decode(args) -> int:
    model = lm.NGramModel.load(args.model)
    cfg = _decoder_config(args)
    failures = []
    total = 0
    out = _out_stream(args.out)
    try:
        for chunk in _job_chunks(args.jobs):
            total += len(chunk)
            write_jsonl(batch_decode(model, chunk, cfg, parallelism=args.parallelism,
                                     on_error=lambda job, exc: failures.append(job.job)), out)
    finally:
        if out is not sys.stdout:
            out.close()
    if total == 0:
        raise InputError(f"{args.jobs}: no jobs found")
    if failures:
        logger.warning("%d jobs failed: %s", len(failures), ", ".join(failures))
    return 0


def _cmd_train_critic(args) -> int:
    data = critic_mod.read_labeled_tsv(_read_lines(args.data))
    spec = critic_mod.FeatureSpec(dim=args.dim)
    model = critic_mod.train_critic(data, spec=spec, l2=args.l2)
    model.save(args.out)
    print(json.dumps({"out": args.out, "examples": len(data),
                      "train_accuracy": model.train_accuracy}, sort_keys=True))
    return 0


def _cmd_filter(args) -> int:
    model = critic_mod.CriticModel.load(args.model)
    src = open(args.infile, "r", encoding="utf-8") if args.infile else sys.stdin
    out = _out_stream(args.out)
    try:
        kept = write_jsonl(critic_mod.filter_generations(read_jsonl(src), model, args.delta), out)
    finally:
        if src is not sys.stdin:
            src.close()
        if out is not sys.stdout:
            out.close()
    logger.info("kept %d generations above delta=%s", kept, args.delta)
    return 0


def _build_critic_from_config(spec: dict):
    kind = spec.get("kind")
    if kind == "model":
        return critic_mod.CriticModel.load(spec["path"])
    if kind == "grammar":
        grammar = benchmark_mod.Grammar.load(spec["grammar"])
        return critic_mod.OracleCritic(grammar.is_valid)
    raise ConfigError(f"unknown critic kind {kind!r} (expected 'model' or 'grammar')")


def _cmd_selfimit(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        conf = json.load(f)
    if conf.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}")
    if "model" in conf:
        model = lm.NGramModel.load(conf["model"])
    elif "corpus" in conf:
        model = lm.fit_texts(_read_lines(conf["corpus"]),
                             order=conf.get("order", 3), discount=conf.get("discount", 0.75))
    else:
        raise ConfigError("config needs either 'model' or 'corpus'")
    jobs = _load_jobs(conf["jobs"])
    critic = _build_critic_from_config(conf.get("critic") or {})
    oracle = _build_critic_from_config(conf["oracle"]) if conf.get("oracle") else None
    dec = DecoderConfig(**(conf.get("decoder") or {}))
    cfg = selfimit.LoopConfig(
        iterations=args.iterations if args.iterations is not None else conf.get("iterations", 3),
        decoder=dec, delta=conf.get("delta", 0.5), mix_weight=conf.get("mix_weight", 1.0),
        dedup=conf.get("dedup", True), seed=conf.get("seed", 0),
        parallelism=conf.get("parallelism", 1))
    retrain = None
    if conf.get("retrain_data"):
        retrain = {int(k): critic_mod.read_labeled_tsv(_read_lines(v))
                   for k, v in conf["retrain_data"].items()}
    # the one supported environment override: redirect the run directory
    run_dir = os.environ.get("GENLOOP_RUN_DIR") or conf.get("run_dir")
    result = selfimit.run(model, jobs, critic, cfg, run_dir=run_dir,
                          oracle=oracle, retrain_data=retrain)
    print(json.dumps([r.to_json() for r in result.reports], sort_keys=True))
    return 0


def _cmd_eval_pr(args) -> int:
    items = _load_items(args.items)
    if args.negate_scores:
        items = [replace(it, score=evalkit.perplexity_score(it.score)) for it in items]
    curve = evalkit.pr_curve(items)
    report = {"average_precision": curve.average_precision, "points": len(curve.points)}
    print(json.dumps(report, sort_keys=True))
    table = ["threshold\tprecision\trecall"]
    table += [f"{t!r}\t{p:.6f}\t{r:.6f}"
              for t, (p, r) in zip(curve.thresholds, curve.points)]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(table) + "\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as f:
            f.write("threshold,precision,recall\n")
            for t, (p, r) in zip(curve.thresholds, curve.points):
                f.write(f"{t!r},{p!r},{r!r}\n")
    return 0


def _cmd_eval_accuracy(args) -> int:
    items = _load_items(args.items)
    print(json.dumps({"accuracy": evalkit.accuracy(items), "items": len(items)}, sort_keys=True))
    return 0


def _cmd_eval_mnr(args) -> int:
    items = _load_items(args.items)
    groups: dict[str, list[str]] = {}
    for it in items:
        groups.setdefault(it.concept or "(all)", []).append(it.text)
    per_seed = []
    concept_sums: dict[str, float] = {}
    for s in range(args.seed, args.seed + args.seeds):
        rep = evalkit.estimate_unique(groups, capture_fraction=args.capture,
                                      bleu_threshold=args.bleu_threshold, seed=s)
        per_seed.append(rep.mean_estimate)
        for c, est in rep.per_concept.items():
            concept_sums[c] = concept_sums.get(c, 0.0) + est.estimate
    report = {
        "seeds": args.seeds,
        "capture_fraction": args.capture,
        "bleu_threshold": args.bleu_threshold,
        "mean_estimate": sum(per_seed) / len(per_seed),
        "per_seed": per_seed,
        "per_concept_mean": {c: v / args.seeds for c, v in sorted(concept_sums.items())},
    }
    out = json.dumps(report, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(out + "\n")
    print(out)
    return 0


def _cmd_bridge_check(args) -> int:
    cfg = _decoder_config(args)
    jobs = _load_jobs(args.jobs) if args.jobs else None
    report = bridge_mod.bridge_check(args.cmd, args.model_spec, cfg, jobs=jobs,
                                     timeout=args.timeout, latency_probes=args.latency_probes)
    out = json.dumps(report.to_json(), sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(out + "\n")
    print(out)
    return 0 if report.ok else EXIT_BRIDGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genloop",
                                     description="constrained decoding and self-imitation pipeline")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"],
                        help="line-delimited JSON logs on stderr (default warning)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-lm", help="fit the n-gram model on a text corpus")
    p.add_argument("--corpus", required=True, help="UTF-8 text, one sentence per line")
    p.add_argument("--order", type=int, default=3, help="n-gram order (default 3)")
    p.add_argument("--discount", type=float, default=0.75, help="absolute discount (default 0.75)")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(fn=_cmd_fit_lm)

    p = sub.add_parser("expand-prompts", help="expand concepts into gated prompt jobs")
    p.add_argument("--concepts", required=True, help="TSV: surface<TAB>kind[<TAB>source]")
    p.add_argument("--relations", help="one relational phrase per line (default: built-in list)")
    p.add_argument("--related", help="TSV: concept<TAB>related concept")
    p.add_argument("--model", required=True, help="n-gram model file for perplexity scoring")
    p.add_argument("--ppl-threshold", type=float, default=250.0,
                   help="reject prompts above this per-word perplexity (default 250)")
    p.add_argument("--out", help="jobs JSONL (default stdout)")
    p.set_defaults(fn=_cmd_expand_prompts)

    p = sub.add_parser("decode", help="constrained beam search over a jobs file")
    p.add_argument("--model", required=True)
    p.add_argument("--jobs", required=True, help="jobs JSONL from expand-prompts")
    _add_decoder_flags(p)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", help="generations JSONL (default stdout)")
    p.set_defaults(fn=_cmd_decode)

    p = sub.add_parser("train-critic", help="train the logistic-regression critic")
    p.add_argument("--data", required=True, help="TSV: text<TAB>valid|invalid")
    p.add_argument("--dim", type=int, default=1 << 15, help="hashed feature dim (default 32768)")
    p.add_argument("--l2", type=float, default=1e-3, help="L2 regularization (default 1e-3)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train_critic)

    p = sub.add_parser("filter", help="keep generations the critic scores above delta")
    p.add_argument("--model", required=True, help="critic file from train-critic")
    p.add_argument("--delta", type=float, default=0.5, help="score threshold (default 0.5)")
    p.add_argument("--in", dest="infile", help="generations JSONL (default stdin)")
    p.add_argument("--out", help="filtered JSONL (default stdout)")
    p.set_defaults(fn=_cmd_filter)

    p = sub.add_parser("selfimit", help="run the decode/filter/fine-tune loop")
    p.add_argument("--config", required=True, help="JSON config (see README)")
    p.add_argument("--iterations", type=int, help="override the config's iteration count")
    p.set_defaults(fn=_cmd_selfimit)

    p = sub.add_parser("eval-pr", help="precision-recall curve and average precision")
    p.add_argument("--items", required=True, help="JSONL: text/score/label[/system/concept]")
    p.add_argument("--negate-scores", action="store_true",
                   help="rank by negated score (for perplexity-like scores)")
    p.add_argument("--out", help="plain-text PR table")
    p.add_argument("--csv", help="CSV of (threshold, precision, recall)")
    p.set_defaults(fn=_cmd_eval_pr)

    p = sub.add_parser("eval-accuracy", help="fraction of items labeled valid")
    p.add_argument("--items", required=True)
    p.set_defaults(fn=_cmd_eval_accuracy)

    p = sub.add_parser("eval-mnr", help="mark-and-recapture unique-statement estimate")
    p.add_argument("--items", required=True)
    p.add_argument("--capture", type=float, default=0.30,
                   help="capture fraction per sample (default 0.30)")
    p.add_argument("--bleu-threshold", type=float, default=0.85,
                   help="recapture similarity threshold (default 0.85)")
    p.add_argument("--seeds", type=int, default=20, help="number of seeded repetitions (default 20)")
    p.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
    p.add_argument("--out", help="JSON report file")
    p.set_defaults(fn=_cmd_eval_mnr)

    p = sub.add_parser("bridge-check", help="conformance-test an external scorer bridge")
    p.add_argument("--cmd", required=True, help="bridge command line (model spec path is appended)")
    p.add_argument("--model-spec", required=True, help="table-model spec JSON shared with the bridge")
    p.add_argument("--jobs", help="optional jobs JSONL (default: built-in fixtures)")
    p.add_argument("--timeout", type=float, default=10.0, help="per-response timeout seconds")
    p.add_argument("--latency-probes", type=int, default=100,
                   help="number of timed logprob calls (default 100)")
    p.add_argument("--out", help="JSON conformance report file")
    _add_decoder_flags(p)
    p.set_defaults(fn=_cmd_bridge_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log_level)
    try:
        return args.fn(args)
    except (InputError, OSError, json.JSONDecodeError) as exc:
        _emit_error(EXIT_INPUT, exc)
        return EXIT_INPUT
    except ConfigError as exc:
        _emit_error(EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except LoopHalted as exc:
        _emit_error(EXIT_HALTED, exc)
        return EXIT_HALTED
    except BridgeError as exc:
        _emit_error(EXIT_BRIDGE, exc)
        return EXIT_BRIDGE
    except GenloopError as exc:
        _emit_error(1, exc)
        return 1


def _emit_error(code: int, exc: Exception) -> None:
    sys.stderr.write(json.dumps(
        {"error": {"code": code, "kind": type(exc).__name__, "message": str(exc)}},
        sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
