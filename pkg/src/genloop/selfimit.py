"""The self-imitation loop: decode, filter, fine-tune, repeat.

Iteration k decodes every job with model P_k into the pool D_k,
keeps the critic-approved subset D-filtered_k, and fine-tunes P_k on
those statements to produce P_{k+1}. Fine-tuning data is the current
iteration's filtered pool only, never cumulative. An empty filtered pool
halts the loop: fine-tuning on nothing is refused, loudly.

Every run is a pure function of (model, jobs, critic, config): decoding,
filtering and fine-tuning are all deterministic, so two runs with the
same inputs produce byte-identical run directories.

Run directory layout (one directory per iteration)::

    run_dir/p0.bin                  the starting model
    run_dir/iter_k/pool.jsonl       D_k, one generation per line
    run_dir/iter_k/filtered.jsonl   the critic-approved subset
    run_dir/iter_k/model.bin        P_{k+1}
    run_dir/iter_k/report.json      sizes, rates, checkpoint reference
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from . import lm
from .critic import LabeledExample, filter_generations, train_critic
from .decoder import DecodeJob, DecoderConfig, Generation, batch_decode, write_jsonl
from .errors import ConfigError, LoopHalted
from .lm import NGramModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopConfig:
    iterations: int = 3
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    delta: float = 0.5
    mix_weight: float = 1.0
    dedup: bool = True
    seed: int = 0
    parallelism: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError("delta must be in [0, 1]")


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    pool_size: int
    filtered_size: int
    pass_rate: float
    oracle_rate: float | None
    model_ref: str | None

    def to_json(self) -> dict:
        return {"iteration": self.iteration, "pool_size": self.pool_size,
                "filtered_size": self.filtered_size, "pass_rate": self.pass_rate,
                "oracle_rate": self.oracle_rate, "model_ref": self.model_ref}


@dataclass
class LoopResult:
    model: NGramModel
    reports: list[IterationReport]
    pools: list[tuple[list[Generation], list[Generation]]]


def dedup_generations(pool: Iterable[Generation]) -> Iterator[Generation]:
    """Drop exact-text duplicates, keeping each first occurrence."""
    seen: set[str] = set()
    for g in pool:
        if g.text not in seen:
            seen.add(g.text)
            yield g


def run(model: NGramModel, jobs: Sequence[DecodeJob], critic, cfg: LoopConfig,
        run_dir: str | Path | None = None,
        oracle=None,
        retrain_data: Mapping[int, Sequence[LabeledExample]] | None = None,
        finetuner: Callable[[NGramModel, list[str], float], NGramModel] | None = None,
        ) -> LoopResult:
    """Execute the loop for cfg.iterations rounds.

    ``oracle`` (any object with a score method) is consulted on the raw
    pool to report a ground-truth validity rate when one exists.
    ``retrain_data`` maps an iteration index to newly labeled examples;
    the critic is retrained on them before filtering that iteration and
    reused otherwise.
    """
    if not jobs:
        raise ConfigError("the loop needs at least one decode job")
    finetunable = finetuner is not None or isinstance(model, NGramModel)
    if not finetunable and cfg.iterations > 1:
        raise ConfigError("scorer has no fine-tune path; such models are restricted "
                          "to a single decode/filter iteration")
    if finetuner is None and finetunable:
        finetuner = lm.finetune_texts
    root = Path(run_dir) if run_dir is not None else None
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        if hasattr(model, "save"):
            model.save(root / "p0.bin")

    current = model
    reports: list[IterationReport] = []
    pools: list[tuple[list[Generation], list[Generation]]] = []
    for k in range(cfg.iterations):
        if retrain_data and k in retrain_data:
            logger.info("iteration %d: retraining critic on %d new examples",
                        k, len(retrain_data[k]))
            critic = train_critic(list(retrain_data[k]))
        raw = batch_decode(current, jobs, cfg.decoder, parallelism=cfg.parallelism)
        pool = [replace(g, iteration=k) for g in raw]
        if cfg.dedup:
            pool = list(dedup_generations(pool))
        filtered = list(filter_generations(pool, critic, cfg.delta))
        oracle_rate = None
        if oracle is not None and pool:
            oracle_rate = sum(1 for g in pool if oracle.score(g.text) > 0.5) / len(pool)
        pass_rate = len(filtered) / len(pool) if pool else 0.0

        it_dir = None
        if root is not None:
            it_dir = root / f"iter_{k}"
            it_dir.mkdir(exist_ok=True)
            with open(it_dir / "pool.jsonl", "w", encoding="utf-8", newline="\n") as f:
                write_jsonl(pool, f)
            with open(it_dir / "filtered.jsonl", "w", encoding="utf-8", newline="\n") as f:
                write_jsonl(filtered, f)

        if not filtered:
            report = IterationReport(k, len(pool), 0, 0.0, oracle_rate, None)
            reports.append(report)
            _write_report(it_dir, report)
            raise LoopHalted(
                f"iteration {k}: critic filtered out every generation "
                f"(pool={len(pool)}, delta={cfg.delta}); refusing to fine-tune on nothing",
                reports)

        model_ref = None
        if finetunable:
            current = finetuner(current, [g.text for g in filtered], cfg.mix_weight)
            model_ref = f"iter_{k}/model.bin"
            if it_dir is not None and hasattr(current, "save"):
                current.save(it_dir / "model.bin")
        report = IterationReport(k, len(pool), len(filtered), pass_rate, oracle_rate, model_ref)
        reports.append(report)
        _write_report(it_dir, report)
        pools.append((pool, filtered))
        logger.info("iteration %d: pool=%d filtered=%d pass_rate=%.3f oracle=%s",
                    k, len(pool), len(filtered), pass_rate,
                    "n/a" if oracle_rate is None else f"{oracle_rate:.3f}")
    return LoopResult(current, reports, pools)


def _write_report(it_dir: Path | None, report: IterationReport) -> None:
    if it_dir is None:
        return
    with open(it_dir / "report.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(report.to_json(), f, sort_keys=True, indent=2)
        f.write("\n")
