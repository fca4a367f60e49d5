"""SNR sweeps: every model evaluated on the same cases at each SNR bin."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from config.environments.base import BaseSettings
from corpus.mixing import MixCondition
from corpus.world import CorpusWorld
from evaluation.runner import EvalResult, EvalTask, Evaluator, Modality, make_cases

logger = logging.getLogger(__name__)


def snr_bins(lo: float = -8.0, hi: float = 12.0, step: float = 4.0) -> List[float]:
    """Bin values from `lo` to `hi` inclusive; [-8, 12] in 4 dB steps gives 6 bins."""
    if step <= 0 or hi < lo:
        raise ValueError(f"bad SNR grid lo={lo} hi={hi} step={step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [float(lo + i * step) for i in range(n)]


def snr_label(snr_db: Optional[float]) -> str:
    if snr_db is None or math.isinf(snr_db):
        return "inf"
    return f"{snr_db:g}"


@dataclass
class SweepCell:
    model: str
    snr_db: float
    result: EvalResult

    def summary(self) -> Dict[str, Any]:
        turns = self.result.turns
        return {
            "model": self.model,
            "snr": snr_label(self.snr_db),
            "wer": self.result.wer,
            "response_ratio": turns.response_ratio if turns else math.nan,
            "fto_mae": turns.fto_mae if turns else math.nan,
            "median_fto": turns.median_fto if turns else math.nan,
            "perplexity": self.result.perplexity,
            "n": self.result.n,
        }


@dataclass
class SweepReport:
    """Per-model, per-bin metrics for one condition.

    Attributes:
        condition: Corruption kind
        task: Evaluated task
        modality: Input modality
        bins: SNR values in dB; CLEAN has the single bin inf
        cells: One cell per (model, bin), sorted by model then bin
    """

    condition: MixCondition
    task: EvalTask
    modality: Modality
    bins: List[float]
    cells: List[SweepCell] = field(default_factory=list)
    seed: int = 0

    def cell(self, model: str, snr_db: float) -> SweepCell:
        for c in self.cells:
            if c.model == model and c.snr_db == snr_db:
                return c
        raise KeyError(f"no cell for {model} at {snr_label(snr_db)} dB")

    def series(self, model: str, metric: str) -> List[float]:
        return [self.cell(model, b).summary()[metric] for b in self.bins]

    def rows(self) -> List[Dict[str, Any]]:
        return [{"condition": self.condition.value, "task": self.task.value, "modality": self.modality.value, **c.summary()} for c in self.cells]


def sweep_snr(
    models: Mapping[str, Evaluator],
    condition: MixCondition,
    world: CorpusWorld,
    settings: BaseSettings,
    seed: int,
    task: EvalTask = EvalTask.AVSR,
    modality: Modality = Modality.AUDIO_VISUAL,
    bins: Optional[Sequence[float]] = None,
    samples_per_bin: Optional[int] = None,
) -> SweepReport:
    """Evaluate every model at every SNR bin of `condition`.

    All models see the same cases in a bin: case seeds depend on (seed,
    condition, bin, sample index) only.

    Args:
        models: Name -> evaluator
        condition: CLEAN, BG or INTERF
        world: Corpus world supplying held-out conversations
        settings: Run settings (augment.eval_snr_range, eval section)
        seed: Sweep seed
        task: Metric family
        modality: Input masking applied to every model
        bins: SNR values; defaults to the eval range in `eval.sweep_step_db` steps
        samples_per_bin: Cases per bin; defaults to `eval.samples_per_bin`
    """
    condition = MixCondition(condition)
    if condition == MixCondition.CLEAN:
        bins = [math.inf]
    elif bins is None:
        lo, hi = settings.augment.eval_snr_range
        bins = snr_bins(lo, hi, settings.eval.sweep_step_db)
    n = settings.eval.samples_per_bin if samples_per_bin is None else samples_per_bin

    report = SweepReport(condition, EvalTask(task), Modality(modality), list(bins), seed=seed)
    for snr in report.bins:
        cases = make_cases(world, condition, n, seed, None if math.isinf(snr) else snr)
        for name in sorted(models):
            result = models[name].evaluate(cases, task, modality, condition.value, snr)
            report.cells.append(SweepCell(name, snr, result))
    report.cells.sort(key=lambda c: (c.model, c.snr_db))
    logger.info(f"Sweep {condition.value}/{report.task.value}: {len(models)} models x {len(report.bins)} bins x {n} samples")
    return report


def mean_over(report: SweepReport, model: str, metric: str, lo: float = -math.inf, hi: float = math.inf) -> float:
    """Mean of `metric` over the bins in [lo, hi]."""
    values = [v for b, v in zip(report.bins, report.series(model, metric)) if lo <= b <= hi]
    return float(np.mean(values)) if values else math.nan
