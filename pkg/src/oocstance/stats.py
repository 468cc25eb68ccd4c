"""SRS distribution summaries, heatmap data export and a one-tail z-test."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import LABELS, ClaimInstance
from .srs import SrsConfig, srs_vector

SUMMARY_SCENARIOS = ("a", "b", "c", "d", "merged")
HEATMAP_COLUMNS = ("scenario", "label", "mean", "std", "count")


@dataclass(frozen=True)
class Cell:
    mean: float
    std: float
    count: int


@dataclass
class SrsSummary:
    """(scenario, label) -> Cell of per-instance mean SRS.

    ``std`` is the population standard deviation of the per-instance means.
    Instances without textual evidence are left out and tallied in
    ``skipped``.
    """

    cells: dict = field(default_factory=dict)
    skipped: int = 0


def instance_mean_srs(inst: ClaimInstance, config: SrsConfig = SrsConfig()) -> float | None:
    scores = srs_vector(inst.text_entities, inst.caption_entities, config)
    return float(np.mean(scores)) if scores else None


def _cell(values: list[float]) -> Cell:
    if not values:
        return Cell(0.0, 0.0, 0)
    arr = np.asarray(values)
    return Cell(float(arr.mean()), float(arr.std()), len(values))


def summarize_srs(instances: Sequence[ClaimInstance], config: SrsConfig = SrsConfig()) -> SrsSummary:
    groups = {(s, l): [] for s in SUMMARY_SCENARIOS for l in LABELS}
    skipped = 0
    for inst in instances:
        m = instance_mean_srs(inst, config)
        if m is None:
            skipped += 1
            continue
        if inst.scenario in SUMMARY_SCENARIOS:
            groups[(inst.scenario, inst.label)].append(m)
        groups[("merged", inst.label)].append(m)
    return SrsSummary({k: _cell(v) for k, v in groups.items()}, skipped)


def export_heatmap(summary: SrsSummary, path, delimiter: str = "\t") -> None:
    """One row per populated cell, fixed column order, 6 decimals."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(HEATMAP_COLUMNS)
        for (scen, label), c in summary.cells.items():
            if c.count == 0:
                continue
            w.writerow([scen, label, f"{c.mean:.6f}", f"{c.std:.6f}", c.count])


def read_heatmap(path, delimiter: str = "\t") -> SrsSummary:
    cells = {}
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh, delimiter=delimiter)
        header = next(r, None)
        if header is None or tuple(header) != HEATMAP_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in r:
            scen, label, mean, std, count = row
            cells[(scen, label)] = Cell(float(mean), float(std), int(count))
    return SrsSummary(cells)


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_value: float
    gamma: float
    n_pristine: int
    n_falsified: int
    mean_pristine: float
    mean_falsified: float


def normal_sf(z: float) -> float:
    """Upper tail ``1 - Phi(z)`` via erfc (no cancellation for large z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def ztest(pristine: Sequence[float], falsified: Sequence[float], gamma: float = 0.0) -> ZTestResult:
    """Two-sample one-tail z-test of H0: mu_p - mu_f <= gamma.

    Uses sample variances (n - 1 denominator).
    """
    p = np.asarray(pristine, dtype=np.float64)
    f = np.asarray(falsified, dtype=np.float64)
    if p.size < 2 or f.size < 2:
        raise ValueError("each sample needs at least 2 observations")
    diff = p.mean() - f.mean() - gamma
    se = math.sqrt(p.var(ddof=1) / p.size + f.var(ddof=1) / f.size)
    if se == 0:
        if diff == 0:
            raise ValueError("z undefined: zero variance and zero mean difference")
        z = math.copysign(math.inf, diff)
    else:
        z = diff / se
    return ZTestResult(float(z), normal_sf(z), gamma, p.size, f.size, float(p.mean()), float(f.mean()))


def ztest_from_summary(mean_p, std_p, n_p, mean_f, std_f, n_f, gamma=0.0) -> ZTestResult:
    """Same statistic from summary values (``std`` are sample deviations)."""
    z = (mean_p - mean_f - gamma) / math.sqrt(std_p**2 / n_p + std_f**2 / n_f)
    return ZTestResult(z, normal_sf(z), gamma, n_p, n_f, mean_p, mean_f)


def sample_srs_ztest(
    instances: Sequence[ClaimInstance],
    gamma: float,
    sample_size: int,
    seed: int = 0,
    config: SrsConfig = SrsConfig(),
) -> ZTestResult:
    """Draw ``sample_size`` instances per label (without replacement) and
    test their per-instance mean SRS."""
    by_label = {l: [] for l in LABELS}
    for inst in instances:
        m = instance_mean_srs(inst, config)
        if m is not None:
            by_label[inst.label].append(m)
    rng = np.random.default_rng(seed)
    draws = {}
    for l in LABELS:
        vals = by_label[l]
        if len(vals) < sample_size:
            raise ValueError(f"only {len(vals)} {l} instances with textual evidence; asked for {sample_size}")
        draws[l] = np.asarray(vals)[np.sort(rng.choice(len(vals), size=sample_size, replace=False))]
    return ztest(draws["pristine"], draws["falsified"], gamma)
