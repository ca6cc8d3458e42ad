from __future__ import annotations

from collections import defaultdict
import math

import numpy as np

from ..errors import ConfigError, DataError
from ..records import LabelOutcome, PatientRecord


def stratum_test_count(size: int, fraction: float) -> int:
    """round(fraction * size), halves rounded up."""
    return int(math.floor(fraction * size + 0.5))


def stratified_split(records, labels: dict[str, LabelOutcome], test_fraction: float = 0.2,
                     seed: int = 0) -> tuple[list[str], list[str]]:
    """Draw a test set jointly stratified by (center_id, label).

    EXCLUDED patients are dropped first. Strata are visited in sorted key
    order and each one is shuffled by a single seeded generator, so the
    result depends only on ``seed`` and the cohort contents.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    strata = defaultdict(list)
    for rec in records:
        out = labels[rec.patient_id]
        if out.is_labeled:
            strata[(rec.center_id, out.label)].append(rec.patient_id)
    if not strata:
        raise DataError("no labeled patients to split")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for key in sorted(strata):
        ids = sorted(strata[key])
        order = rng.permutation(len(ids))
        k = stratum_test_count(len(ids), test_fraction)
        test.extend(ids[i] for i in order[:k])
        train.extend(ids[i] for i in order[k:])
    return sorted(train), sorted(test)


def partition_by_center(records) -> dict[int, list[PatientRecord]]:
    """Group records by center, largest first (ties: smaller center_id first)."""
    groups = defaultdict(list)
    for rec in records:
        groups[rec.center_id].append(rec)
    order = sorted(groups, key=lambda c: (-len(groups[c]), c))
    return {c: groups[c] for c in order}
