"""Treatment-failure labeling rules.

Precedence: inconsistent dates, then missing prescription, then qualifying
ER events. Offsets are measured from the first prescription day:

* offset <= 7 (including the index day itself) -> EXCLUDED(EARLY_EVENT)
* 7 < offset <= 365                             -> TF
* otherwise                                     -> CONTROL

Only visits admitted through the emergency room with a TF code on or after
the index day qualify.
"""
from __future__ import annotations

from ..errors import ConfigError
from ..records import (
    CONTROL, EARLY_EVENT, EXCLUDED, INCONSISTENT_DATES, NO_PRESCRIPTION, TF,
    LabelOutcome, PatientRecord, first_prescription_day,
)

EARLY_WINDOW_DAYS = 7
TF_WINDOW_DAYS = 365


def check_code_sets(tf_codes, drug_codes):
    if not tf_codes or not drug_codes:
        raise ConfigError("TF and prescription code sets must be non-empty")
    overlap = set(tf_codes) & set(drug_codes)
    if overlap:
        raise ConfigError(f"TF and prescription code sets overlap: {sorted(overlap)}")


def annotate(record: PatientRecord, tf_codes, drug_codes) -> LabelOutcome:
    check_code_sets(tf_codes, drug_codes)
    days = [v.day for v in record.visits]
    if any(d < 0 for d in days) or any(a > b for a, b in zip(days, days[1:])):
        return LabelOutcome(EXCLUDED, INCONSISTENT_DATES)
    index_day = first_prescription_day(record, drug_codes)
    if index_day is None:
        return LabelOutcome(EXCLUDED, NO_PRESCRIPTION)
    offsets = [
        v.day - index_day for v in record.visits
        if v.er_flag and v.day >= index_day and any(c in tf_codes for c in v.codes)
    ]
    if any(o <= EARLY_WINDOW_DAYS for o in offsets):
        return LabelOutcome(EXCLUDED, EARLY_EVENT, index_day)
    if any(o <= TF_WINDOW_DAYS for o in offsets):
        return LabelOutcome(TF, None, index_day)
    return LabelOutcome(CONTROL, None, index_day)


def annotate_cohort(records, tf_codes, drug_codes) -> dict[str, LabelOutcome]:
    check_code_sets(tf_codes, drug_codes)
    tf_codes, drug_codes = frozenset(tf_codes), frozenset(drug_codes)
    return {r.patient_id: annotate(r, tf_codes, drug_codes) for r in records}
