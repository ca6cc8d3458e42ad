"""Coded-EHR record types and their JSON Lines file formats."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

DIAGNOSIS = "DIAGNOSIS"
PROCEDURE = "PROCEDURE"
PRESCRIPTION = "PRESCRIPTION"
SYSTEMS = (DIAGNOSIS, PRESCRIPTION, PROCEDURE)

TF = "TF"
CONTROL = "CONTROL"
EXCLUDED = "EXCLUDED"
EARLY_EVENT = "EARLY_EVENT"
NO_PRESCRIPTION = "NO_PRESCRIPTION"
INCONSISTENT_DATES = "INCONSISTENT_DATES"


@dataclass(frozen=True, order=True)
class Code:
    """A coded event; identity and ordering are the ``(system, token)`` pair."""

    system: str
    token: str

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown code system {self.system!r}")
        if not self.token:
            raise ValueError("code token must be non-empty")


@dataclass
class Visit:
    day: int
    codes: list[Code]
    er_flag: bool = False


@dataclass
class PatientRecord:
    # Not validated on construction: malformed records (negative days,
    # unsorted visits) are legitimate inputs that the labeler excludes.
    patient_id: str
    center_id: int
    visits: list[Visit] = field(default_factory=list)


@dataclass(frozen=True)
class LabelOutcome:
    label: str
    reason: str | None = None
    index_day: int | None = None

    @property
    def is_labeled(self) -> bool:
        return self.label in (TF, CONTROL)


def first_prescription_day(record: PatientRecord, drug_codes) -> int | None:
    days = [v.day for v in record.visits if any(c in drug_codes for c in v.codes)]
    return min(days) if days else None


# ---------------------------------------------------------------------------
# JSON Lines I/O

def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def record_to_dict(record: PatientRecord) -> dict:
    return {
        "patient_id": record.patient_id,
        "center_id": record.center_id,
        "visits": [
            {"day": v.day, "er": v.er_flag,
             "codes": [{"system": c.system, "token": c.token} for c in v.codes]}
            for v in record.visits
        ],
    }


def record_from_dict(d: dict) -> PatientRecord:
    visits = [
        Visit(day=int(v["day"]), er_flag=bool(v["er"]),
              codes=[Code(c["system"], c["token"]) for c in v["codes"]])
        for v in d["visits"]
    ]
    return PatientRecord(str(d["patient_id"]), int(d["center_id"]), visits)


def _write_lines(path, rows: Iterable[dict]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(_dumps(row))
            fh.write("\n")


def _read_lines(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_cohort(path, records: Iterable[PatientRecord]):
    """One patient per line, ascending ``patient_id``."""
    _write_lines(path, (record_to_dict(r) for r in sorted(records, key=lambda r: r.patient_id)))


def read_cohort(path) -> list[PatientRecord]:
    return [record_from_dict(d) for d in _read_lines(path)]


def write_labels(path, labels: dict[str, LabelOutcome]):
    rows = []
    for pid in sorted(labels):
        out = labels[pid]
        row = {"patient_id": pid, "label": out.label}
        if out.reason is not None:
            row["reason"] = out.reason
        if out.index_day is not None:
            row["index_day"] = out.index_day
        rows.append(row)
    _write_lines(path, rows)


def read_labels(path) -> dict[str, LabelOutcome]:
    return {
        d["patient_id"]: LabelOutcome(d["label"], d.get("reason"), d.get("index_day"))
        for d in _read_lines(path)
    }


def write_split(path, train_ids, test_ids):
    folds = {pid: "train" for pid in train_ids}
    folds.update({pid: "test" for pid in test_ids})
    _write_lines(path, ({"patient_id": pid, "fold": folds[pid]} for pid in sorted(folds)))


def read_split(path) -> tuple[list[str], list[str]]:
    rows = _read_lines(path)
    train = [d["patient_id"] for d in rows if d["fold"] == "train"]
    test = [d["patient_id"] for d in rows if d["fold"] == "test"]
    return train, test


def ensure_parent(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p
