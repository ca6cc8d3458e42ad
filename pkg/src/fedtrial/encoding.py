"""Code vocabularies and the two patient encoders (multi-hot for FCN, flattened index sequence for GRU).

Only events strictly before the index day (first clopidogrel prescription)
are used as features.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .records import Code, PatientRecord, first_prescription_day

UNKNOWN_INDEX = 0
UNKNOWN_TOKEN = "<UNK>"
DEFAULT_MAX_SEQ_LEN = 256


def pre_index_visits(record: PatientRecord, index_day: int):
    """Visits before ``index_day`` in canonical (day, sorted codes) order."""
    visits = [v for v in record.visits if v.day < index_day]
    return sorted(visits, key=lambda v: (v.day, sorted(v.codes)))


@dataclass
class Vocabulary:
    """Index 0 is reserved for unknown codes; known codes follow in (system, token) order."""

    codes: list[Code] = field(default_factory=list)

    def __post_init__(self):
        self.codes = sorted(set(self.codes))
        self._index = {c: i + 1 for i, c in enumerate(self.codes)}

    @property
    def size(self) -> int:
        return len(self.codes) + 1

    def __len__(self):
        return self.size

    def __contains__(self, code):
        return code in self._index

    def index(self, code: Code) -> int:
        return self._index.get(code, UNKNOWN_INDEX)

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps({"system": None, "token": UNKNOWN_TOKEN, "index": 0}) + "\n")
            for i, c in enumerate(self.codes, start=1):
                fh.write(json.dumps({"system": c.system, "token": c.token, "index": i}) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        rows.sort(key=lambda r: r["index"])
        if not rows or rows[0]["index"] != 0:
            raise ValueError(f"{path}: vocabulary must start with the UNKNOWN entry at index 0")
        vocab = cls([Code(r["system"], r["token"]) for r in rows[1:]])
        for r in rows[1:]:
            if vocab.index(Code(r["system"], r["token"])) != r["index"]:
                raise ValueError(f"{path}: indices are not in canonical (system, token) order")
        return vocab


def count_codes(records, drug_codes) -> Counter:
    counts = Counter()
    for rec in records:
        index_day = first_prescription_day(rec, drug_codes)
        if index_day is None:
            continue
        for v in rec.visits:
            if v.day < index_day:
                counts.update(v.codes)
    return counts


def build_vocabulary(records, min_count: int = 1, drug_codes=None) -> Vocabulary:
    """Vocabulary of pre-index codes seen at least ``min_count`` times.

    Must be given training records only. ``drug_codes`` identifies the index
    prescription; defaults to the generator's clopidogrel code set.
    """
    if drug_codes is None:
        from .cohort.generator import CLOPIDOGREL_CODES
        drug_codes = CLOPIDOGREL_CODES
    counts = count_codes(records, drug_codes)
    return Vocabulary([c for c, n in counts.items() if n >= max(min_count, 1)])


def encode_multi_hot(record: PatientRecord, index_day: int, vocab: Vocabulary) -> np.ndarray:
    x = np.zeros(vocab.size)
    for v in record.visits:
        if v.day < index_day:
            for c in v.codes:
                x[vocab.index(c)] = 1.0
    return x


def encode_sequence(record: PatientRecord, index_day: int, vocab: Vocabulary,
                    max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> np.ndarray:
    """Pre-index codes flattened chronologically, keeping the most recent ``max_seq_len``."""
    tokens = []
    for v in pre_index_visits(record, index_day):
        tokens.extend(vocab.index(c) for c in sorted(v.codes))
    if max_seq_len is not None and len(tokens) > max_seq_len:
        tokens = tokens[len(tokens) - max_seq_len:]
    return np.asarray(tokens, dtype=np.int64)
