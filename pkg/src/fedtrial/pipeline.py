"""Encode labeled records into per-center training shards plus a test set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort.split import partition_by_center
from .encoding import DEFAULT_MAX_SEQ_LEN, Vocabulary, encode_multi_hot, encode_sequence
from .federated import ClientData
from .nn import FCN
from .records import TF, LabelOutcome, PatientRecord


@dataclass
class ExperimentData:
    partitions: dict[int, ClientData]   # training shards, largest center first
    test: ClientData
    input_dim: int

    @property
    def pooled(self) -> ClientData:
        return ClientData.concat([self.partitions[c] for c in sorted(self.partitions)])

    @property
    def center_order(self) -> list[int]:
        return list(self.partitions)


def encode_records(records: list[PatientRecord], labels: dict[str, LabelOutcome], vocab: Vocabulary,
                   kind: str, max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> ClientData:
    y = np.array([1.0 if labels[r.patient_id].label == TF else 0.0 for r in records])
    if kind == FCN:
        x = np.zeros((len(records), vocab.size))
        for i, r in enumerate(records):
            x[i] = encode_multi_hot(r, labels[r.patient_id].index_day, vocab)
        return ClientData(x, y)
    seqs = [encode_sequence(r, labels[r.patient_id].index_day, vocab, max_seq_len) for r in records]
    return ClientData(seqs, y)


def build_experiment_data(records, labels, train_ids, test_ids, vocab: Vocabulary, kind: str,
                          max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> ExperimentData:
    by_id = {r.patient_id: r for r in records}
    train = [by_id[p] for p in sorted(train_ids)]
    test = [by_id[p] for p in sorted(test_ids)]
    parts = {
        cid: encode_records(recs, labels, vocab, kind, max_seq_len)
        for cid, recs in partition_by_center(train).items()
    }
    return ExperimentData(parts, encode_records(test, labels, vocab, kind, max_seq_len), vocab.size)
