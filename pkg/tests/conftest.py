import numpy as np
import pytest

from fedtrial.cohort import (
    CLOPIDOGREL_CODES, TF_CODES, GeneratorConfig, annotate_cohort, generate_cohort, stratified_split,
)
from fedtrial.encoding import build_vocabulary
from fedtrial.pipeline import build_experiment_data
from fedtrial.records import DIAGNOSIS, PRESCRIPTION, PROCEDURE, Code, PatientRecord, Visit

CLOPI = sorted(CLOPIDOGREL_CODES)[0]
TF_CODE = sorted(TF_CODES)[0]


def make_record(pid="P1", center=1, index_day=100, history=(), events=()):
    """history: [(day, [codes])]; events: [(day, [codes], er)]."""
    visits = [Visit(d, list(codes), False) for d, codes in history]
    visits.append(Visit(index_day, [CLOPI], False))
    visits += [Visit(d, list(codes), er) for d, codes, er in events]
    visits.sort(key=lambda v: v.day)
    return PatientRecord(pid, center, visits)


def dx(token):
    return Code(DIAGNOSIS, token)


def rx(token):
    return Code(PRESCRIPTION, token)


def px(token):
    return Code(PROCEDURE, token)


@pytest.fixture(scope="session")
def small_cohort():
    cfg = GeneratorConfig(n_patients=1000, n_centers=5, center_decay=0.6, seed=7)
    records = generate_cohort(cfg)
    labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
    return records, labels


@pytest.fixture(scope="session")
def small_experiment(small_cohort):
    records, labels = small_cohort
    train, test = stratified_split(records, labels, 0.2, 3)
    by_id = {r.patient_id: r for r in records}
    vocab = build_vocabulary([by_id[p] for p in train])
    return {
        kind: build_experiment_data(records, labels, train, test, vocab, kind)
        for kind in ("FCN", "GRU")
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
