import random
from collections import Counter

import pytest

from fedtrial.cohort import (
    CLOPIDOGREL_CODES, TF_CODES, GeneratorConfig, annotate, center_sizes,
    generate_cohort, partition_by_center, stratified_split, stratum_test_count,
)
from fedtrial.errors import ConfigError, DataError
from fedtrial.records import (
    CONTROL, EARLY_EVENT, EXCLUDED, INCONSISTENT_DATES, NO_PRESCRIPTION, TF, LabelOutcome,
    PatientRecord, Visit, read_cohort, read_labels, read_split, write_cohort, write_labels, write_split,
)

from conftest import CLOPI, TF_CODE, dx, make_record


def label(record):
    return annotate(record, TF_CODES, CLOPIDOGREL_CODES)


# --- annotate ---------------------------------------------------------------

def test_tf_within_year():
    out = label(make_record(events=[(200, [TF_CODE], True)]))
    assert out == LabelOutcome(TF, None, 100)


def test_early_event_excluded():
    assert label(make_record(events=[(103, [TF_CODE], True)])) == LabelOutcome(EXCLUDED, EARLY_EVENT, 100)


def test_non_er_event_is_control():
    assert label(make_record(events=[(200, [TF_CODE], False)])) == LabelOutcome(CONTROL, None, 100)


def test_event_after_window_is_control():
    assert label(make_record(events=[(480, [TF_CODE], True)])).label == CONTROL


@pytest.mark.parametrize("day,expected", [
    (100, EXCLUDED), (107, EXCLUDED), (108, TF), (465, TF), (466, CONTROL), (99, CONTROL),
])
def test_window_boundaries(day, expected):
    assert label(make_record(events=[(day, [TF_CODE], True)])).label == expected


def test_early_event_wins_over_later_tf():
    r = make_record(events=[(102, [TF_CODE], True), (200, [TF_CODE], True)])
    assert label(r).reason == EARLY_EVENT


def test_no_prescription():
    r = PatientRecord("P", 1, [Visit(5, [dx("A00.1")], False), Visit(50, [TF_CODE], True)])
    assert label(r) == LabelOutcome(EXCLUDED, NO_PRESCRIPTION)


@pytest.mark.parametrize("visits", [
    [Visit(-1, [dx("A")], False), Visit(100, [CLOPI], False)],
    [Visit(100, [CLOPI], False), Visit(50, [dx("A")], False)],
])
def test_inconsistent_dates(visits):
    assert label(PatientRecord("P", 1, visits)) == LabelOutcome(EXCLUDED, INCONSISTENT_DATES)


def test_index_is_first_prescription():
    r = make_record(index_day=300, history=[(100, [CLOPI])], events=[(250, [TF_CODE], True)])
    assert label(r) == LabelOutcome(TF, None, 100)


def test_overlapping_code_sets_rejected():
    with pytest.raises(ConfigError):
        annotate(make_record(), TF_CODES | CLOPIDOGREL_CODES, CLOPIDOGREL_CODES)
    with pytest.raises(ConfigError):
        annotate(make_record(), set(), CLOPIDOGREL_CODES)


def test_annotate_invariant_to_resorting(small_cohort):
    records, labels = small_cohort
    rnd = random.Random(0)
    for r in records[:200]:
        shuffled = list(r.visits)
        rnd.shuffle(shuffled)
        resorted = PatientRecord(r.patient_id, r.center_id, sorted(shuffled, key=lambda v: v.day))
        assert label(resorted) == labels[r.patient_id]


# --- generator --------------------------------------------------------------

def test_generator_deterministic():
    cfg = GeneratorConfig(n_patients=300, n_centers=6, seed=4)
    a, b = generate_cohort(cfg), generate_cohort(cfg)
    assert a == b
    assert generate_cohort(GeneratorConfig(n_patients=300, n_centers=6, seed=5)) != a


def test_center_sizes_geometric():
    sizes = center_sizes(9867, 22, 0.75)
    assert sizes.sum() == 9867
    assert list(sizes) == sorted(sizes, reverse=True)
    assert sizes.max() > 1000 and sizes.min() < 10


def test_infeasible_size_schedule():
    with pytest.raises(ConfigError):
        center_sizes(30, 22, 0.5)
    with pytest.raises(ConfigError):
        generate_cohort(GeneratorConfig(n_patients=10, n_centers=22))
    with pytest.raises(ConfigError):
        generate_cohort(GeneratorConfig(tf_fraction=1.5))


def test_generator_structure(small_cohort):
    records, labels = small_cohort
    assert len({r.patient_id for r in records}) == len(records)
    counts = Counter(o.label for o in labels.values())
    assert counts[TF] + counts[CONTROL] + counts[EXCLUDED] == len(records)
    for r in records:
        n_rx = sum(1 for v in r.visits if any(c in CLOPIDOGREL_CODES for c in v.codes))
        out = labels[r.patient_id]
        assert n_rx == (0 if out.reason == NO_PRESCRIPTION else 1)
        assert all(v.codes for v in r.visits)
        if out.reason != INCONSISTENT_DATES:
            assert [v.day for v in r.visits] == sorted(v.day for v in r.visits)


def test_cohort_file_round_trip(tmp_path, small_cohort):
    records, labels = small_cohort
    shuffled = list(records)
    random.Random(1).shuffle(shuffled)
    write_cohort(tmp_path / "c.jsonl", shuffled)
    back = read_cohort(tmp_path / "c.jsonl")
    assert back == sorted(records, key=lambda r: r.patient_id)
    first = (tmp_path / "c.jsonl").read_text().splitlines()[0]
    assert first.startswith('{"patient_id":') and '"visits":[{"day":' in first and '"er":' in first
    write_labels(tmp_path / "l.jsonl", labels)
    assert read_labels(tmp_path / "l.jsonl") == labels


# --- split ------------------------------------------------------------------

def labeled_cohort(sizes):
    """sizes: {(center, label): n}"""
    records, labels = [], {}
    i = 0
    for (center, lab), n in sizes.items():
        for _ in range(n):
            pid = f"P{i:05d}"
            records.append(PatientRecord(pid, center, []))
            labels[pid] = LabelOutcome(lab, None, 100)
            i += 1
    return records, labels


def test_stratum_rounding():
    assert stratum_test_count(10, 0.2) == 2
    assert stratum_test_count(1, 0.2) == 0
    assert stratum_test_count(3, 0.5) == 2
    records, labels = labeled_cohort({(1, TF): 10, (1, CONTROL): 1, (2, CONTROL): 7})
    train, test = stratified_split(records, labels, 0.2, 0)
    by = {r.patient_id: r for r in records}
    got = Counter((by[p].center_id, labels[p].label) for p in test)
    assert got == Counter({(1, TF): 2, (2, CONTROL): 1})


def test_split_drops_excluded_and_partitions(small_cohort):
    records, labels = small_cohort
    train, test = stratified_split(records, labels, 0.2, 9)
    labeled = {p for p, o in labels.items() if o.is_labeled}
    assert not set(train) & set(test)
    assert set(train) | set(test) == labeled


def test_split_determinism():
    records, labels = labeled_cohort({(1, TF): 300, (1, CONTROL): 500, (2, CONTROL): 200})
    a = stratified_split(records, labels, 0.2, 5)
    assert a == stratified_split(records, labels, 0.2, 5)
    assert a[1] != stratified_split(records, labels, 0.2, 6)[1]


def test_split_per_center_counts(small_cohort):
    records, labels = small_cohort
    train, test = stratified_split(records, labels, 0.2, 1)
    by = {r.patient_id: r for r in records}
    total = Counter((by[p].center_id, labels[p].label) for p in train + test)
    got = Counter((by[p].center_id, labels[p].label) for p in test)
    for key, n in total.items():
        assert abs(got[key] - 0.2 * n) <= 1


def test_split_errors():
    with pytest.raises(DataError):
        stratified_split([], {}, 0.2, 0)
    records, labels = labeled_cohort({(1, TF): 3})
    for frac in (0.0, 1.0):
        with pytest.raises(ConfigError):
            stratified_split(records, labels, frac, 0)


def test_split_file_round_trip(tmp_path):
    write_split(tmp_path / "s.jsonl", ["P2", "P1"], ["P3"])
    assert (tmp_path / "s.jsonl").read_text().splitlines()[0] == '{"patient_id":"P1","fold":"train"}'
    assert read_split(tmp_path / "s.jsonl") == (["P1", "P2"], ["P3"])


# --- partition --------------------------------------------------------------

def test_partition_empty():
    assert partition_by_center([]) == {}


def test_partition_tie_order():
    records = ([PatientRecord(f"a{i}", 9, []) for i in range(5)]
               + [PatientRecord(f"b{i}", 4, []) for i in range(50)]
               + [PatientRecord(f"c{i}", 2, []) for i in range(50)])
    assert list(partition_by_center(records)) == [2, 4, 9]


def test_partition_default_like_cohort(small_cohort):
    records, _ = small_cohort
    parts = partition_by_center(records)
    assert sum(len(v) for v in parts.values()) == len(records)
    sizes = Counter(r.center_id for r in records)
    assert list(parts) == [c for c, _ in sorted(sizes.items(), key=lambda kv: (-kv[1], kv[0]))]
    for cid, recs in parts.items():
        assert all(r.center_id == cid for r in recs)


def test_default_targets_match_reported_counts():
    cfg = GeneratorConfig()
    assert cfg.n_patients == 9867 and cfg.n_centers == 22
    assert round(cfg.excluded_fraction * 9867) == 1184
    assert round(cfg.tf_fraction * (9867 - 1184)) == 1824
    assert 9867 - 1184 - 1824 == 6859
