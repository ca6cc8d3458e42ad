"""Acceptance suite: one PASS/FAIL line per criterion, each at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the directional
replication (criterion 6) takes roughly a quarter of an hour.
"""
import time
from collections import Counter

import numpy as np
import pytest

from fedtrial.cli import main
from fedtrial.cohort import (
    CLOPIDOGREL_CODES, TF_CODES, GeneratorConfig, annotate, annotate_cohort, generate_cohort,
    stratified_split,
)
from fedtrial.experiment import replicate, replication_preset
from fedtrial.federated import ClientData, ClientUpdate, FederatedConfig, fedavg_aggregate, run_federated
from fedtrial.metrics import roc_auc
from fedtrial.nn import (
    FCN, GRU, SGD, ArchitectureSpec, ModelParameters, finite_difference_check, init_parameters,
    loss_and_grad,
)
from fedtrial.records import (
    CONTROL, DIAGNOSIS, EARLY_EVENT, EXCLUDED, PROCEDURE, TF, Code, LabelOutcome, PatientRecord, Visit,
)


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


# 1 -----------------------------------------------------------------------------

def test_ac1_gradient_correctness(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = {FCN: 0.0, GRU: 0.0}
    for kind in (FCN, GRU):
        for i in range(20):
            dim = int(rng.integers(2, 12))
            n = int(rng.integers(1, 9))
            if kind == FCN:
                hidden = tuple(int(h) for h in rng.integers(1, 8, size=rng.integers(1, 4)))
                spec = ArchitectureSpec(FCN, dim, hidden, seed=i)
                batch = [(rng.integers(0, 2, dim).astype(float), int(rng.integers(0, 2))) for _ in range(n)]
            else:
                spec = ArchitectureSpec(GRU, dim, (int(rng.integers(1, 7)),), int(rng.integers(1, 5)), seed=i)
                batch = [(rng.integers(0, dim, int(rng.integers(0, 9))), int(rng.integers(0, 2)))
                         for _ in range(n)]
            worst[kind] = max(worst[kind], finite_difference_check(spec, batch, 1e-5))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-4 and elapsed < 60
    report("AC1 gradient correctness", ok,
           f"max rel err FCN {worst[FCN]:.2e}, GRU {worst[GRU]:.2e} (< 1e-4); {elapsed:.1f}s (< 60s)")


# 2 -----------------------------------------------------------------------------

def pair_oracle(scores, labels):
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    return float(((pos > neg) + 0.5 * (pos == neg)).sum() / (pos.size * neg.size))


def test_ac2_auc_oracle(report):
    rng = np.random.default_rng(7)
    worst, tie_heavy = 0.0, 0
    for i in range(100):
        n = int(rng.integers(2, 201))
        if i % 2:
            scores = rng.integers(0, int(rng.integers(1, 6)), n) / 4.0   # few distinct values
            tie_heavy += 1
        else:
            scores = rng.random(n)
        labels = rng.integers(0, 2, n)
        labels[0], labels[-1] = 0, 1
        worst = max(worst, abs(roc_auc(scores, labels) - pair_oracle(scores, labels)))
    report("AC2 AUC oracle equivalence", worst <= 1e-12,
           f"max |rank - pairs| = {worst:.1e} over 100 sets ({tie_heavy} tie-heavy), tol 1e-12")


# 3 -----------------------------------------------------------------------------

def test_ac3_fedavg_algebra(report):
    rng = np.random.default_rng(3)
    spec = ArchitectureSpec(FCN, 5, (4,), seed=1)
    p = init_parameters(spec)
    identity = np.array_equal(fedavg_aggregate([ClientUpdate(4, p, 123)]).values, p.values)

    def shard(n):
        x = rng.integers(0, 2, (n, 5)).astype(float)
        return ClientData(x, rng.integers(0, 2, n).astype(float))
    a, b = shard(7), shard(11)
    cfg = FederatedConfig(spec, rounds=1, batch_size=1000, optimizer=SGD, learning_rate=0.5)
    fed, _ = run_federated(cfg, {1: a, 2: b}, None, p)
    ga, gb = loss_and_grad(p, a.inputs, a.labels)[1], loss_and_grad(p, b.inputs, b.labels)[1]
    pooled = p.values - 0.5 * (7 * ga + 11 * gb) / 18
    fedsgd_err = float(np.max(np.abs(fed.values - pooled)))

    ups = [ClientUpdate(c, ModelParameters(spec, rng.normal(size=p.values.size)), int(n))
           for c, n in zip(range(6), rng.integers(1, 500, 6))]
    base = fedavg_aggregate(ups).values
    perm_ok = all(np.array_equal(fedavg_aggregate([ups[i] for i in rng.permutation(6)]).values, base)
                  for _ in range(20))
    scale_ok = all(np.array_equal(
        fedavg_aggregate([ClientUpdate(u.center_id, u.params, u.sample_count * s) for u in ups]).values, base)
        for s in (2, 3, 10, 977))
    ok = identity and fedsgd_err <= 1e-10 and perm_ok and scale_ok
    report("AC3 FedAvg algebra", ok,
           f"identity {identity}; FedSGD max err {fedsgd_err:.1e} (<= 1e-10); "
           f"permutation bit-identical {perm_ok}; scaling bit-identical {scale_ok}")


# 4 -----------------------------------------------------------------------------

INDEX = 100
DRUG = sorted(CLOPIDOGREL_CODES)[0]
TF_DX = Code(DIAGNOSIS, "I63.9")
MEMBERSHIP = {
    "tf_diagnosis": [TF_DX],
    "tf_procedure": [Code(PROCEDURE, "K75.4")],
    "non_tf": [Code(DIAGNOSIS, "R07.4")],
    "tf_token_wrong_system": [Code(PROCEDURE, "I63.9")],
}


def rule_table(offset, er, membership):
    qualifying = er and membership in ("tf_diagnosis", "tf_procedure")
    if qualifying and 0 <= offset <= 7:
        return LabelOutcome(EXCLUDED, EARLY_EVENT, INDEX)
    if qualifying and 8 <= offset <= 365:
        return LabelOutcome(TF, None, INDEX)
    return LabelOutcome(CONTROL, None, INDEX)


def test_ac4_labeling_oracle(report):
    assert TF_DX in TF_CODES
    total = agree = 0
    for offset in range(-1, 401):
        for er in (False, True):
            for membership, codes in MEMBERSHIP.items():
                visits = sorted([Visit(INDEX, [DRUG], False), Visit(INDEX + offset, codes, er)],
                                key=lambda v: v.day)
                got = annotate(PatientRecord("M", 1, visits), TF_CODES, CLOPIDOGREL_CODES)
                total += 1
                agree += got == rule_table(offset, er, membership)
    report("AC4 labeling oracle", agree == total,
           f"{agree}/{total} micro-records agree (offsets -1..400 x er x {len(MEMBERSHIP)} memberships)")


# 5 -----------------------------------------------------------------------------

def test_ac5_cohort_calibration(report):
    t0 = time.perf_counter()
    records = generate_cohort(GeneratorConfig())
    labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
    elapsed = time.perf_counter() - t0
    sizes = Counter(r.center_id for r in records)
    counts = Counter(o.label for o in labels.values())
    n = len(records)
    target = {TF: 1824, CONTROL: 6859, EXCLUDED: 1184}
    dev = {k: abs(counts[k] / n - v / 9867) for k, v in target.items()}
    ok = (n == 9867 and len(sizes) == 22 and max(sizes.values()) > 1000 and min(sizes.values()) < 10
          and max(dev.values()) <= 0.02 and elapsed < 60)
    report("AC5 cohort calibration", ok,
           f"n={n}, centers={len(sizes)}, max={max(sizes.values())}, min={min(sizes.values())}, "
           f"TF/CONTROL/EXCLUDED={counts[TF]}/{counts[CONTROL]}/{counts[EXCLUDED]} "
           f"(max dev {100 * max(dev.values()):.2f} pp <= 2), {elapsed:.1f}s (< 60s)")


# 6 -----------------------------------------------------------------------------

SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def replication():
    t0 = time.perf_counter()
    results = [replicate(replication_preset(s)) for s in SEEDS]
    return results, time.perf_counter() - t0


def _lines(results, fn):
    return "; ".join(f"seed {r.seed}: {fn(r)}" for r in results)


def test_ac6_runtime(replication, report):
    _, elapsed = replication
    report("AC6 runtime", elapsed <= 30 * 60, f"3 seeds in {elapsed / 60:.1f} min (<= 30)")


def test_ac6a_gru_beats_fcn(replication, report):
    results, _ = replication
    ok = all(r.results[GRU].central_auc > r.results[FCN].central_auc for r in results)
    report("AC6a centralized GRU > FCN", ok,
           _lines(results, lambda r: f"GRU {r.results[GRU].central_auc:.3f} vs FCN {r.results[FCN].central_auc:.3f}"))


def test_ac6b_local_below_central(replication, report):
    results, _ = replication
    ok = all(a.mean_local_auc < a.central_auc for r in results for a in r.results.values())
    report("AC6b mean local < centralized", ok, _lines(results, lambda r: ", ".join(
        f"{k} {a.mean_local_auc:.3f}<{a.central_auc:.3f}" for k, a in r.results.items())))


def test_ac6c_size_auc_correlation(replication, report):
    results, _ = replication
    ok = all(a.size_auc_spearman > 0 for r in results for a in r.results.values())
    report("AC6c Spearman(size, local AUC) > 0", ok, _lines(results, lambda r: ", ".join(
        f"{k} {a.size_auc_spearman:.3f}" for k, a in r.results.items())))


def test_ac6d_sweep_closes_gap(replication, report):
    results, _ = replication
    ok = all(abs(a.central_auc - a.best_sweep_auc) <= 0.05 for r in results for a in r.results.values())
    report("AC6d best sweep within 0.05 of centralized", ok, _lines(results, lambda r: ", ".join(
        f"{k} {a.best_sweep_auc:.3f}@k={a.best_sweep_k} vs {a.central_auc:.3f}" for k, a in r.results.items())))


# 7 -----------------------------------------------------------------------------

TINY = """\
seed = 5
[generator]
n_patients = 80
n_centers = 3
center_decay = 0.7
[model]
kind = "{kind}"
fcn_hidden = [8]
gru_hidden = 6
embedding_dim = 4
[training]
rounds = 3
batch_size = 16
optimizer = "{opt}"
learning_rate = {lr}
"""

CSV_FILES = {"central": ["metrics.csv"], "federated": ["metrics.csv"], "local": ["local_auc.csv"],
             "sweep": ["sweep.csv", "sweep_k01.csv", "sweep_k02.csv", "sweep_k03.csv"]}


def test_ac7_determinism(tmp_path, report, capsys):
    mismatches, compared = [], 0
    for kind, opt, lr in ((FCN, "SGD", 0.3), (GRU, "ADAM", 0.01)):
        cfg = tmp_path / f"{kind}.toml"
        cfg.write_text(TINY.format(kind=kind, opt=opt, lr=lr))
        assert main(["generate", "--config", str(cfg)]) == 0
        assert main(["split", "--config", str(cfg)]) == 0
        for scenario, files in CSV_FILES.items():
            snapshots = []
            for _ in range(2):
                assert main(["run", scenario, "--config", str(cfg)]) == 0
                run_dir = tmp_path / "runs" / f"{scenario}-{kind.lower()}"
                snapshots.append({f: (run_dir / f).read_bytes() for f in files + ["manifest.json"]})
            for f in files:
                compared += 1
                if snapshots[0][f] != snapshots[1][f]:
                    mismatches.append(f"{scenario}-{kind}/{f}")
            assert snapshots[0]["manifest.json"] == snapshots[1]["manifest.json"]
    capsys.readouterr()
    report("AC7 determinism", not mismatches,
           f"{compared - len(mismatches)}/{compared} metrics CSVs byte-identical across reruns"
           + (f"; differing: {mismatches}" if mismatches else ""))


# 8 -----------------------------------------------------------------------------

def test_ac8_stratified_split(report):
    records = generate_cohort(GeneratorConfig())
    labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
    train, test = stratified_split(records, labels, 0.2, seed=11)
    center = {r.patient_id: r.center_id for r in records}
    labeled = {p for p, o in labels.items() if o.is_labeled}
    strata = Counter((center[p], labels[p].label) for p in labeled)
    got = Counter((center[p], labels[p].label) for p in test)
    # 0.2 * n never lands on a .5 boundary, so every rounding convention agrees here
    wrong = [k for k, n in strata.items() if got[k] != round(0.2 * n)]
    disjoint = not set(train) & set(test)
    exhaustive = set(train) | set(test) == labeled
    ok = not wrong and disjoint and exhaustive
    report("AC8 stratified split", ok,
           f"{len(strata) - len(wrong)}/{len(strata)} strata exact; disjoint {disjoint}; exhaustive {exhaustive}")
