"""End-to-end replication of the three training scenarios on one synthetic cohort."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cohort import CLOPIDOGREL_CODES, TF_CODES, annotate_cohort, generate_cohort, stratified_split
from .config import RunConfig
from .encoding import build_vocabulary
from .federated import run_centralized, run_local_scenario
from .metrics import spearman
from .nn import FCN, GRU, SGD
from .pipeline import build_experiment_data
from .sweep import center_sweep

log = logging.getLogger(__name__)


@dataclass
class ArchitectureResult:
    kind: str
    central_auc: float
    local_auc: dict[int, float | None]
    train_sizes: dict[int, int]
    sweep_auc: dict[int, float]
    seconds: float = 0.0

    @property
    def trained_local(self) -> dict[int, float]:
        return {c: a for c, a in self.local_auc.items() if a is not None}

    @property
    def mean_local_auc(self) -> float:
        return float(np.mean(list(self.trained_local.values())))

    @property
    def size_auc_spearman(self) -> float:
        centers = list(self.trained_local)
        return spearman([self.train_sizes[c] for c in centers], [self.trained_local[c] for c in centers])

    @property
    def best_sweep_auc(self) -> float:
        return max(self.sweep_auc.values())

    @property
    def best_sweep_k(self) -> int:
        return max(self.sweep_auc, key=self.sweep_auc.get)


@dataclass
class ReplicationResult:
    seed: int
    results: dict[str, ArchitectureResult] = field(default_factory=dict)


def replication_preset(seed: int = 0, **training) -> RunConfig:
    """Settings used for the directional replication on one laptop CPU core.

    Plain SGD (lr 0.5) replaces the Adam default: with per-client Adam,
    FedAvg plateaued a few AUC points under centralized training even on IID
    shards, while SGD lets it converge to the pooled optimum. The GRU is
    narrowed to hidden 32 / embedding 16 to keep three seeds of the full
    sweep inside the runtime budget.
    """
    cfg = RunConfig(seed=seed)
    cfg.model.gru_hidden = 32
    cfg.model.embedding_dim = 16
    cfg.training.optimizer = SGD
    cfg.training.learning_rate = 0.5
    cfg.training.rounds = 20
    for key, value in training.items():
        setattr(cfg.training, key, value)
    cfg.validate()
    return cfg


def replicate(config: RunConfig, kinds=(FCN, GRU), run_sweep: bool = True) -> ReplicationResult:
    """Generate, label, split, then run local / centralized / sweep for each architecture."""
    records = generate_cohort(config.generator_config())
    labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
    train_ids, test_ids = stratified_split(records, labels, config.split.test_fraction, config.split_seed)
    by_id = {r.patient_id: r for r in records}
    vocab = build_vocabulary([by_id[p] for p in train_ids], config.split.min_count, CLOPIDOGREL_CODES)
    out = ReplicationResult(config.seed)
    for kind in kinds:
        t0 = time.perf_counter()
        data = build_experiment_data(records, labels, train_ids, test_ids, vocab, kind,
                                     config.model.max_seq_len)
        cfg = replace(config, model=replace(config.model, kind=kind))
        fed = cfg.federated_config(vocab.size)
        _, central = run_centralized(fed, data.pooled, data.test)
        local = run_local_scenario(fed, data.partitions, data.test)
        sweep = {}
        if run_sweep:
            sweep = {row.k: row.final_auc for row in center_sweep(fed, data.partitions, data.test)}
        res = ArchitectureResult(kind, central.final_auc, local,
                                 {c: len(d) for c, d in data.partitions.items()}, sweep,
                                 time.perf_counter() - t0)
        log.info("seed %d %s: central %.3f, mean local %.3f, best sweep %s (%.1fs)", config.seed, kind,
                 res.central_auc, res.mean_local_auc, sweep and round(res.best_sweep_auc, 3), res.seconds)
        out.results[kind] = res
    return out
