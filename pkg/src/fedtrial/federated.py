"""FedAvg simulation: local training, weighted aggregation and the three training scenarios.

All scenarios share one round loop. Centralized training is the loop with a
single client (id 0) holding the pooled data; the local scenario runs the
loop once per center with that center alone.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AggregationError, ConfigError, DataError, MetricError
from .metrics import roc_auc
from .nn import (
    ADAM, ArchitectureSpec, ModelParameters, OptimizerState, init_parameters, loss_and_grad,
    make_optimizer, optimizer_step, predict,
)

log = logging.getLogger(__name__)

POOLED_CENTER_ID = 0


def derive_seed(*keys: int) -> int:
    """Stable 64-bit seed from integer keys, e.g. ``(seed, round, center_id)``."""
    h = hashlib.blake2b(",".join(str(int(k)) for k in keys).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass
class ClientData:
    """Encoded examples: a ``(n, D)`` matrix for FCN or a list of index arrays for GRU."""

    inputs: object
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if len(self.inputs) != len(self.labels):
            raise DataError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "ClientData":
        idx = np.asarray(idx, dtype=np.int64)
        if isinstance(self.inputs, np.ndarray):
            return ClientData(self.inputs[idx], self.labels[idx])
        return ClientData([self.inputs[i] for i in idx], self.labels[idx])

    @staticmethod
    def concat(parts: list["ClientData"]) -> "ClientData":
        parts = [p for p in parts if len(p)]
        if not parts:
            raise DataError("nothing to concatenate")
        if isinstance(parts[0].inputs, np.ndarray):
            inputs = np.vstack([p.inputs for p in parts])
        else:
            inputs = [x for p in parts for x in p.inputs]
        return ClientData(inputs, np.concatenate([p.labels for p in parts]))


@dataclass
class FederatedConfig:
    spec: ArchitectureSpec
    rounds: int = 30
    local_epochs: int = 1
    batch_size: int = 64
    optimizer: str = ADAM
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    centers: tuple[int, ...] | None = None
    seed: int = 0
    min_train_size: int = 2

    def __post_init__(self):
        if self.rounds < 1 or self.local_epochs < 1 or self.batch_size < 1:
            raise ConfigError("rounds, local_epochs and batch_size must all be >= 1")
        if self.centers is not None:
            self.centers = tuple(int(c) for c in self.centers)
            if not self.centers:
                raise ConfigError("participating center list is empty")

    def new_optimizer(self, n_params: int) -> OptimizerState:
        return make_optimizer(n_params, self.optimizer, self.learning_rate,
                              self.beta1, self.beta2, self.epsilon)


@dataclass
class ClientUpdate:
    center_id: int
    params: ModelParameters
    sample_count: int
    mean_loss: float = math.nan
    optimizer_state: OptimizerState | None = field(default=None, repr=False)


class EmptyClientError(DataError):
    """A center has no training data this round; it is skipped."""


def local_train(global_params: ModelParameters, data: ClientData, epochs: int, batch_size: int,
                optimizer: OptimizerState, seed: int, center_id: int = 0) -> ClientUpdate:
    """Train a copy of ``global_params`` for ``epochs`` seeded-permutation epochs.

    ``optimizer`` is the client's optimizer state and is not modified; the
    advanced state is returned on the update alongside the trained copy,
    ``sample_count = len(data)`` and the mean minibatch loss.
    """
    n = len(data)
    if n == 0:
        raise EmptyClientError(f"center {center_id} has no training data")
    rng = np.random.default_rng(seed)
    params = global_params.copy()
    state = optimizer
    losses = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = data.subset(perm[start:start + batch_size])
            loss, grads = loss_and_grad(params, batch.inputs, batch.labels)
            params, state = optimizer_step(params, grads, state)
            losses.append(loss)
    return ClientUpdate(center_id, params, n, float(np.mean(losses)), state)


def fedavg_aggregate(updates: list[ClientUpdate]) -> ModelParameters:
    """Sample-count weighted mean of client parameters.

    Updates are sorted by center id and summed in that order with normalized
    weights ``n_k / sum(n)``, so the result is independent of list order and
    of a common scaling of the sample counts.
    """
    if not updates:
        raise AggregationError("no client updates to aggregate")
    ups = sorted(updates, key=lambda u: u.center_id)
    ids = [u.center_id for u in ups]
    if len(set(ids)) != len(ids):
        raise AggregationError(f"duplicate center ids in updates: {ids}")
    spec = ups[0].params.spec
    for u in ups:
        if u.params.spec != spec:
            raise AggregationError(f"center {u.center_id} sent parameters for a different architecture")
        if u.sample_count <= 0:
            raise AggregationError(f"center {u.center_id} reported sample_count {u.sample_count}")
    total = sum(u.sample_count for u in ups)
    acc = (ups[0].sample_count / total) * ups[0].params.values
    for u in ups[1:]:
        acc = acc + (u.sample_count / total) * u.params.values
    return ModelParameters(spec, acc)


@dataclass
class RoundMetrics:
    round: int
    mean_train_loss: float
    test_auc: float
    seconds: float
    skipped: tuple[int, ...] = ()


@dataclass
class MetricsSeries:
    records: list[RoundMetrics] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def final_auc(self) -> float:
        return self.records[-1].test_auc

    def to_csv(self, record_time: bool = False) -> str:
        """CSV text ``round,mean_train_loss,test_auc,seconds``.

        Wall-clock seconds are written only with ``record_time``; otherwise the
        column is left empty so reruns produce identical bytes.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "mean_train_loss", "test_auc", "seconds"])
        for r in self.records:
            auc = "UNDEFINED" if math.isnan(r.test_auc) else repr(float(r.test_auc))
            w.writerow([r.round, repr(float(r.mean_train_loss)), auc,
                        f"{r.seconds:.3f}" if record_time else ""])
        return buf.getvalue()

    def write_csv(self, path, record_time: bool = False):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv(record_time))


def evaluate_auc(params: ModelParameters, test: ClientData) -> float:
    return roc_auc(predict(params, test.inputs), test.labels)


def _check_test_set(test: ClientData):
    if test is None:
        return
    classes = np.unique(test.labels)
    if len(classes) < 2:
        raise MetricError(f"test set has a single class {classes.tolist()}; AUC is UNDEFINED")


def run_federated(config: FederatedConfig, partitions: dict[int, ClientData], test: ClientData | None,
                  initial: ModelParameters | None = None,
                  evaluate_every_round: bool = True) -> tuple[ModelParameters, MetricsSeries]:
    """Broadcast, train every participating center, aggregate; repeat ``config.rounds`` times.

    Each center keeps its own optimizer state (Adam moments) from round to
    round; only parameters are averaged. Empty centers are skipped each round. When ``evaluate_every_round`` is
    false only the last round is scored (other rounds record NaN).
    """
    if config.centers is not None:
        missing = [c for c in config.centers if c not in partitions]
        if missing:
            raise DataError(f"participating centers {missing} have no partition")
        partitions = {c: partitions[c] for c in config.centers}
    if not partitions:
        raise DataError("no participating centers")
    _check_test_set(test)
    params = initial.copy() if initial is not None else init_parameters(config.spec)
    series = MetricsSeries()
    states = {cid: config.new_optimizer(params.values.size) for cid in partitions}
    for rnd in range(1, config.rounds + 1):
        t0 = time.perf_counter()
        updates, skipped = [], []
        for cid in sorted(partitions):
            try:
                up = local_train(params, partitions[cid], config.local_epochs, config.batch_size,
                                 states[cid], derive_seed(config.seed, rnd, cid), center_id=cid)
            except EmptyClientError:
                skipped.append(cid)
                continue
            states[cid] = up.optimizer_state
            updates.append(up)
        if not updates:
            raise DataError(f"round {rnd}: every client was skipped (centers {sorted(partitions)})")
        params = fedavg_aggregate(updates)
        total = sum(u.sample_count for u in updates)
        loss = sum(u.sample_count * u.mean_loss for u in updates) / total
        auc = math.nan
        if test is not None and (evaluate_every_round or rnd == config.rounds):
            auc = evaluate_auc(params, test)
        series.records.append(RoundMetrics(rnd, loss, auc, time.perf_counter() - t0, tuple(skipped)))
        log.debug("round %d loss=%.4f auc=%.4f skipped=%s", rnd, loss, auc, skipped)
    return params, series


def run_centralized(config: FederatedConfig, pooled: ClientData, test: ClientData | None,
                    initial: ModelParameters | None = None) -> tuple[ModelParameters, MetricsSeries]:
    """The round loop with one client holding all training data."""
    cfg = _without_center_filter(config)
    return run_federated(cfg, {POOLED_CENTER_ID: pooled}, test, initial)


def run_local_scenario(config: FederatedConfig, partitions: dict[int, ClientData], test: ClientData,
                       initial: ModelParameters | None = None) -> dict[int, float | None]:
    """Final global-test AUC of each center trained alone; ``None`` marks UNTRAINABLE centers."""
    _check_test_set(test)
    cfg = _without_center_filter(config)
    if initial is None:
        initial = init_parameters(config.spec)
    centers = config.centers if config.centers is not None else list(partitions)
    out = {}
    for cid in centers:
        data = partitions[cid]
        if len(data) < config.min_train_size:
            out[cid] = None
            continue
        _, series = run_federated(cfg, {cid: data}, test, initial, evaluate_every_round=False)
        out[cid] = series.final_auc
    return out


def _without_center_filter(config: FederatedConfig) -> FederatedConfig:
    return replace(config, centers=None)
