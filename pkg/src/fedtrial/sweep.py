"""Incremental-center sweep: FedAvg over the k largest centers for k = 1..C."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

from .federated import ClientData, FederatedConfig, MetricsSeries, run_federated
from .nn import init_parameters


@dataclass
class SweepRow:
    k: int
    centers: tuple[int, ...]
    final_auc: float
    series: MetricsSeries
    metrics_path: str = ""


def center_sweep(base_config: FederatedConfig, partitions: dict[int, ClientData], test: ClientData,
                 out_dir=None, record_time: bool = False) -> list[SweepRow]:
    """Run FedAvg on growing prefixes of ``partitions`` (which must be ordered largest first).

    Every row starts from the same initial parameters. With ``out_dir`` the
    per-round series of row k is written to ``sweep_k{k:02d}.csv``.
    """
    order = list(partitions)
    initial = init_parameters(base_config.spec)
    rows = []
    for k in range(1, len(order) + 1):
        included = tuple(order[:k])
        cfg = replace(base_config, centers=included)
        _, series = run_federated(cfg, partitions, test, initial)
        path = ""
        if out_dir is not None:
            p = Path(out_dir) / f"sweep_k{k:02d}.csv"
            series.write_csv(p, record_time)
            path = p.name
        rows.append(SweepRow(k, included, series.final_auc, series, path))
    return rows


def sweep_table_csv(rows: list[SweepRow]) -> str:
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "centers_included", "final_auc", "metrics_path"])
    for r in rows:
        w.writerow([r.k, ";".join(str(c) for c in r.centers), repr(float(r.final_auc)), r.metrics_path])
    return buf.getvalue()


def best_row(rows: list[SweepRow]) -> SweepRow:
    return max(rows, key=lambda r: r.final_auc)
