# %% [markdown]
# # Three training scenarios
#
# The three scenarios share one round loop. Centralized training is a single
# client holding the pooled data; the local scenario runs each center alone;
# federated training averages per-center models weighted by sample count.
# A smaller cohort and the FCN keep this script to a few seconds.

# %%
import numpy as np

from fedtrial.cohort import (
    CLOPIDOGREL_CODES, TF_CODES, GeneratorConfig, annotate_cohort, generate_cohort, stratified_split,
)
from fedtrial.encoding import build_vocabulary
from fedtrial.federated import FederatedConfig, run_centralized, run_federated, run_local_scenario
from fedtrial.metrics import spearman
from fedtrial.nn import FCN, SGD, ArchitectureSpec, init_parameters
from fedtrial.pipeline import build_experiment_data

records = generate_cohort(GeneratorConfig(n_patients=3000, n_centers=8, seed=3))
labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
train, test = stratified_split(records, labels, 0.2, seed=4)
by_id = {r.patient_id: r for r in records}
vocab = build_vocabulary([by_id[p] for p in train])
data = build_experiment_data(records, labels, train, test, vocab, FCN)

spec = ArchitectureSpec(FCN, data.input_dim, (32,), seed=5)
cfg = FederatedConfig(spec, rounds=15, batch_size=64, optimizer=SGD, learning_rate=0.5, seed=6)
init = init_parameters(spec)

# %%
_, central = run_centralized(cfg, data.pooled, data.test, init)
print("centralized AUC", round(central.final_auc, 3))

local = run_local_scenario(cfg, data.partitions, data.test, init)
sizes = {c: len(d) for c, d in data.partitions.items()}
for cid, auc in local.items():
    print(f"center {cid:2d}  n={sizes[cid]:5d}  AUC={'UNTRAINABLE' if auc is None else round(auc, 3)}")
trained = [c for c, a in local.items() if a is not None]
print("mean local AUC", round(np.mean([local[c] for c in trained]), 3),
      " Spearman(size, AUC)", round(spearman([sizes[c] for c in trained], [local[c] for c in trained]), 3))

# %%
_, fed = run_federated(cfg, data.partitions, data.test, init)
print(fed.to_csv())
