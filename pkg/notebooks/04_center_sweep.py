# %% [markdown]
# # Adding centers one at a time
#
# Centers join in descending size order; every row starts from the same
# initial parameters so the only thing that changes along k is the data.

# %%
from fedtrial.experiment import replicate, replication_preset
from fedtrial.nn import FCN

cfg = replication_preset(seed=0, rounds=10)
result = replicate(cfg, kinds=(FCN,))
r = result.results[FCN]
print("centralized", round(r.central_auc, 3), " mean local", round(r.mean_local_auc, 3))
for k, auc in r.sweep_auc.items():
    print(f"k={k:2d}  {auc:.3f}  " + "#" * int(40 * (auc - 0.5)))
print("best", r.best_sweep_k, round(r.best_sweep_auc, 3))
