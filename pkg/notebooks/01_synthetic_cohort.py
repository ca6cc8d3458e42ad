# %% [markdown]
# # A synthetic multi-center cohort
#
# Generate patients, label them against the clopidogrel observation window,
# and split train/test within every (center, label) stratum.

# %%
from collections import Counter

from fedtrial.cohort import (
    CLOPIDOGREL_CODES, TF_CODES, GeneratorConfig, annotate_cohort, generate_cohort,
    partition_by_center, stratified_split,
)
from fedtrial.encoding import build_vocabulary, encode_multi_hot, encode_sequence

records = generate_cohort(GeneratorConfig(seed=0))
labels = annotate_cohort(records, TF_CODES, CLOPIDOGREL_CODES)
print(len(records), "patients")
print(Counter(o.label for o in labels.values()))
print(Counter(o.reason for o in labels.values() if o.reason))

# %% center sizes are geometric, so a handful of sites hold most patients
sizes = {cid: len(rs) for cid, rs in partition_by_center(records).items()}
print(sizes)

# %% one patient's timeline
r = records[0]
for v in r.visits:
    print(v.day, "ER" if v.er_flag else "  ", [f"{c.system}:{c.token}" for c in v.codes])
print(labels[r.patient_id])

# %% split and encode
train, test = stratified_split(records, labels, 0.2, seed=1)
by_id = {r.patient_id: r for r in records}
vocab = build_vocabulary([by_id[p] for p in train])
print(len(train), "train /", len(test), "test; vocabulary size", vocab.size)

pid = next(p for p in train if labels[p].index_day is not None)
x = encode_multi_hot(by_id[pid], labels[pid].index_day, vocab)
s = encode_sequence(by_id[pid], labels[pid].index_day, vocab)
print("multi-hot ones:", int(x.sum()), " sequence:", s.tolist())
