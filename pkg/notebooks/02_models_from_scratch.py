# %% [markdown]
# # FCN and GRU in plain numpy
#
# Both models expose the same functional interface: parameters are a flat
# float64 vector plus an architecture spec, and gradients come from
# hand-written backpropagation (through time, for the GRU).

# %%
import numpy as np

from fedtrial.nn import (
    FCN, GRU, ArchitectureSpec, compute_gradients, finite_difference_check, init_parameters,
    make_optimizer, optimizer_step, predict,
)

rng = np.random.default_rng(0)

# %% a tiny FCN on multi-hot vectors
fcn = ArchitectureSpec(FCN, input_dim=10, hidden_dims=(6, 4), seed=1)
p = init_parameters(fcn)
x = rng.integers(0, 2, (5, 10)).astype(float)
print(predict(p, x))

# %% analytic gradients agree with central differences
batch = [(xi, int(yi)) for xi, yi in zip(x, rng.integers(0, 2, 5))]
print("FCN max relative error", finite_difference_check(fcn, batch))

gru = ArchitectureSpec(GRU, input_dim=12, hidden_dims=(5,), embedding_dim=3, seed=2)
seqs = [(rng.integers(0, 12, n), int(rng.integers(0, 2))) for n in (0, 3, 7)]
print("GRU max relative error", finite_difference_check(gru, seqs))

# %% learning an order-dependent rule the bag-of-codes model cannot see:
# label is 1 when token 1 comes before token 2
def sample(n):
    out = []
    for _ in range(n):
        first = int(rng.integers(1, 3))
        out.append((np.array([first, 3 - first]), float(first == 1)))
    return out

data = sample(200)
params = init_parameters(gru)
opt = make_optimizer(params.values.size, "ADAM", 0.05)
for step in range(150):
    params, opt = optimizer_step(params, compute_gradients(params, data), opt)
print("P(1 before 2) =", predict(params, [np.array([1, 2])])[0])
print("P(2 before 1) =", predict(params, [np.array([2, 1])])[0])
