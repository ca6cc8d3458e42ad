from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .models import batch_loss, compute_gradients
from .params import FCN, ArchitectureSpec, ModelParameters, init_parameters


def finite_difference_check(spec: ArchitectureSpec, batch, epsilon: float = 1e-5,
                            params: ModelParameters | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per parameter is ``|a - n| / max(1e-8, |a| + |n|)``.
    Intended for small models; cost is two forward passes per parameter.
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if params is None:
        params = init_parameters(spec)
    analytic = compute_gradients(params, batch)
    inputs = [x for x, _ in batch]
    if spec.kind == FCN:
        inputs = np.vstack([np.asarray(x, dtype=np.float64) for x in inputs])
    else:
        inputs = [np.asarray(x, dtype=np.int64) for x in inputs]
    labels = [y for _, y in batch]
    probe = params.copy()
    worst = 0.0
    for i in range(probe.values.size):
        orig = probe.values[i]
        probe.values[i] = orig + epsilon
        up = batch_loss(probe, inputs, labels)
        probe.values[i] = orig - epsilon
        down = batch_loss(probe, inputs, labels)
        probe.values[i] = orig
        numeric = (up - down) / (2.0 * epsilon)
        a = analytic[i]
        err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst
