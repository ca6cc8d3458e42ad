"""SGD and Adam over flat parameter vectors."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, NumericError, ShapeError
from .params import ModelParameters

SGD = "SGD"
ADAM = "ADAM"


@dataclass
class OptimizerState:
    kind: str = ADAM
    learning_rate: float = 1e-3
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in (SGD, ADAM):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")


def make_optimizer(n_params: int, kind: str = ADAM, learning_rate: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> OptimizerState:
    return OptimizerState(kind=kind, learning_rate=learning_rate,
                          m=np.zeros(n_params), v=np.zeros(n_params),
                          beta1=beta1, beta2=beta2, epsilon=epsilon)


def optimizer_step(params: ModelParameters, grads: np.ndarray,
                   state: OptimizerState) -> tuple[ModelParameters, OptimizerState]:
    """One update. Inputs are left untouched; new parameter and state objects are returned."""
    g = np.asarray(grads, dtype=np.float64)
    if g.shape != params.values.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match parameters {params.values.shape}")
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise NumericError(f"non-finite gradient at index {bad[0]} ({g[bad[0]]})")
    t = state.step_count + 1
    lr = state.learning_rate
    if state.kind == SGD:
        return ModelParameters(params.spec, params.values - lr * g), replace(state, step_count=t)
    m = state.m if state.m is not None else np.zeros_like(g)
    v = state.v if state.v is not None else np.zeros_like(g)
    m = state.beta1 * m + (1.0 - state.beta1) * g
    v = state.beta2 * v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    values = params.values - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return ModelParameters(params.spec, values), replace(state, m=m, v=v, step_count=t)
