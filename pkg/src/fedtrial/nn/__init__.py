"""From-scratch FCN and GRU binary classifiers in float64 numpy."""
from .gradcheck import finite_difference_check
from .models import (
    batch_loss,
    bce_loss,
    compute_gradients,
    fcn_forward,
    gru_forward,
    gru_forward_batch,
    loss_and_grad,
    pad_sequences,
    predict,
)
from .optim import ADAM, SGD, OptimizerState, make_optimizer, optimizer_step
from .params import (
    FCN,
    GRU,
    ArchitectureSpec,
    ModelParameters,
    init_parameters,
    parameter_count,
    parameter_shapes,
    params_from_bytes,
    params_to_bytes,
    unpack,
)
