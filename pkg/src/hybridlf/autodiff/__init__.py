from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check, grad_check_params
from .ops import (
    ShapeError,
    concat_channels,
    conv2d,
    l1_loss,
    leaky_relu,
    resample2d,
    softmax_pair,
    transposed_conv2d,
)
from .optim import Parameter, ParameterSet, adam_step, zero_grad
from .tensor import (
    Tape,
    Tensor,
    as_tensor,
    backward,
    broadcast_to,
    clip,
    concat,
    debug_mode,
    default_dtype,
    maximum,
    no_grad,
    reshape,
    sqrt,
    square,
    stack,
    tabs,
    transpose,
    tsum,
)
