from .conv import avgpool_backward, avgpool_forward, col2im, conv_forward, conv_input_grad, im2col
from .layers import (
    LayerSpec,
    ModelSpec,
    avgpool,
    conv2d,
    feedforward,
    flatten,
    mlp,
    preset,
    relu,
    small_cnn,
)
from .losses import cross_entropy, log_softmax
from .network import (
    ActivationCache,
    Gradients,
    LayerParams,
    accuracy,
    backward,
    forward,
    init_params,
    init_weights,
    predict,
)
from .optim import OptimizerState, sgd_step
