"""Model descriptions: an ordered list of layers plus loss settings."""

from __future__ import annotations

from dataclasses import dataclass, field

FEEDFORWARD = "feedforward"
CONV2D = "conv2d"
RELU = "relu"
AVGPOOL = "avgpool"
FLATTEN = "flatten"

PARAMETRIC = (FEEDFORWARD, CONV2D)
_KINDS = (FEEDFORWARD, CONV2D, RELU, AVGPOOL, FLATTEN)


@dataclass(frozen=True)
class LayerSpec:
    """One layer.

    For convolutions ``n_in`` is ``in_channels * kernel**2`` and ``n_out`` is
    the number of output channels, i.e. the shape of the equivalent
    feedforward weight matrix applied to every patch.
    """

    kind: str
    n_in: int = 0
    n_out: int = 0
    in_channels: int = 0
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    pool: int = 2
    has_bias: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in PARAMETRIC and (self.n_in < 1 or self.n_out < 1):
            raise ValueError(f"{self.kind} layer needs positive n_in and n_out")
        if self.kind == CONV2D and self.n_in != self.in_channels * self.kernel**2:
            raise ValueError("conv n_in must equal in_channels * kernel**2")

    @property
    def is_parametric(self) -> bool:
        return self.kind in PARAMETRIC

    @property
    def dense_size(self) -> int:
        return self.n_in * self.n_out


def feedforward(n_in, n_out, has_bias=True):
    return LayerSpec(FEEDFORWARD, n_in=n_in, n_out=n_out, has_bias=has_bias)


def conv2d(in_channels, out_channels, kernel, stride=1, padding=0, has_bias=True):
    return LayerSpec(
        CONV2D, n_in=in_channels * kernel * kernel, n_out=out_channels, in_channels=in_channels,
        kernel=kernel, stride=stride, padding=padding, has_bias=has_bias,
    )


def relu():
    return LayerSpec(RELU)


def avgpool(size=2):
    return LayerSpec(AVGPOOL, pool=size)


def flatten():
    return LayerSpec(FLATTEN)


def conv_output_size(size, kernel, stride, padding):
    span = size + 2 * padding - kernel
    if span < 0 or span % stride:
        raise ValueError(
            f"conv geometry mismatch: size={size} kernel={kernel} stride={stride} padding={padding}"
        )
    return span // stride + 1


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple
    input_shape: tuple
    num_classes: int
    label_smoothing: float = 0.0
    loss: str = "cross_entropy"
    shapes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if self.loss != "cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")
        object.__setattr__(self, "shapes", tuple(self._infer_shapes()))
        if self.shapes[-1] != (self.num_classes,):
            raise ValueError(f"model output {self.shapes[-1]} does not match {self.num_classes} classes")

    def _infer_shapes(self):
        shape = self.input_shape
        out = []
        for i, layer in enumerate(self.layers):
            if layer.kind == FEEDFORWARD:
                if len(shape) != 1 or shape[0] != layer.n_in:
                    raise ValueError(f"layer {i}: feedforward expects ({layer.n_in},), got {shape}")
                shape = (layer.n_out,)
            elif layer.kind == CONV2D:
                if len(shape) != 3 or shape[0] != layer.in_channels:
                    raise ValueError(f"layer {i}: conv expects {layer.in_channels} channels, got {shape}")
                h = conv_output_size(shape[1], layer.kernel, layer.stride, layer.padding)
                w = conv_output_size(shape[2], layer.kernel, layer.stride, layer.padding)
                shape = (layer.n_out, h, w)
            elif layer.kind == AVGPOOL:
                if len(shape) != 3 or shape[1] % layer.pool or shape[2] % layer.pool:
                    raise ValueError(f"layer {i}: pool size {layer.pool} does not divide {shape}")
                shape = (shape[0], shape[1] // layer.pool, shape[2] // layer.pool)
            elif layer.kind == FLATTEN:
                n = 1
                for d in shape:
                    n *= d
                shape = (n,)
            out.append(shape)
        return out

    @property
    def parametric(self) -> list[int]:
        """Positions of layers that own a sparse weight matrix."""
        return [i for i, layer in enumerate(self.layers) if layer.is_parametric]

    def parametric_layers(self) -> list[LayerSpec]:
        return [self.layers[i] for i in self.parametric]

    def output_positions(self) -> list[int]:
        """Spatial positions per sample for each parametric layer (1 for feedforward)."""
        positions = []
        for i in self.parametric:
            shape = self.shapes[i]
            positions.append(shape[1] * shape[2] if len(shape) == 3 else 1)
        return positions

    def dense_parameter_count(self) -> int:
        return sum(layer.dense_size for layer in self.parametric_layers())


def mlp(sizes, label_smoothing=0.0) -> ModelSpec:
    """Feedforward ReLU network, e.g. ``mlp([784, 256, 256, 10])``."""
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(feedforward(n_in, n_out))
        if i < len(sizes) - 2:
            layers.append(relu())
    return ModelSpec(layers, (sizes[0],), sizes[-1], label_smoothing)


def small_cnn(input_shape=(3, 32, 32), num_classes=10, channels=(32, 64), label_smoothing=0.0) -> ModelSpec:
    """Two 3x3 conv blocks with average pooling and one feedforward head."""
    c, h, w = input_shape
    layers = []
    for out_c in channels:
        layers += [conv2d(c, out_c, 3, padding=1), relu(), avgpool(2)]
        c, h, w = out_c, h // 2, w // 2
    layers += [flatten(), feedforward(c * h * w, num_classes)]
    return ModelSpec(layers, input_shape, num_classes, label_smoothing)


PRESETS = {
    "mlp": lambda: mlp([784, 256, 256, 10]),
    "cnn": lambda: small_cnn(),
    "mnist_cnn": lambda: small_cnn((1, 28, 28), 10, channels=(16, 32)),
}


def preset(name: str, label_smoothing: float = 0.0) -> ModelSpec:
    if name.startswith("mlp:"):
        sizes = [int(s) for s in name[4:].split("-")]
        return mlp(sizes, label_smoothing)
    try:
        spec = PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; known: {sorted(PRESETS)} or mlp:<a>-<b>-...") from None
    return ModelSpec(spec.layers, spec.input_shape, spec.num_classes, label_smoothing)
