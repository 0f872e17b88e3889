from .datasets import (
    NORMALIZATION,
    AugmentationPolicy,
    Dataset,
    augment,
    batch_order,
    batches,
    denormalize,
    load_cifar,
    load_mnist,
    normalize,
    synthetic_classification,
)
from .formats import (
    CifarFormatError,
    IdxFormatError,
    encode_idx,
    load_cifar10_binary,
    load_cifar100_binary,
    load_idx,
    parse_cifar,
    parse_idx,
    read_idx,
    write_idx,
)
