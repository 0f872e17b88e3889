from .connections import (
    ConnectionIndex,
    ConnectionSet,
    CsrMatrix,
    inactive_keys,
    inactive_keys_at,
    linear_keys,
    set_difference,
)
from .kernels import (
    coo_spmm,
    csr_spmm,
    dense_gradient,
    dense_matmul,
    gather_connection_grads,
    spmm,
    spmm_transposed,
)
from .sampling import AliasTable, InvalidDistributionError, alias_sample, build_alias_table
from .selection import select_top_k

__all__ = [
    "AliasTable",
    "ConnectionIndex",
    "ConnectionSet",
    "CsrMatrix",
    "InvalidDistributionError",
    "alias_sample",
    "build_alias_table",
    "coo_spmm",
    "csr_spmm",
    "dense_gradient",
    "dense_matmul",
    "gather_connection_grads",
    "inactive_keys",
    "inactive_keys_at",
    "linear_keys",
    "select_top_k",
    "set_difference",
    "spmm",
    "spmm_transposed",
]
