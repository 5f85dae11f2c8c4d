"""Float64 reverse-mode autodiff engine, Adam, and gradient checking."""

from .adam import Adam, StateError
from .gradcheck import finite_difference_check
from .tensor import (
    DomainError,
    NumericError,
    ShapeError,
    Tape,
    TapeError,
    Tensor,
    add,
    concat_cols,
    exp,
    gather_rows,
    log,
    log_softmax,
    matmul,
    mul,
    pick_per_row,
    reciprocal,
    relu,
    scale_rows,
    scatter_rows,
    softmax,
    square,
    sub,
    take_column,
    tmean,
    tsum,
)

__all__ = [
    "Adam",
    "DomainError",
    "NumericError",
    "ShapeError",
    "StateError",
    "Tape",
    "TapeError",
    "Tensor",
    "add",
    "concat_cols",
    "exp",
    "finite_difference_check",
    "gather_rows",
    "log",
    "log_softmax",
    "matmul",
    "mul",
    "pick_per_row",
    "reciprocal",
    "relu",
    "scale_rows",
    "scatter_rows",
    "softmax",
    "square",
    "sub",
    "take_column",
    "tmean",
    "tsum",
]
