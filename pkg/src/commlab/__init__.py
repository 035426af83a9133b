"""Exact-rational toolkit for two-party protocols, their information costs,
and the decomposition machinery behind XOR lemmas."""

from .core_info import (
    BitVar,
    Event,
    JointTable,
    advantage,
    binary_entropy,
    condition_table,
    entropy,
    kl_divergence,
    mutual_information,
    tv_distance,
)
from .protocol import (
    FunctionTable,
    Kind,
    Protocol,
    RoundMeta,
    Sender,
    SplitSpec,
    StandardSpec,
    append_message,
    compile_standard,
    condition_protocol,
    information_cost,
    output_stats,
    partial_rectangle_check,
    rectangle_check,
    validate_standard,
)
from .costs import gamma_cost, standardization_loss_audit, standardize, theta_cost
from .report import Check, VerdictReport

__version__ = "0.1.0"
