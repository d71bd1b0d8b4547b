"""Barrier-based universal safe stabilizing controllers."""

from ._unisafe import (
    ContractError,
    DomainError,
    FileError,
    InfeasibleError,
    MlpModel,
    NumericError,
    ParseError,
    SchemaError,
    SolveStatus,
    closed_form_1d,
    eval_j,
    find_interior_point,
    grad_j,
    hess_j,
    load_model,
    predict,
    sample_dataset,
    scale_params,
    simulate,
    solve_exact,
    solve_gradient_flow,
)

__all__ = [
    "ContractError",
    "DomainError",
    "FileError",
    "InfeasibleError",
    "MlpModel",
    "NumericError",
    "ParseError",
    "SchemaError",
    "SolveStatus",
    "closed_form_1d",
    "eval_j",
    "find_interior_point",
    "grad_j",
    "hess_j",
    "load_model",
    "predict",
    "sample_dataset",
    "scale_params",
    "simulate",
    "solve_exact",
    "solve_gradient_flow",
]
