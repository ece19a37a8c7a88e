"""Simulation and verification tools for density-dependent branching populations."""

from .core import (
    Channel,
    ConstantOne,
    DomainError,
    InverseSize,
    ModelSpec,
    PsiFunction,
    RateKernel,
    generator_apply,
    lambda_of,
    total_rate,
)
from .simulate import SimConfig, Status, Stream, simulate_original, simulate_spine, spine_weight

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "ConstantOne",
    "DomainError",
    "InverseSize",
    "ModelSpec",
    "PsiFunction",
    "RateKernel",
    "SimConfig",
    "Status",
    "Stream",
    "generator_apply",
    "lambda_of",
    "simulate_original",
    "simulate_spine",
    "spine_weight",
    "total_rate",
]
