"""Planetary-geostrophic thermocline model with horizontal hyper-diffusion."""

from .diffusion import DiffusionOperator, apply_A, assemble, bilinear_a
from .fields import Grid, LateralMode, PhysParams, ScalarField2, ScalarField3, VelocityField
from .galerkin import EigenBasis, compute_basis
from .stepper import Scheme, SimState, StepConfig, Stepper, step

__all__ = [
    "DiffusionOperator", "EigenBasis", "Grid", "LateralMode", "PhysParams", "ScalarField2",
    "ScalarField3", "Scheme", "SimState", "StepConfig", "Stepper", "VelocityField",
    "apply_A", "assemble", "bilinear_a", "compute_basis", "step",
]
__version__ = "0.1.0"
