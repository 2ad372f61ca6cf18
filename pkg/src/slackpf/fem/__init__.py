"""Finite-element core: shape functions, DOFs, element kernels and assembly."""

from .assembly import (
    AssembledSystem,
    Assembler,
    Constraints,
    PinSpec,
    build_constraints,
    element_contributions,
)
from .dofs import DofMap, Formulation, SystemState
from .kernels import (
    Constitutive,
    ElementContrib,
    element_residual_pen,
    element_residual_phi,
    element_residual_phi_lmm,
    element_residual_theta_lambda_lmm,
    element_residual_u,
)
from .kkt import KKTReport, kkt_report, nodal_multiplier
from .shape import ELEMENT_TYPES, ElementGeometry, element_jacobians

__all__ = [
    "AssembledSystem",
    "Assembler",
    "Constitutive",
    "Constraints",
    "DofMap",
    "ELEMENT_TYPES",
    "ElementContrib",
    "ElementGeometry",
    "Formulation",
    "KKTReport",
    "PinSpec",
    "SystemState",
    "build_constraints",
    "element_contributions",
    "element_jacobians",
    "element_residual_pen",
    "element_residual_phi",
    "element_residual_phi_lmm",
    "element_residual_theta_lambda_lmm",
    "element_residual_u",
    "kkt_report",
    "nodal_multiplier",
]
