"""Geometric intergenerational transfer rules on summable income streams."""

from .axioms import AXIOMS, AxiomVerdict, Battery, check_axiom, lipschitz_certificate
from .profile import INF, FamilyReport, LambdaProfile, TailSpec, classify, uniform
from .rules import (
    AllocationResult,
    GeometricRule,
    Rule,
    allocate,
    allocate_direct,
    apply_geometric,
    consistency_transform,
    geometric,
    recover_lambda,
)
from .stream import GeometricTail, Stream, basis

__all__ = [
    "AXIOMS",
    "AllocationResult",
    "AxiomVerdict",
    "Battery",
    "FamilyReport",
    "GeometricRule",
    "GeometricTail",
    "INF",
    "LambdaProfile",
    "Rule",
    "Stream",
    "TailSpec",
    "allocate",
    "allocate_direct",
    "apply_geometric",
    "basis",
    "check_axiom",
    "classify",
    "consistency_transform",
    "geometric",
    "lipschitz_certificate",
    "recover_lambda",
    "uniform",
]

__version__ = "0.1.0"
