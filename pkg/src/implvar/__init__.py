"""Polyhedral cone calculus, stationarity checks and an augmented Lagrangian
solver for problems with implicit (e.g. cardinality) constraints."""

from .errors import (
    DimensionTooLarge,
    EnumerationCapExceeded,
    ImplvarError,
    InconclusiveCover,
    Inconsistent,
    InfeasibleInstance,
    MissingConeData,
    NotAMember,
    NumericallyDegenerate,
    ParseError,
    UnrecognizedLayout,
    ValidationError,
)
from .polycone import ConeUnion, ConvexCone, Inclusion, subset_eq
from .sets import BoxSparsitySet, ComplementaritySet, PolyUnionSet
from .solver import AlmConfig, NlpProblem, TerminationReason, alm_solve, pg_solve
from .stationarity import LambdaData, StationarityCase, check_all

__version__ = "0.1.0"

__all__ = [
    "AlmConfig", "BoxSparsitySet", "ComplementaritySet", "ConeUnion", "ConvexCone", "DimensionTooLarge",
    "EnumerationCapExceeded", "ImplvarError", "InconclusiveCover", "Inclusion", "Inconsistent",
    "InfeasibleInstance", "LambdaData", "MissingConeData", "NlpProblem", "NotAMember", "NumericallyDegenerate",
    "ParseError", "PolyUnionSet", "StationarityCase", "TerminationReason", "UnrecognizedLayout",
    "ValidationError", "alm_solve", "check_all", "pg_solve", "subset_eq",
]
