"""Geometric algebra power theory (GAPoT) and cross-vector IRP analyses."""

from .engine import (
    AVERAGED,
    INSTANTANEOUS,
    KEEP_IF,
    KEEP_IP,
    CurrentDecomposition,
    GeometricPower,
    SequenceSplit,
    compensate,
    decompose,
    geometric_power,
    power_factor,
    sequence_split,
)
from .ga import Multivector, geometric_product, grade_project, inner, norm, vector_inverse, wedge
from .signals import (
    GeometricTrajectory,
    HarmonicSignal,
    HarmonicTerm,
    PolyphaseSignal,
    SampledSignal,
    hilbert,
    hilbert_sampled,
    project_to_time,
    rms,
    to_geometric,
    to_geometric_instantaneous,
)

__version__ = "0.1.0"

__all__ = [
    "AVERAGED",
    "INSTANTANEOUS",
    "KEEP_IF",
    "KEEP_IP",
    "CurrentDecomposition",
    "GeometricPower",
    "SequenceSplit",
    "compensate",
    "decompose",
    "geometric_power",
    "power_factor",
    "sequence_split",
    "Multivector",
    "geometric_product",
    "grade_project",
    "inner",
    "norm",
    "vector_inverse",
    "wedge",
    "GeometricTrajectory",
    "HarmonicSignal",
    "HarmonicTerm",
    "PolyphaseSignal",
    "SampledSignal",
    "hilbert",
    "hilbert_sampled",
    "project_to_time",
    "rms",
    "to_geometric",
    "to_geometric_instantaneous",
]
