"""Beltrami fields from orthogonal coordinate triples: construction, verification and tracing."""

from .expr import differentiate, parse, simplify, to_string
from .fields import Guard, ScalarField, VectorField, curl, divergence, gradient, laplacian
from .frames import (OrthoTriple, build_beltrami, build_beltrami_profile, build_beltrami_ratio,
                     catalog_chart, check_construction_conditions, check_representation_conditions,
                     harmonic_conjugate, planar_frame)
from .verify import beltrami_residual, classify, proportionality_factor
from .flow import StepControl, evolve_observable, invariant_drift, trace_streamline
from .catalog import get_example, list_examples

__version__ = "0.1.0"
