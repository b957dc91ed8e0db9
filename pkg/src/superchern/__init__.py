"""Numerical superconnection calculus on flat tori.

Finite-rank graded bundles over T^n carry superconnections whose Chern
characters, eta transgression forms, differential K-cocycle relations, odd
and twisted variants, and relative index characters are all computable on a
uniform grid and verified as identities with controlled tolerances.
"""

from .forms import (
    FormClassReport,
    GradedMatrixForm,
    Grading,
    TorusChart,
    algebra_exp,
    equal_mod_exact,
    exterior_d,
    harmonic_part,
    integrate,
    matrix_trace,
    sup_norm,
    supertrace,
    wedge_mul,
)
from .superconn import (
    GaugeTransform,
    Superconnection,
    chern_character,
    curvature,
    direct_sum,
    gauge,
    min_gap,
    product,
    rescale,
)
from .transgression import EtaResult, QuadratureConfig, eta_between, eta_infinity

__version__ = "0.1.0"

__all__ = [
    "FormClassReport",
    "GradedMatrixForm",
    "Grading",
    "TorusChart",
    "algebra_exp",
    "equal_mod_exact",
    "exterior_d",
    "harmonic_part",
    "integrate",
    "matrix_trace",
    "sup_norm",
    "supertrace",
    "wedge_mul",
    "GaugeTransform",
    "Superconnection",
    "chern_character",
    "curvature",
    "direct_sum",
    "gauge",
    "min_gap",
    "product",
    "rescale",
    "EtaResult",
    "QuadratureConfig",
    "eta_between",
    "eta_infinity",
]
