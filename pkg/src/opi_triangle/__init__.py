"""Inflation bounds, exact certificates and local-model searches for the
output-permutation-invariant triangle network with four outputs."""

__version__ = "0.1.0"

from .orbits import build_matrix, enumerate_outcome_orbits, enumerate_words  # noqa: E402
from .constraints import build_constraints  # noqa: E402
from .bounds import SlpOptions, slp_bound  # noqa: E402
from .certify import certify_polygon  # noqa: E402

__all__ = [
    "__version__",
    "build_matrix",
    "enumerate_outcome_orbits",
    "enumerate_words",
    "build_constraints",
    "SlpOptions",
    "slp_bound",
    "certify_polygon",
]
