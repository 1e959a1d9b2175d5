"""Numerical laboratory for sharp space-time estimates of the flow exp(it|D|^alpha).

Subpackages, one per concern:

- ``core``        grids, trial functions, the symmetry group
- ``propagator``  multiplier flows, the extension operator, shifted flows
- ``functionals`` space-time norms, Strichartz quotients, bilinear norms
- ``geometry``    dyadic/Whitney/sector machinery and Hessian scans
- ``extremals``   sharp-constant thresholds, quotient optimisation, ledgers
- ``conv2d``      the d=2 weighted surface-measure convolution pipeline
- ``cli``         reproducible command-line runs with manifests
"""

from .core import (
    ExtensionParams,
    FrequencyGrid,
    SpaceTimeField,
    SupportOverflowError,
    SymmetryElement,
    TrialFunction,
    default_grid,
    l2_norm,
    make_gaussian,
)

__version__ = "0.1.0"

__all__ = [
    "ExtensionParams",
    "FrequencyGrid",
    "SpaceTimeField",
    "SupportOverflowError",
    "SymmetryElement",
    "TrialFunction",
    "default_grid",
    "l2_norm",
    "make_gaussian",
    "__version__",
]
