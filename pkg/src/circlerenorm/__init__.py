"""Renormalization of analytic circle maps near rotations."""
from .cfrac import (
    ContinuedFraction,
    brjuno_phi,
    brjuno_phi0,
    expand,
    locate_K_discontinuities,
    return_index,
)
from .circlemap import (
    FourierAnnulusMap,
    StripDomain,
    TangentField,
    compose,
    distance,
    invert,
    rotation,
    rotation_number,
)
from .cohom import apply_L, solve_homological, tangent_family
from .beltrami import BeltramiField, QCSolution, solve_beltrami
from .renorm import build_chart, differential_on_V0, renormalize, unstable_eigenvalue
from .probes import invariant_circle, kam_linearize, leaf_tangent_functional, renorm_convergence
from .families import arnold, tongue_curve, tongue_point

__version__ = "0.1.0"
