"""Orbit counting and translate equidistribution for SL2(Z) acting on binary forms."""

__version__ = "0.1.0"

from .group import (
    CartanCoordinates,
    FundamentalPoint,
    GroupElement,
    IntegerOverflowError,
    LatticeElement,
    SO21Element,
    cartan_decompose,
    make_a,
    make_h,
    make_k,
    mobius_act,
    reduce_to_fundamental_domain,
    spin_cover,
)
from .norms import NormSpec
from .orbits import (
    PolyVec,
    QuadForm,
    act_form,
    act_poly,
    box_enumerate_disc,
    count_forms_box,
    count_orbit_series,
    orbit_partition,
    orbit_points_within,
    vector_act,
)
from .asymptotics import (
    CountSeries,
    SectorSpec,
    boundary_integral,
    fit_asymptotic,
    haar_kappa,
    predicted_count,
    vol_ball,
    vol_gamma_g,
)
from .cusp import CuspData, DivergentBasepoint, canonical_basepoint, compute_M1, divergence_certificate, excursion_norm
from .equidist import TestFunction, haar_probability_integral, reference_bump, translate_integral, two_sided_average
