"""Discriminant points, action spectra and growth rates of positive contact paths.

The package computes, on explicit contact manifolds, the critical points of
a discretized Rabinowitz-type action functional on loops in the cone over
the manifold, and cross-checks them against discriminant points found
directly from the contact flow.
"""

__version__ = "0.1.0"

from .action import Chord, GradientVector, Loop, action, descend, gradient, gradient_norm, refine_newton
from .cutoff import CutoffHamiltonian, CutoffProfile, WindowConstants, admissible_constants, bounds_mM, constant_C
from .discriminant import (
    CircleDiffeo,
    CircleRotation,
    DiscriminantPoint,
    Identity,
    LegendrianChordPoint,
    TorusTranslation,
    check_nonresonant,
    cluster_components,
    conjugate_spec,
    find_chords,
    find_discriminant,
)
from .geometry import (
    Circle,
    EllipsoidBoundary,
    FlatTorusUnitCotangent,
    FlowResult,
    IsotopySpec,
    constant,
    contact_vector_field,
    flow,
    kinetic_energy,
    sinusoidal,
    validate_path,
)
from .spectrum import SpectrumWindow, circle_oracle, growth_rate, mu_proxy, spectrum
from .symplectization import ConePoint, LiftedHamiltonian, hamiltonian_vector_field, lift_point, verify_liouville_identity

__all__ = [name for name in dir() if not name.startswith("_")]
