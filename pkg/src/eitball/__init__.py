"""Complex-admittivity EIT on the unit ball.

Simulates Dirichlet-to-Neumann boundary data for complex admittivities
gamma = sigma + i*omega*eps and reconstructs gamma through the chain
boundary integral equation -> scattering transform -> band-limited Fourier
inversion -> Schroedinger Dirichlet solve.
"""

__version__ = "0.1.0"

from .grid import VolumeGrid
from .mesh import BoundaryMesh, build_sphere_mesh
from .harmonics import HarmonicBasis, build_harmonic_basis
from .phantoms import (
    AdmittivityField,
    PhantomSpec,
    PotentialField,
    eval_phantom,
    schrodinger_potential,
    small_contrast_phantom,
    two_layer_phantom,
)

__all__ = [
    "VolumeGrid",
    "BoundaryMesh",
    "build_sphere_mesh",
    "HarmonicBasis",
    "build_harmonic_basis",
    "AdmittivityField",
    "PhantomSpec",
    "PotentialField",
    "eval_phantom",
    "schrodinger_potential",
    "small_contrast_phantom",
    "two_layer_phantom",
]
