"""Reflected diffusion generative modelling on boxes.

Subpackages cover the spectral oracle machinery, an exact-bookkeeping ReLU
network calculus, constructive approximation networks, reflected SDE
simulation, denoising score matching and the generative-error diagnostics,
plus a CLI tying the flows together.
"""

from .domain import BoxDomain, Diffusivity
from .errors import (
    ConfigurationError,
    DependencyError,
    EigensolverError,
    EnvelopeError,
    IntegrityError,
    ReflektError,
    TruncationUnreliableError,
)

__version__ = "0.1.0"
