"""Finite toolkit for noise Boolean algebras on discrete probability spaces."""

from .probspace import (
    FiniteProbabilitySpace, RandomVariable, SigmaField, SpaceMismatchError, are_independent,
    cond_exp, join, make_space, meet, product_space, sigma_of, sign_cube,
)
from .noisebool import (
    AxiomError, NoiseBooleanAlgebra, NotInAlgebraError, VerificationReport, from_fields,
    from_independency, generated, verify_axioms,
)
from .spectral import SpectralMeasure, SpectralResolution, chaos_decompose, resolve
from .operators import (
    LinearOperator, SpectralProbability, generalized_operator, noise_operator, self_joining,
)
from .scenarios import GENERATORS, Scenario

__version__ = "0.1.0"

__all__ = [
    "FiniteProbabilitySpace", "RandomVariable", "SigmaField", "SpaceMismatchError",
    "are_independent", "cond_exp", "join", "make_space", "meet", "product_space", "sigma_of",
    "sign_cube", "AxiomError", "NoiseBooleanAlgebra", "NotInAlgebraError", "VerificationReport",
    "from_fields", "from_independency", "generated", "verify_axioms", "SpectralMeasure",
    "SpectralResolution", "chaos_decompose", "resolve", "LinearOperator", "SpectralProbability",
    "generalized_operator", "noise_operator", "self_joining", "GENERATORS", "Scenario",
]
