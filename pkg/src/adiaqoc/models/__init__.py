"""Physical control problems: RAP, cavity STIRAP and Rydberg MIS rings."""
from .base import BACKENDS, ControlProblem
from .rap import RapProblem, RapSpec, reference_polynomial_rap, rap_hamiltonian_at, rap_model

__all__ = ["BACKENDS", "ControlProblem", "RapProblem", "RapSpec",
           "reference_polynomial_rap", "rap_hamiltonian_at", "rap_model"]
