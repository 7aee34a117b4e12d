"""Single-qubit state tomography from Cartesian Stern-Gerlach counts.

Estimators (direct and scaled inversion, prior-aware maximum likelihood,
minimum Fisher-information distance, Bayesian mean), radial priors on the
Bloch ball, an exhaustive-enumeration evaluation harness and the
measurement-axis uniformity analysis.
"""
from .bme import Posterior, QuadratureSpec, bme, functional_posterior
from .core import (BlochVector, DomainError, NumericalError, entropy, log_outcome_probability,
                   outcome_probability, purity, quantum_fisher_information, schatten_distance,
                   trace_distance, wigner)
from .data import CountRecord, NoiseModel, StateKind, StateReport, to_positivist
from .estimators import (BranchCutError, Estimate, Status, direct_inversion, fisher_distance,
                         fisher_minimizer, general_axes_mle, kl_divergence, mle, mle_ridge,
                         scaled_direct_inversion)
from .priors import Prior, PriorClass, parse_prior

__version__ = "0.1.0"
