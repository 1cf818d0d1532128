"""Camellia boosting for Reed-Muller codes on symmetric channels."""

from .camellia import (
    AffineCoset,
    CamelliaSpec,
    correlation_rho,
    petal_dimension,
    rho_asymptotic_bound,
    sample_petal_containing,
    verify_camellia,
)
from .channel import SymmetricChannel, capacity, make_bec, make_bsc, make_mixture, transmit
from .decoder import boost_decode_bit, exact_bit_map, exact_block_map, exact_error_probability, exact_local_map, petal_bit_map
from .errors import BudgetError, ConfigError
from .gf2 import BitVector, Gf2Matrix, gaussian_binomial, random_subspace, rank, solve_membership
from .rm import RmCode, build_rm, encode, rate, restrict_code

__version__ = "0.1.0"
