"""Block-encoding synthesis from Kronecker products and linear combinations."""

from .circuit import Circuit, CostReport, Gate, cnot_cost, evaluate, gate_census
from .combine import (
    CPLikeSpec,
    SpecError,
    StatePrepPair,
    kron_encodings,
    kron_many,
    lcu,
    select_oracle,
    shared_swap_select,
    state_prep_pair,
    swap_register,
    synthesize_cp,
)
from .cpd import CPModel, cp_als, cp_to_spec, detensorize, rank_sweep, tensorize
from .encoding import BlockEncoding, apply, dilate, encoding_error, leading_block, pad_ancillas
from .models import laplace_like, tfim, xyz

__version__ = "0.1.0"
