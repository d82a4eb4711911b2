"""Non-adaptive group testing under Markovian burst infections.

Randomized block test design, per-item threshold decoding, closed-form
achievability/converse bounds and a seeded Monte Carlo harness.
"""

from burstgt.markov import (
    InfectionVector,
    MarkovParams,
    binary_entropy,
    derive_params,
    entropy_asymptotic,
    entropy_brute_force,
    entropy_chain_rule,
    params_from_rates,
    sample_infection_vector,
)
from burstgt.design import (
    DesignParams,
    TestMatrix,
    block_infection_prob,
    derive_design,
    derive_iid_design,
    sample_block_matrix,
    sample_iid_matrix,
    sample_matrix,
)
from burstgt.channel import OutcomeVector, run_tests
from burstgt.decoder import (
    DecodeResult,
    ErrorTally,
    decode,
    screen,
    tally_errors,
    threshold_decode,
)

__version__ = "0.1.0"
