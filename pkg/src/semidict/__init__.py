"""Desk-scale dictionary recovery from semirandom sparse samples.

A small laboratory around one pipeline: generate ``y = A x`` batches whose
sparse supports mix random and adversarial draws, band-test candidate
directions against fresh samples, average anchor tuples into new candidates,
reweight adversarial floods away with a small LP, and score the recovered
columns against the planted dictionary up to signed permutation.
"""

__version__ = "0.1.0"

from .candidates import CandidateSet, TupleStrategy, propose_tuples, recover_columns, tuple_statistic
from .coltest import (
    AnticoncResult,
    TestOutcome,
    TestParams,
    band_fractions,
    c0_lower_bound,
    c1_smallness,
    middle_band_mass,
    refine_column,
    test_column,
    test_column_rad,
    test_columns_bulk,
    weak_anticoncentration_check,
)
from .conclab import (
    CoeffTensor,
    ExperimentReport,
    bernstein_bound,
    bernstein_experiment,
    eval_multilinear,
    flattened_norm,
    imbalance_rho,
    khatri_rao_norm_check,
    nu_report,
    psd_tensor_frobenius_check,
    subtensor_frobenius_experiment,
    tail_experiment,
    tensor_all_ones,
    tensor_gram_rank,
    tensor_identity_slice,
    zconc_experiment,
)
from .dlmio import (
    read_batch_dir,
    read_manifest,
    read_matrix,
    write_batch_dir,
    write_manifest,
    write_matrix,
)
from .harness import DictionaryParams, ExperimentConfig, run_experiment, run_trial, trial_model
from .matching import ColumnMatch, MatchReport, match_columns
from .model import (
    Dictionary,
    DictionaryQuality,
    ambiguous_pair,
    dictionary_quality,
    gen_dictionary,
    signed_permutation_distance,
)
from .recovery import (
    LPResult,
    PoolSource,
    RecoverConfig,
    RecoveryResult,
    check_lp_solution,
    detect_support_membership,
    feasible_witness_check,
    recover_dict,
    solve_reweight_lp,
    weighted_subsample,
)
from .sampling import (
    FreshSource,
    SampleBatch,
    SemirandomSpec,
    SparseCode,
    SupportModel,
    ValueModel,
    conditional_inclusion,
    marginal_estimates,
    sample_batch,
)
from .streams import block_ranges, child_sequence, stream

__all__ = [
    "__version__",
    "AnticoncResult", "CandidateSet", "CoeffTensor", "ColumnMatch", "Dictionary",
    "DictionaryParams", "DictionaryQuality", "ExperimentConfig", "ExperimentReport",
    "FreshSource", "LPResult", "MatchReport", "PoolSource", "RecoverConfig",
    "RecoveryResult", "SampleBatch", "SemirandomSpec", "SparseCode", "SupportModel",
    "TestOutcome", "TestParams", "TupleStrategy", "ValueModel",
    "ambiguous_pair", "band_fractions", "bernstein_bound", "bernstein_experiment",
    "block_ranges", "c0_lower_bound", "c1_smallness", "check_lp_solution",
    "child_sequence", "conditional_inclusion", "detect_support_membership",
    "dictionary_quality", "eval_multilinear", "feasible_witness_check",
    "flattened_norm", "gen_dictionary", "imbalance_rho", "khatri_rao_norm_check",
    "marginal_estimates", "match_columns", "middle_band_mass", "nu_report",
    "propose_tuples", "psd_tensor_frobenius_check", "read_batch_dir", "read_manifest",
    "read_matrix", "recover_columns", "recover_dict", "refine_column",
    "run_experiment", "run_trial", "sample_batch", "signed_permutation_distance",
    "solve_reweight_lp", "stream", "subtensor_frobenius_experiment",
    "tail_experiment", "tensor_all_ones", "tensor_gram_rank", "tensor_identity_slice",
    "test_column", "test_column_rad", "test_columns_bulk", "trial_model",
    "tuple_statistic", "weak_anticoncentration_check", "weighted_subsample",
    "write_batch_dir", "write_manifest", "write_matrix", "zconc_experiment",
]
