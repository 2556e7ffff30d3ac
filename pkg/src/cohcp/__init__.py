"""Coherence-bounded low-rank CP decomposition toolkit.

Dense complex hypermatrices with CP models and canonical form; coherence,
spark, and Kruskal-rank diagnostics; existence/uniqueness/recovery
condition checkers; greedy (WOGA/OGA) and coherence-constrained
alternating solvers; tensor spectral and nuclear norms with certified
sandwich bounds; and physical forward simulators (antenna arrays,
polarization, CDMA, fluorescence) for verified blind recovery.
"""

from .coherence import (
    CoherenceReport,
    coherence,
    krank_lower_bound,
    kruskal_rank_bruteforce,
    spark_bruteforce,
)
from .conditions import (
    coercivity_lower_bound,
    condition_report,
    existence_condition,
    existence_uniqueness_condition,
    expected_rank,
    greedy_bound_check,
    kruskal_condition,
    kruskal_simple_bound,
    sufficient_sum,
    sufficient_sumsq,
    temlyakov_condition,
    uniqueness_condition,
)
from .core import (
    CPModel,
    canonicalize,
    cp_evaluate,
    essentially_equal,
    evaluate_terms,
    frobenius,
    inner_product,
    multilinear_action,
    rank1_outer,
)
from .decompose import (
    AlsDiagnostics,
    Dictionary,
    GreedyResult,
    SolverConfig,
    best_rank1,
    constrained_als,
    divergence_witness,
    oga_continuous,
    random_incoherent_dictionary,
    woga,
)
from .htns import dump_htns, parse_htns, read_htns, write_htns
from .norms import (
    NormCertificate,
    NormConfig,
    duality_gap_check,
    mat_mult_decomposition,
    mat_mult_tensor,
    nuclear_norm_bounds,
    spectral_norm,
    strassen_decomposition,
)
from .simulate import (
    ArrayScene,
    CdmaScene,
    CollinearityResult,
    DoaEstimate,
    PathSet,
    collinearity_check,
    doa_estimate,
    effective_codes,
    has_resolvent_triad,
    is_resolvent,
    polarization_gain,
    polarization_vector,
    simulate_array,
    simulate_cdma,
    simulate_fluorescence,
    steering_vectors,
)

__version__ = "0.1.0"
