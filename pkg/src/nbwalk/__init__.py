"""Non-backtracking walks, cycle censuses and spectral radii of multigraphs."""

from .census import (
    CogrowthEstimate,
    CycleCensus,
    NbOperator,
    RamanujanCertificate,
    close_to_cycle,
    cogrowth,
    cycle_census,
    fnb_injection,
    nb_operator,
    nb_path_count,
    ramanujan_certificate,
    reduce_excise,
    vitali_select,
)
from .cover import (
    CycleClass,
    CycleKind,
    CycleStats,
    LiftTrace,
    classify_cycle,
    cycle_stats,
    escape_times,
    lift_trace,
    nt_cycle_times,
    reduce,
)
from .montecarlo import (
    ExperimentReport,
    WalkConfig,
    WalkStuck,
    backtrack_pair_experiment,
    escape_tail_experiment,
    nt_density_experiment,
    qn_experiment,
    simulate_nbw,
    simulate_srw,
    trial_seed,
)
from .multigraph import (
    Dart,
    FamilySpec,
    GraphOracle,
    Multigraph,
    ResourceGuardError,
    ValidationReport,
    ball,
    build_graph,
    make_oracle,
    validate,
)
from .spectral import (
    ReturnTable,
    SpectralReport,
    cogr_from_rho,
    lazy_rho,
    return_probabilities,
    rho_estimate,
    rho_from_cogrowth,
    tree_rho,
)

__version__ = "0.1.0"
