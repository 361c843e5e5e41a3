"""Inhomogeneous Galton-Watson trees: offspring families, analytical moments,
simulation, maximum-likelihood fitting and model checking."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CorpusFormatError,
    FinitenessError,
    IGWTError,
    InfeasibleMomentsError,
    InvalidParameterError,
    NoFeasibleStartError,
    SimulationGuardError,
    TruncationError,
)
from .offspring import (  # noqa: E402
    Family,
    GeometricZeroParams,
    MomentPair,
    PoissonZeroParams,
    feasible_region,
    from_moments,
    min_variance,
    pgf,
    pmf,
    sample,
    to_moments,
)
from .structures import (  # noqa: E402
    ModelSpec,
    StructureKind,
    StructureSpec,
    eval_structure,
    finiteness_certificate,
    finiteness_check,
    grid_model,
)
from .tree import (  # noqa: E402
    OrderedTree,
    SufficientStats,
    TreeSummary,
    parse_corpus,
    read_corpus,
    serialize_corpus,
    summarize,
    tally,
    write_corpus,
)
from .moments import (  # noqa: E402
    MomentReport,
    correlated_gen2_variance,
    generation_cov,
    generation_moments,
    height_distribution,
    leaf_generation_cov,
    leaf_generation_moments,
    leaf_total_moments,
    moment_report,
    total_moments,
)
from .simulate import SimConfig, sample_ensemble, sample_tree, substream  # noqa: E402
from .estimate import FitOptions, FitResult, fit, log_likelihood, profile_feasibility  # noqa: E402
from .check import CheckReport, check, ecdf_with_band, empirical_generation_moments  # noqa: E402
