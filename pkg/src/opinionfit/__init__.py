"""Quality, subject bias and subject inconsistency recovery from opinion scores."""

__version__ = "0.1.0"

from .diagnostics import (  # noqa: E402
    FitComparison,
    Interval,
    chi_square_cdf,
    chi_square_ppf,
    ci_alt,
    ci_mle,
    ci_mos,
    compare_fits,
    nbic,
)
from .errors import DataError, DegenerateVarianceError, DimensionError, NumericalError, OpinionFitError  # noqa: E402
from .legacy import RejectionReport, bt500_pipeline, bt500_reject, p913_bias_removal, p913_pipeline  # noqa: E402
from .model import (  # noqa: E402
    ModelParams,
    MosParams,
    ScoreTensor,
    apply_zero_mean_bias,
    derivatives,
    log_likelihood,
    residuals,
)
from .solvers import FitReport, Method, SolverConfig, fit, nr_initialize, solve_ap, solve_mos, solve_nr  # noqa: E402
from .synthetic import (  # noqa: E402
    PanelLayout,
    SimResult,
    corrupt_shuffle,
    coverage_experiment,
    generate_synthetic,
    generate_synthetic_mos,
    robustness_experiment,
)
