"""Loglikelihood-ratio confidence regions for quantum state tomography.

The package builds regions of states consistent with observed tomography
counts: the set of rho whose ratio statistic -2 log[L(rho)/L_max] stays
below a cutoff chosen so the region captures the true state with at
least the requested probability.  Submodules:

* ``states``     -- density matrices, POVMs, datasets, simulation
* ``bloch``      -- generalized Bloch parametrization
* ``io``         -- the dataset JSON file format
* ``likelihood`` -- log-likelihood, gradient, MLE, the ratio statistic
* ``threshold``  -- CCDF bounds and their inversion to cutoffs
* ``region``     -- membership, support intervals, boundary, enclosures
* ``studies``    -- exhaustive CCDFs, coverage Monte Carlo, optimality
* ``cli``        -- the command-line front end
"""

from .bloch import bloch_to_matrix, bloch_to_state, matrix_to_bloch, state_to_bloch
from .errors import (
    ConvergenceError,
    DomainError,
    EnumerationCapError,
    ValidationError,
)
from .io import bundled_qubit_dataset, load_dataset, save_dataset
from .likelihood import (
    LogLikelihood,
    MleResult,
    gradient,
    log_likelihood,
    loglikelihood_ratio,
    mle,
)
from .region import (
    BoundaryPoint,
    Enclosure,
    RegionSpec,
    boundary_sample,
    bounding_ball,
    bounding_ellipsoid,
    build_region,
    contains,
    region_report,
    support_interval,
)
from .states import (
    DensityMatrix,
    Effect,
    MeasurementSetting,
    Povm,
    TomographyDataset,
    born_probabilities,
    pauli_settings,
    random_density_matrix,
    simulate_dataset,
)
from .studies import (
    CoverageReport,
    DatasetEnumeration,
    DiscreteModel,
    coin_model,
    coverage_mc,
    exhaustive_ccdf,
    lr_samples,
    make_discrete_model,
    naive_ellipsoid_baseline,
    pr_assignment,
    pr_optimality_check,
    pr_region,
    qubit_state_grid,
    state_dependent_cutoff,
)
from .threshold import (
    CcdfCurve,
    ChiSquare,
    Eq9Bound,
    FixedCutoff,
    Lemma1,
    chi2_ccdf,
    degrees_of_freedom,
    eq9_bound,
    inner_outer_test,
    lemma1_bound,
    rule_from_name,
    solve_threshold,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
