"""flimsel: maximum-likelihood decay fitting, mono/bi-exponential model
selection with simulation-calibrated likelihood-ratio thresholds, and
information-theoretic discrimination limits for photon arrival data."""

__version__ = "0.1.0"

from .errors import (DatasetFormatError, DegenerateModelError, FlimselError,
                     InsufficientDataError, NoSignalError,
                     OptimizerFailureError, PrecisionError, QuadratureError)
from .models import (DEFAULT_PULSE_PERIOD_NS, LIFETIME_BOUNDS_NS, RATE_BOUNDS,
                     DecayModel, PhotonDataset, SpeciesParams,
                     amplitude_fraction, component_density, mixture_density,
                     noise_density, signal_proportions)
from .likelihood import (Gradient, gradient, log_likelihood,
                         log_likelihood_and_gradient)
from .estimator import FitConfig, FitResult, fit, multistart_seeds
from .selection import (DEFAULT_THRESHOLD_GRID, ErrorRateReport, Scenario,
                        SelectionOutcome, calibrate, lrt_statistic, select)
from .simulate import (SimulationSpec, sample_counts, sample_dataset,
                       sample_dataset_with_counts, sample_times,
                       sample_truncated_exponential, stream, substream_seed,
                       truncated_exponential_quantile)
from .limits import (DiscriminationProblem, ErrorRateEstimate,
                     empirical_ml_error, l1_distance_single, ml_discriminator,
                     optimal_error_rate)
from .dataio import read_dataset, write_dataset
from .experiments import (EXPERIMENT_PULSE_COUNT, Expectation, ExperimentPlan,
                          ExperimentResult, limits_case_a, limits_case_b,
                          plan_from_manifest, run, scenario_closer_lifetimes,
                          scenario_table2)

__all__ = [name for name in dir() if not name.startswith("_")]
