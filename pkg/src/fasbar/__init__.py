"""Successive Bayesian reconstruction of flexible-antenna port channels.

Submodules:

- ``channel``   geometry, clustered channel generators, pilot reception
- ``kernels``   exponential / Bessel / sample-covariance priors
- ``gp``        Gaussian conditioning and max-variance sampling
- ``sbar``      offline port plan + online weighted-sum reconstruction
- ``baselines`` DFT-grid OMP, ML angle refinement, zero-order hold
- ``analysis``  closed-form MSE, NMSE, Monte Carlo experiments
- ``config``, ``cli``  experiment files and the ``fasbar`` command
"""

__version__ = "0.1.0"

from .channel import (
    ArrayGeometry,
    PilotBatch,
    PortSchedule,
    SscParams,
    generate_rich_channel,
    generate_ssc_channel,
    receive_pilots,
    steering_vector,
)
from .kernels import Kernel, KernelHyper, bessel_kernel, covariance_kernel, exponential_kernel, regularize_psd
from .gp import PosteriorState, RegressionConfig, condition, max_variance_index, sequential_regression
from .sbar import SbarPlan, design_plan, reconstruct, schedule_to_switch_matrices
from .baselines import fas_ml, fas_omp, random_switch_matrix, selmmse, selmmse_schedule
from .analysis import lemma1_mse, lemma2_min_mse, nmse, run_experiment
