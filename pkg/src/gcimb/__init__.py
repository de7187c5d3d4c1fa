"""Distributed multi-Bernoulli track-before-detect tracking with GCI fusion.

Particle MB-TBD filters run at each node of a sensor network; neighbouring
posteriors are combined by generalized covariance intersection into a
generalized multi-Bernoulli density and collapsed back to multi-Bernoulli form.
"""

from .config import ConfigError, ScenarioConfig, Topology, load_config, scenario1, scenario2
from .fusion import (
    FusionMap,
    FusionWeights,
    enumerate_fusion_maps,
    fuse_track_pair,
    gci_mb_fuse,
    metropolis_weights,
    moment_match,
    sequential_fuse,
)
from .kde import KdeDensity, eval_kde, fit_kde, rut_bandwidth
from .mbfilter import FilterConfig, LocalFilter, MotionModel
from .metrics import OspaParams, approximation_error, efficiency_proportion, ospa
from .rfs import (
    BernoulliTrack,
    GaussianDensity,
    GMBHypothesis,
    GMBPosterior,
    MBPosterior,
    MixtureDensity,
    ParticleDensity,
    cardinality_distribution,
    check_separation,
    joint_existence_weight,
    phd_gmb,
    phd_mb,
)
from .simnet import MonteCarloResult, monte_carlo, run_scenario
from .tbd import GroundTruth, SensorModel, generate_frame, log_likelihood_ratio

__version__ = "0.1.0"
