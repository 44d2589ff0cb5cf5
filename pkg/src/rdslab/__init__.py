"""rdslab: a simulation and diagnostics lab for random dynamical systems
driven by memoryless noise.

The library samples driving realizations on a grid (noise), steps example
systems along them (systems), estimates properties of their invariant random
measures (measures), and runs trajectory diagnostics with confidence
intervals (diagnostics).  The rdslab command line wraps all of it behind
reproducible JSON reports.
"""

from .noise import (
    NoisePath,
    NoiseSeq,
    UniformLaw,
    sample_noise_seq,
    sample_wiener,
    steering_path,
    zero_path,
)
from .systems import (
    SystemSpec,
    circle_map,
    circle_step,
    double_well,
    double_well_drift,
    double_well_drift_jacobian,
    ensemble_flow,
    flow,
    flow_pair,
    flow_trajectory,
    flow_with_tangent,
    one_sided_lipschitz_constant,
    sample_driving,
)
from .measures import (
    ClusterReport,
    EmpiricalRandomMeasure,
    StationarySampler,
    cluster_count,
    diagonal_mass,
    energy_distance,
    pullback_convergence,
    pullback_ensemble,
    pullback_sample,
    single_linkage_count,
    stationary_sampler,
)
from .diagnostics import (
    CocycleReport,
    GronwallReport,
    HitReport,
    LyapunovReport,
    SteerReport,
    SyncReport,
    TrialPlan,
    cocycle_check,
    contractibility_test,
    gronwall_check,
    lyapunov_max,
    random_state_pairs,
    stability_test,
    steer_demo,
    sync_probability,
    transitivity_test,
)

__version__ = "0.1.0"
