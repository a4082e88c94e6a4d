"""Twin-field QKD key rates, bounds, protocol Monte Carlo and phase-drift models."""

__version__ = "0.1.0"

from .bounds import CurveSpec, crossover_distance, ideal_curves, single_repeater_bound, skc
from .core import (
    ChannelSpec,
    DetectorSpec,
    Phase,
    ProtocolSpec,
    SliceIndex,
    binary_entropy,
    intrinsic_qber,
    poisson_pmf,
    slice_match_probability,
    slice_of,
    transmittance,
)
from .optimize import area_objective, optimal_m, optimal_mu
from .phase import (
    DriftModel,
    differential_phase,
    drift_sigma,
    duty_cycle_estimate,
    residual_phase_qber,
    simulate_drift,
    visibility_to_qber,
)
from .protocol import SimTally, estimate_from_tally, run_batch, twin_mismatch_qber
from .rates import channel_gain_qber, compose_qber, qkd_rate, single_photon_bounds, tfqkd_rate
