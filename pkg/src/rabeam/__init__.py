"""Joint beamforming and rotatable-antenna orientation optimization.

K-pair MISO interference channels whose transmit elements are directional
radiators with steerable boresights, constrained to a spherical cap.
Provides the directional channel model, WMMSE beamforming, Frank-Wolfe
orientation updates with the alternating driver, closed-form MRT/ZF
variants, discrete codebook search (spherical Fibonacci + cross-entropy),
and a reproducible Monte-Carlo experiment harness.
"""

from .channel import (
    ChannelGeometry,
    ChannelTensor,
    OrientationSet,
    boresight_from_angles,
    channel,
    channel_gradient,
    element_gain,
    los_channel,
    nlos_channel,
)
from .discrete import (
    CemParams,
    CemResult,
    Codebook,
    brute_force,
    cem_solve,
    fibonacci_codebook,
    nearest_projection,
    uniform_grid_codebook,
)
from .harness import ExperimentSpec, ResultRow, emit, run_experiment, run_scheme
from .linear_bf import mrt, zf
from .metrics import BeamformerSet, RateReport, rates, wsr_orientation_gradient
from .orient_fw import (
    AoParams,
    AoResult,
    FwIterate,
    FwParams,
    ao_solve,
    armijo_fw_step,
    cap_oracle,
    fw_gap,
    fw_update,
    optimize_orientations,
    optimize_orientations_mrt,
    optimize_orientations_zf,
    tangent_project,
)
from .scene import SceneConfig, Topology, dbm_to_linear, element_positions, generate_topology
from .wmmse import WmmseParams, WmmseState, solve as wmmse_solve

__version__ = "0.1.0"
