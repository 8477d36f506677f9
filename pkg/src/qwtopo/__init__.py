"""Topological phases and ballistic spreading of a q-plate quantum walk and the SSH chain."""

__version__ = "0.1.0"

from ._accel import backend
from .errors import GapClosedError, ValidationError
from .walk import (
    L_COIN, QWP_MATRIX, R_COIN, CoinState, LatticeState, MomentReport, ProbabilityDistribution,
    SampledMoments, SiteCounts, StepParams, apply_qplate, apply_qwp, coin_expectations,
    distribution, evolve, moments, propagate, sample_counts, sampled_moments, step,
)
from .bands import (
    asymptotic_moments, band_gap, band_point, bloch_operator, bloch_vector, diagonalize_bloch,
    group_velocity, max_group_velocity, quasi_energy, residue_oracle, spreading_coefficient,
    spreading_coefficient_closed, winding_number,
)
from .ssh import (
    SSHEvolutionConfig, SSHParams, ssh_band, ssh_evolve, ssh_L, ssh_residue_oracle, ssh_winding,
)
from .experiments import (
    SweepConfig, detect_transition, run_coin_sweep, run_convergence, run_delta_sweep,
    run_ssh_sweep,
)
