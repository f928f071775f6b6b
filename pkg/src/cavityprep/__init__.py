"""Truncated-Fock-space toolkit for cavity state preparation studies:
master-equation and photodetection-trajectory solvers, heralded photon
generation and emission shaping, quadrature-jump superposition
preparation, and adiabatic-elimination cross-checks.
"""
from .fock import (DensityMatrix, LayoutError, ModeLayout, ModeOperator,
                   StateVector, TruncationError, basis_state, cat_state,
                   coherent_state, css_fidelity_closed, embed, fidelity,
                   mode_operators, position_density, quadrature_jump_state,
                   vacuum_state, wigner)
from .photon import (HeraldOutcome, HeraldParams, ScanRow, decaying_exp_target,
                     emission_density, emission_density_full, gaussian_target,
                     herald_ensemble, herald_photon, heralding_model,
                     overdamping_scan, readout_model, release_rate,
                     ringdown_occupation, ringdown_oscillates,
                     rising_exp_target, scan_to_csv, shaping_schedule)
from .schedule import Schedule
from .trajectory import (Channel, DegenerateStateError, EnsembleSummary,
                         HamiltonianTerm, IntegrationError, OpenModel,
                         StepSizeError, TrajectoryRecord,
                         ZeroProbabilityJumpError, apply_jump, ensemble_run,
                         evolve_master, evolve_master_piecewise, evolve_until,
                         lindblad_derivative,
                         simulate_trajectory, superop_G, superop_H)

__version__ = "0.1.0"
