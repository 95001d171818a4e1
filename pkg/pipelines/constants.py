# -*- coding: utf-8 -*-
from enum import Enum


class constants(Enum):
    ######################################
    # Agent labels
    ######################################
    RADIATIVE_AGENT_LABEL = "radiative"

    ######################################
    # Angular quadrature
    ######################################
    DEFAULT_N_POLAR = 8
    DEFAULT_N_AZIMUTH = 8

    ######################################
    # Solvers
    ######################################
    DEFAULT_CFL = 0.5
    NEWTON_TOL = 1e-12
    NEWTON_MAX_ITER = 50
    LINEAR_TOL = 1e-12
    LIMIT_NEWTON_TOL = 1e-11
    LIMIT_NEWTON_MAX_ITER = 30
    LIMIT_FIXED_POINT_MAX_ITER = 2000
    T_OF_U_TOL = 1e-13
    # Courant components below this are treated as exactly zero velocity
    ZERO_VELOCITY_TOL = 1e-14
    LOG_EVERY_N_STEPS = 200

    ######################################
    # Diagnostics
    ######################################
    GRONWALL_C_MAX = 1e3

    ######################################
    # Outputs
    ######################################
    CSV_FLOAT_FORMAT = "%.17g"
    SNAPSHOT_MAGIC = b"RHTSNAP1"
    ERROR_LOG_DIR = "/tmp/pipelines/error_logs"
    ENERGY_COLUMNS = [
        "time",
        "energy_T5",
        "energy_psi2",
        "dissipation_grad",
        "dissipation_relax",
        "boundary_outflow",
        "boundary_robin",
        "residual",
    ]
    STEP_COLUMNS = ["step", "time", "dt_used", "newton_iters_max", "clamped_cells"]
    ENTROPY_COLUMNS = ["time", "H", "H_T_part", "H_psi_part", "error_L4_4", "error_L2_2"]
    LIMIT_COLUMNS = ["time", "energy_T5", "conserved_u", "t_min", "t_max"]
