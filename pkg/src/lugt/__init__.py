"""Decentralized nonconvex optimization with locally updated gradient tracking."""

from .algorithms import (NetworkState, RunConfig, RunResult, Schedule, atc_gt_step,
                         dgd_local_step, init_state, iterate, lu_gt_step, run)
from .errors import (ConfigError, DivergenceError, InadmissibleError, RankDeficiencyError,
                     TopologyError)
from .metrics import TraceRecord, measure, running_average_stationarity, zeta0
from .objective import (Objective, RegLSData, fd_gradient_check, generate_synthetic,
                        global_minimizer_quadratic, regls_grad, regls_value)
from .topology import Graph, MixingMatrix, build_graph, metropolis_weights, spectrum, validate_mixing

__version__ = "0.1.0"
