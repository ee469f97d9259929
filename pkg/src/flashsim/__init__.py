"""Mini flash crashes among Bayesian-learning optimal executors."""
from .errors import *  # noqa: F401,F403
from .matrices import build_A, build_B, build_C, build_D_at_te
from .model import (AgentSpec, MarketSpec, PosteriorDrift, SemiSymmetricParams, make_market,
                    phi, phi_dot, posterior_drift, tau)
from .montecarlo import MonteCarloReport, direction_census, rho_limit_study
from .regime import Regime, RegimeReport, classify, classify_market, crash_condition_lhs, find_te
from .simulator import (GridPolicy, PathResult, fit_explosion_exponent, simulate_path,
                        synchronization_gap)

__version__ = "0.1.0"
