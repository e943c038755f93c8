"""Regret minimization against history-dependent experts on the de Bruijn graph.

Exact game values, the continuum (heat-equation) limit, the local
de Bruijn problem, and playable strategies.
"""

__version__ = "0.1.0"

from ._accel import backend
from .debruijn import HistoryState, enumerate_states, shift, shift_word, successor_table
from .experts import (ExpertPanel, diagnostics, parity_panel, random_grid_panel, read_panel,
                      static_panel, write_panel)
from .game import (GameSpec, HorizonTooLarge, dpp_check, g3_step, optimal_move, rescaled_value,
                   rescaled_values, value_bruteforce, value_exact)
from .local import (HessianContext, cell_gap, h_limit, h_recursive, h_tables, h_treesum,
                    indifference_value, local_bruteforce)
from .payoff import Payoff, check_properties, linear_payoff, max_payoff, parse_payoff, softmax_payoff
from .pde import PdeSolution, heat_kernel, monte_carlo_u
from .strategy import (BlockInvestor, ExactInvestor, ExhaustiveMarket, GradientInvestor,
                       GreedyMarket, RandomMarket, Trajectory, simulate)

__all__ = [name for name in dir() if not name.startswith("_")]
