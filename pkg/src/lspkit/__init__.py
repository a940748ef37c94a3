"""Least-sensitive-point search for leak detectors in water distribution networks."""

from .detector import DetectorModel, MaxThreshold, WeightedSum, detect, detect_window, residuals, train
from .errors import DetectorError, InpError, LspkitError, LspkitWarning, SearchError, SimulationError
from .hydraulics import (LeakScenario, SimulationResult, SolverOptions, hazen_williams_headloss, leak_outflow,
                         run_eps, solve_steady_state)
from .inp import NetworkModel, load_bundled, node_index, parse_inp, read_network, write_inp
from .measurement import DemandSeries, MeasurementSeries, generate_demands, measure
from .search import (GaConfig, SearchContext, SearchOutcome, SearchSpace, bisection_search, brute_force_lsp,
                     genetic_search, max_undetected_area, nearest_node, spectral_embedding)

__version__ = "0.1.0"
