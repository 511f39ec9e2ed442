"""Guided Local Search and its elite-biased variant for the symmetric TSP."""
__version__ = "0.1.0"

from .tsp_core import (Instance, Tour, bundled_instance, load_instance, parse_tsplib,  # noqa: E402
                       random_tour, tour_cost)
from .gls import GlsConfig, Stop, run_gls  # noqa: E402
from .ebgls import EbglsConfig, Warmup, run_ebgls  # noqa: E402

__all__ = ["Instance", "Tour", "bundled_instance", "load_instance", "parse_tsplib",
           "random_tour", "tour_cost", "GlsConfig", "Stop", "run_gls", "EbglsConfig",
           "Warmup", "run_ebgls", "__version__"]
