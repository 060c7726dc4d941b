"""Self-exciting point-process crime forecasting with a data-driven Green's function kernel."""

from .ddgf import DdgfConfig, fit_ddgf
from .em import EmConfig, em_fit, em_kernel
from .evaluate import Protocol, backtest, hit_rate_curve
from .gridding import GridSpec, rasterize
from .hawkes_sim import SimSpec, simulate
from .ingest import EventCatalog, filter_catalog, parse_catalog, read_canonical, write_canonical
from .kernels import TriggerKernel
from .predict import IntensityMap, PredictConfig, intensity_map

__version__ = "0.1.0"

__all__ = [
    "DdgfConfig", "EmConfig", "EventCatalog", "GridSpec", "IntensityMap", "PredictConfig", "Protocol",
    "SimSpec", "TriggerKernel", "backtest", "em_fit", "em_kernel", "filter_catalog", "fit_ddgf",
    "hit_rate_curve", "intensity_map", "parse_catalog", "rasterize", "read_canonical", "simulate",
    "write_canonical",
]
