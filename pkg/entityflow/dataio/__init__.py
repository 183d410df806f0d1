"""Loading, normalization, windowing and synthesis of multivariate series."""

from entityflow.dataio.injectors import INJECTOR_REGISTRY, get_injector, list_injectors
from entityflow.dataio.loader import load_series, write_series
from entityflow.dataio.normalize import apply_normalize, fit_normalize
from entityflow.dataio.synthetic import synth_generate
from entityflow.dataio.windows import SeriesSplit, iter_batches, make_windows, split_series, window_count

__all__ = [
    "INJECTOR_REGISTRY",
    "get_injector",
    "list_injectors",
    "load_series",
    "write_series",
    "apply_normalize",
    "fit_normalize",
    "synth_generate",
    "SeriesSplit",
    "iter_batches",
    "make_windows",
    "split_series",
    "window_count",
]
