"""Figure rendering for federated herding experiment CSV logs."""

from .errors import InputError, PlotError, SchemaError
from .render import PlotSpec, render

__all__ = ["PlotSpec", "render", "PlotError", "SchemaError", "InputError"]
