class PlotError(Exception):
    """Base class for rendering failures."""


class SchemaError(PlotError):
    """An input CSV is missing a required column or is malformed."""


class InputError(PlotError):
    """An input directory has no usable CSV files."""
