class PlotkitError(Exception):
    """Base for everything raised on purpose by this package."""


class SchemaError(PlotkitError):
    """Input CSV does not match the sweep schema."""


class EmptyDataError(PlotkitError):
    """Nothing left to plot after parsing and exclusions."""
