"""Figure renderer for the dbar experiment CSVs (mean + 95% band plots)."""

__version__ = "0.1.0"
