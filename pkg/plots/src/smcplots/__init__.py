"""Figure scripts over the SMC toolkit's CSV results: strictly read-only,
deterministic batch rendering."""

from .aggregate import (SchemaError, fig1_aggregate, fig2_aggregate,
                        load_results)
from .figures import render_fig1, render_fig2

__version__ = "0.1.0"

__all__ = ["render_fig1", "render_fig2", "fig1_aggregate", "fig2_aggregate",
           "load_results", "SchemaError"]
