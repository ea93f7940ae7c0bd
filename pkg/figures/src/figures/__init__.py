"""Figure panels for condensate-lab run directories."""

from .panels import (
    EXPECTED_SCHEMA,
    Panel,
    PanelSpec,
    SchemaError,
    render,
    render_all,
    slope_annotation,
)

__version__ = "0.1.0"
