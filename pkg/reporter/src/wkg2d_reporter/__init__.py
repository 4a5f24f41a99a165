"""Publication-style figures and a markdown report from wkg2d run
directories; strictly a consumer of the run artifacts."""

from .artifacts import InvalidArtifactError, MissingArtifactError
from .render import RenderResult, render_report

__version__ = "0.1.0"

__all__ = [
    "InvalidArtifactError",
    "MissingArtifactError",
    "RenderResult",
    "render_report",
    "__version__",
]
