"""satml: spacecraft-telemetry analysis workbench.

Ingests heterogeneous telemetry channels, builds thermal-power and
belt-crossing datasets, trains interpretable multi-target models, computes
three feature-importance scores, and serves runs to a browser workbench.
"""

from .util import TOOL_VERSION as __version__  # noqa: F401
