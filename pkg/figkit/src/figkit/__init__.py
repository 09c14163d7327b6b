"""Post-hoc figure rendering for KL-budget training logs.

Strictly one-directional: documented CSV schemas in, image files out. All
derived numbers come from the training side, so figures cannot disagree with
the logged data.
"""

from .schemas import SchemaError
from .render import ALL_KINDS, render_all

__version__ = "0.1.0"
