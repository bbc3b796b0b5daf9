"""Remote state preparation lab.

Capacity (maximum possible information) of finite quantum encodings,
substate decompositions, and a simulator for the substate-based remote
state preparation protocol with exact communication accounting.
"""

__version__ = "0.1.0"

from rsp_lab.config import Tolerances
from rsp_lab.errors import RSPLabError

__all__ = ["Tolerances", "RSPLabError", "__version__"]
