"""Scene-flow geometry core: pose solving, flow decomposition, metrics and losses."""

from ._flowgeom import FlowgeomError, decompose, evaluate, synthesize, total_loss
from .container import read_container

__all__ = ["FlowgeomError", "decompose", "evaluate", "read_container", "synthesize", "total_loss"]
