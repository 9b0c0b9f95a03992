"""Desk-scale multi-task heatmap pose estimation."""

from ._core import *  # noqa: F401,F403
from ._core import PoseforgeError

__version__ = "0.1.0"
