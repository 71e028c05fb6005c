"""Geometric fingertip retargeting: unsupervised training of human-hand to
robot-hand joint mappings, with analytical kinematics, a from-scratch
autodiff tape, surrogate models, evaluation metrics, and a serving layer.
"""

from . import autodiff, kinematics
from .errors import GeortError

__version__ = "0.1.0"

__all__ = ["GeortError", "autodiff", "kinematics", "__version__"]
