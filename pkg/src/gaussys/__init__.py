"""Simulation, closed-form intensities and stationarity classification of Gaussian particle systems."""

from .analytic import PairSpec
from .measures import GaussianMeasure1D, MeasureSpec
from .processes import ProcessSpec

__all__ = ["PairSpec", "MeasureSpec", "GaussianMeasure1D", "ProcessSpec"]
__version__ = "0.1.0"
