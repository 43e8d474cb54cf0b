"""Monte-Carlo simulator and closed-form analytics for cell-free massive-MIMO
integrated sensing and communication."""
from .scenario import MODES, ScenarioConfig

__version__ = "0.1.0"
__all__ = ["MODES", "ScenarioConfig"]
