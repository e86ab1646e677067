"""Grasping strategies and the episode record."""

from .episode import MODES, EpisodeRecord, StrategyConfig, is_marked, mark_region
from .executors import boustrophedon, run_touch_first, run_vision_first, run_vision_touch

__all__ = ["EpisodeRecord", "MODES", "StrategyConfig", "boustrophedon", "is_marked", "mark_region",
           "run_touch_first", "run_vision_first", "run_vision_touch"]
