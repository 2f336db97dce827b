"""User-controllable sequential recommendation with counterfactual
retrospective and prospective explanations."""

__version__ = "0.1.0"

from .catalog import Catalog
from .records import ExplanationRecord
from .recommend import RecommendationList, recommend_top_k
from .retrospective import RetroRequest, greedy_retrospective, relaxed_retrospective
from .prospective import prospective_explanation
from .render import render_explanation
from .scorers import ScorerParams, init_params, score, score_gradient
from .windows import MaskVector, SequenceWindow, apply_mask

__all__ = [
    "Catalog",
    "ExplanationRecord",
    "MaskVector",
    "RecommendationList",
    "RetroRequest",
    "ScorerParams",
    "SequenceWindow",
    "apply_mask",
    "greedy_retrospective",
    "init_params",
    "prospective_explanation",
    "recommend_top_k",
    "relaxed_retrospective",
    "render_explanation",
    "score",
    "score_gradient",
]
