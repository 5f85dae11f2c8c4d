"""Comparison models: concat fusion, static weighted fusion, unimodal."""

from .models import (BASELINE_KINDS, BaselineConfig, BaselineError, BaselineModel,
                     concat_fusion, static_weighted, unimodal)

__all__ = ["BASELINE_KINDS", "BaselineConfig", "BaselineError", "BaselineModel",
           "concat_fusion", "static_weighted", "unimodal"]
