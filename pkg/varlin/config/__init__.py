"""Configuration module for varlin."""

from varlin.config.messages import get_message, get_messages
from varlin.config.reference import REFERENCE_DEFAULTS, REFERENCE_MODELS, get_model_description, list_reference_models
from varlin.config.tolerance import (
    TOLERANCE_PROFILES,
    VARLIN_CONFIG,
    BudgetConfig,
    CalibrationConfig,
    ToleranceConfig,
    VarlinConfig,
    apply_tolerance_profile,
    get_config,
    update_config,
)

__all__ = [
    "get_message",
    "get_messages",
    "REFERENCE_DEFAULTS",
    "REFERENCE_MODELS",
    "get_model_description",
    "list_reference_models",
    "TOLERANCE_PROFILES",
    "VARLIN_CONFIG",
    "BudgetConfig",
    "CalibrationConfig",
    "ToleranceConfig",
    "VarlinConfig",
    "apply_tolerance_profile",
    "get_config",
    "update_config",
]
