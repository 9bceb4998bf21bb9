"""Margins, moments and C-bounds for binary, multiclass and multi-label majority votes."""

from .bounds import (
    BoundReport,
    MomentPair,
    ReportSettings,
    cbound,
    full_report,
    moments,
    multilabel_cbound,
    omega_cbound,
    sandwich,
    strength_bound,
    union_bound,
)
from .core import (
    Dataset,
    Ensemble,
    Example,
    LabelSpace,
    Posterior,
    RealValuedTableVoter,
    StumpVoter,
    TableVoter,
    aggregate,
    predict_multiclass,
    predict_multilabel,
    risk,
)
from .errors import BoundUndefined, ConfigError, InvariantViolation
from .margins import (
    binary_margin,
    multiclass_margin,
    multilabel_margin,
    omega_margin,
    strength_margin,
    two_margin,
)
from .minimizer import MinimizeConfig, MinimizeResult, margin_operator, minimize

__version__ = "0.1.0"
