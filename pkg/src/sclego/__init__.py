"""Stablecoin risk toolkit: collateral metrics, upstream/downstream risk scoring
and a controller-pluggable peg-dynamics simulator."""

from importlib.resources import files as _files

from .collateral import (
    ComparisonTable,
    InflationInputs,
    JurisdictionTable,
    PriceSeries,
    RedemptionCosts,
    ReturnMode,
    build_comparison,
    j_score,
    median_yield,
    psd,
    real_return,
    rei,
)
from .downstream import (
    Archetype,
    ArchetypeKind,
    Holder,
    HolderSnapshot,
    TokenShareVector,
    classify_archetype,
    concentration_index,
    token_shares,
)
from .dynamics import (
    Controller,
    ControllerKind,
    ScenarioConfig,
    SimState,
    Trajectory,
    emergency_step,
    hedge_step,
    implied_price_qtm,
    integrate_system_dynamics,
    liquidation_step,
    simulate,
    supply_adjust_step,
)
from .errors import ConfigError, InputError, SclegoError, SimulationError
from .model import (
    Category,
    CollateralClass,
    HolderCategory,
    ImpactDegree,
    ImpactObject,
    Mechanism,
    ObjectName,
    StablecoinProfile,
    WeightScheme,
    YieldSource,
    default_impact_objects,
    weight_of,
)
from .upstream import AssessmentRecord, UpstreamScore, metric_from_rubric, rank_by_total, score_upstream

__version__ = "0.1.0"


def data_path(*parts: str):
    """Path to a packaged fixture file, e.g. ``data_path("paper-2025", "assessments.csv")``."""
    return _files(__name__).joinpath("data", *parts)
