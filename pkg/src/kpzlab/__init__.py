"""Simulation lab for KPZ-class path measures under upper-tail conditioning:
discrete last passage percolation, lattice directed polymers, rare-event
conditioning engines, and statistical checks of the limit predictions."""

__version__ = "0.1.0"

from .env import (
    Distribution,
    EnvGrid,
    TiltSpec,
    constant,
    exponential,
    log_gamma,
    sample_grid,
    sample_tilted_grid,
)
from .lpp import (
    LatticePath,
    PassageField,
    geodesic,
    passage_field,
    point_to_point,
    quadrangle_defect,
    two_path_passage,
)
from .polymer import (
    PolymerField,
    QuenchedMarginal,
    backbone,
    log_partition,
    log_partition_field,
    quenched_marginal,
    restricted_free_energy,
    sample_path,
)
from .scaling import CalibrationReport, ScalingMap, calibrate
from .rare import (
    ConditionedEnsemble,
    ModelSpec,
    TailEstimate,
    TailRatioEstimate,
    condition,
    estimate_tail,
    tail_ratio,
)
