"""Two-period EV charging market: reservations day-ahead, re-trading in real time."""

from .model import (
    EMPTY,
    EV,
    Bundle,
    BundleUniverse,
    DayAheadState,
    MarketInstance,
    MechanismOutcome,
    bundle_to_slot_vector,
    enumerate_bundles,
    is_feasible,
    utility,
)
from .posted_price import KEEP, SimpleReserve, run_posted_price
from .solver import SolveSpec, constrained_max_welfare, max_welfare
from .vcg import day_ahead_reserve_vector, day_ahead_vcg, one_shot_vcg, tp_vcg, vcg_outcome

__version__ = "0.1.0"
