"""dettalab: track-keyed attribute filtering with stride-scheduled analysis.

A small laboratory for studying temporal g-h filtering of per-person
attribute estimates (head orientation, upper-body joints) keyed by tracker
ids, the throughput/quality tradeoff of running analysis modules with a
stride, and the usual evaluation measures (PCO, PCKh, CLEAR) over fully
ground-truthed synthetic scenarios.
"""

from .bank import (
    ChannelParams,
    CostModel,
    FilterBank,
    FreeFlightConfig,
    ModuleSchedule,
    account_cost,
    should_observe,
    summarize_throughput,
)
from .core import (
    BBox,
    FrameStamp,
    GroundTruthRecord,
    HeadOrientation,
    JointName,
    Scenario,
    SkeletonObservation,
    angular_diff,
    read_scenario,
    wrap_angle,
    write_scenario,
)
from .ghfilter import GHParams, GHState, PointGHState
from .metrics import attr_eval, clear, clear_matching, pckh, pco
from .pipeline import RunConfig, evaluate, run_scenario
from .simgen import NoiseSpec, PersonSpec, ScenarioSpec, generate, preset
from .tracker import IouTracker, associate

__version__ = "0.1.0"
