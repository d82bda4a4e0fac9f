"""Per-track filter lifecycle, stride scheduling, and cost accounting.

The bank owns one filter per (track id, attribute channel). Keys are born
on the first consumed observation, advanced every frame the track is
present (predicting through frames without a scheduled or available
observation), and destroyed after the track has been absent for
``expire_after`` consecutive frames. An ID switch therefore shows up as
one key dying and a fresh one initializing, with no state carried over.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from . import ghfilter
from .core import (
    CHANNEL_HEAD,
    JOINTS,
    AttributeObservation,
    BBox,
    ConfigError,
    FrameStamp,
    HeadOrientation,
    JointName,
    SkeletonObservation,
    TimeRegressionError,
    TrackAttrRecord,
    TrackId,
    joint_channel,
)
from .ghfilter import GHParams

log = logging.getLogger(__name__)

MODULE_HEAD = "head"
MODULE_SKELETON = "skeleton"

_JOINT_CHANNELS = tuple(joint_channel(j) for j in JOINTS)


def module_of_channel(channel: str) -> str:
    return MODULE_HEAD if channel == CHANNEL_HEAD else MODULE_SKELETON


# ---------------------------------------------------------------------------
# Scheduling

@dataclass(frozen=True)
class ModuleSchedule:
    """Run the module on frames where ``frame_index % stride == phase``."""

    stride: int = 1
    phase: int = 0

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if not 0 <= self.phase < self.stride:
            raise ConfigError(
                f"phase must be in [0, stride), got phase={self.phase} stride={self.stride}")


@dataclass(frozen=True)
class FreeFlightConfig:
    modules: Mapping[str, ModuleSchedule] = field(
        default_factory=lambda: {MODULE_HEAD: ModuleSchedule(), MODULE_SKELETON: ModuleSchedule()})

    @classmethod
    def staggered(cls, strides: Mapping[str, int]) -> "FreeFlightConfig":
        """Round-robin phases (module i gets phase i % stride_i) so co-hosted
        modules avoid firing on the same frames where possible."""
        mods = {}
        for i, (name, stride) in enumerate(strides.items()):
            mods[name] = ModuleSchedule(stride, i % stride)
        return cls(mods)

    @classmethod
    def single(cls, module: str, stride: int = 1, phase: int = 0) -> "FreeFlightConfig":
        return cls({module: ModuleSchedule(stride, phase)})


def should_observe(module: str, frame_index: int, config: FreeFlightConfig) -> bool:
    """Whether the analysis module runs (and can feed filters) on this frame."""
    if frame_index < 0:
        raise ValueError(f"frame_index must be >= 0, got {frame_index}")
    sched = config.modules.get(module)
    if sched is None:
        raise ConfigError(f"module {module!r} is not configured")
    return frame_index % sched.stride == sched.phase


def scheduled_calls(n_frames: int, sched: ModuleSchedule) -> int:
    """Number of frames in [0, n_frames) the schedule fires on."""
    if n_frames <= sched.phase:
        return 0
    return -(-(n_frames - sched.phase) // sched.stride)


# ---------------------------------------------------------------------------
# Cost accounting

@dataclass(frozen=True)
class CostModel:
    """Fixed pipeline overhead per frame plus a per-invocation cost per module."""

    fixed_per_frame: float = 0.001
    per_call: Mapping[str, float] = field(
        default_factory=lambda: {MODULE_HEAD: 0.009, MODULE_SKELETON: 0.009})

    def __post_init__(self) -> None:
        if not (math.isfinite(self.fixed_per_frame) and self.fixed_per_frame >= 0.0):
            raise ConfigError(f"fixed_per_frame must be >= 0, got {self.fixed_per_frame!r}")
        for name, c in self.per_call.items():
            if not (math.isfinite(c) and c >= 0.0):
                raise ConfigError(f"per_call[{name!r}] must be >= 0, got {c!r}")


def account_cost(frame_index: int, config: FreeFlightConfig, cost: CostModel) -> float:
    """Seconds charged for this frame under the declared-cost model."""
    charge = cost.fixed_per_frame
    for module, c in cost.per_call.items():
        if should_observe(module, frame_index, config):
            charge += c
    return charge


@dataclass(frozen=True)
class ThroughputSummary:
    total_frames: int
    total_cost_s: float
    effective_hz: float
    model_hz: float
    speedup: float


def summarize_throughput(
    total_frames: int, config: FreeFlightConfig, cost: CostModel
) -> ThroughputSummary:
    """Effective Hz from summed per-frame charges, plus the analytic model.

    The analytic rate treats each module as amortized over its stride:
    ``1 / (f + sum_m c_m / s_m)``; the speedup is relative to running every
    module at stride 1. Zero total cost reports infinity explicitly.
    """
    total = total_frames * cost.fixed_per_frame
    amortized = cost.fixed_per_frame
    full = cost.fixed_per_frame
    for module, c in cost.per_call.items():
        sched = config.modules.get(module)
        if sched is None:
            raise ConfigError(f"module {module!r} is not configured")
        total += scheduled_calls(total_frames, sched) * c
        amortized += c / sched.stride
        full += c
    effective = math.inf if total == 0.0 else total_frames / total
    model = math.inf if amortized == 0.0 else 1.0 / amortized
    speedup = 1.0 if amortized == 0.0 else full / amortized
    return ThroughputSummary(total_frames, total, effective, model, speedup)


# ---------------------------------------------------------------------------
# Per-channel filter parameters

_WRISTS = (JointName.L_WRIST, JointName.R_WRIST)


def _default_joint_params() -> dict[JointName, GHParams]:
    # Wrists move fastest on their own, so they get the softer gains; the
    # remaining joints mostly ride the person's body motion.
    return {j: GHParams(0.5, 0.02) if j in _WRISTS else GHParams(0.9, 0.2)
            for j in JOINTS}


@dataclass(frozen=True)
class ChannelParams:
    head: GHParams = GHParams(0.5, 0.02)
    joints: Mapping[JointName, GHParams] = field(default_factory=_default_joint_params)

    def __post_init__(self) -> None:
        missing = [j.value for j in JOINTS if j not in self.joints]
        if missing:
            raise ConfigError(f"missing gains for joints: {missing}")

    def for_channel(self, channel: str) -> GHParams:
        if channel == CHANNEL_HEAD:
            return self.head
        for j in JOINTS:
            if joint_channel(j) == channel:
                return self.joints[j]
        raise ValueError(f"unknown attribute channel {channel!r}")

    def with_channel(self, channel: str, params: GHParams) -> "ChannelParams":
        if channel == CHANNEL_HEAD:
            return replace(self, head=params)
        joints = dict(self.joints)
        for j in JOINTS:
            if joint_channel(j) == channel:
                joints[j] = params
                return replace(self, joints=joints)
        raise ValueError(f"unknown attribute channel {channel!r}")

    @classmethod
    def keep_last(cls) -> "ChannelParams":
        return cls(head=ghfilter.KEEP_LAST,
                   joints={j: ghfilter.KEEP_LAST for j in JOINTS})


# ---------------------------------------------------------------------------
# The bank

FilterKey = tuple[TrackId, str]


class FilterBank:
    """Owner of all live filters; processes frames strictly in order."""

    def __init__(
        self,
        params: ChannelParams,
        config: FreeFlightConfig,
        expire_after: int = 10,
    ) -> None:
        if expire_after < 1:
            raise ConfigError(f"expire_after must be >= 1, got {expire_after}")
        self.params = params
        self.config = config
        self.expire_after = expire_after
        self.dropped_observations = 0
        self._filters: dict[FilterKey, object] = {}
        self._absent: dict[TrackId, int] = {}
        self._last_frame: int | None = None
        self._joint_params = tuple(params.joints[j] for j in JOINTS)

    @property
    def live_keys(self) -> set[FilterKey]:
        return set(self._filters)

    def on_frame(
        self,
        frame: FrameStamp,
        live_tracks: Iterable[tuple[TrackId, BBox]],
        observations: Mapping[tuple[str, TrackId], AttributeObservation],
    ) -> list[TrackAttrRecord]:
        """Advance every filter for this frame and return their outputs.

        Observations are consumed only when the owning module is scheduled
        this frame; filters of tracks present without a consumable
        observation predict through. Observations for unknown tracks are
        dropped with a counted warning.
        """
        if self._last_frame is not None and frame.frame_index <= self._last_frame:
            raise TimeRegressionError(
                f"frame {frame.frame_index} arrived after frame {self._last_frame}")
        self._last_frame = frame.frame_index

        live = sorted({tid for tid, _ in live_tracks})
        live_set = set(live)

        for (_, tid) in observations:
            if tid not in live_set:
                self.dropped_observations += 1
                log.warning("dropping observation for unknown track %d at frame %d",
                            tid, frame.frame_index)

        self._expire(live_set)

        scheduled = {m: should_observe(m, frame.frame_index, self.config)
                     for m in self.config.modules}
        head_on = scheduled.get(MODULE_HEAD, False)
        skel_on = scheduled.get(MODULE_SKELETON, False)

        t = frame.time
        fidx = frame.frame_index
        out: list[TrackAttrRecord] = []

        for tid in live:
            if MODULE_HEAD in self.config.modules:
                obs = observations.get((MODULE_HEAD, tid)) if head_on else None
                if obs is not None and not isinstance(obs, HeadOrientation):
                    raise TypeError(f"head observation must be HeadOrientation, got {obs!r}")
                z = obs.theta if obs is not None else None
                key = (tid, CHANNEL_HEAD)
                state = self._filters.get(key)
                if state is None:
                    if z is not None:
                        state = ghfilter.init_angular(z, t)
                else:
                    state = ghfilter.step_angular(state, z, t, self.params.head)
                if state is not None:
                    self._filters[key] = state
                    out.append(TrackAttrRecord(fidx, tid, CHANNEL_HEAD,
                                               (state.x,), z is not None))

            if MODULE_SKELETON in self.config.modules:
                skel = observations.get((MODULE_SKELETON, tid)) if skel_on else None
                if skel is not None and not isinstance(skel, SkeletonObservation):
                    raise TypeError(f"skeleton observation must be SkeletonObservation, got {skel!r}")
                for idx, joint in enumerate(JOINTS):
                    zp = skel.points[idx] if skel is not None else None
                    key = (tid, _JOINT_CHANNELS[idx])
                    state = self._filters.get(key)
                    if state is None:
                        if zp is not None:
                            state = ghfilter.init_point(zp, t)
                    else:
                        state = ghfilter.step_point(state, zp, t, self._joint_params[idx])
                    if state is not None:
                        self._filters[key] = state
                        out.append(TrackAttrRecord(fidx, tid, _JOINT_CHANNELS[idx],
                                                   state.x, zp is not None))
        return out

    def _expire(self, live_set: set[TrackId]) -> None:
        known = {tid for tid, _ in self._filters}
        for tid in sorted(known):
            if tid in live_set:
                self._absent[tid] = 0
                continue
            count = self._absent.get(tid, 0) + 1
            if count >= self.expire_after:
                for key in [k for k in self._filters if k[0] == tid]:
                    del self._filters[key]
                self._absent.pop(tid, None)
            else:
                self._absent[tid] = count
        for tid in list(self._absent):
            if tid not in known:
                del self._absent[tid]
