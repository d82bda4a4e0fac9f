"""End-to-end wiring: detections -> tracks -> filter bank -> evaluation.

The analysis modules are emulated upstream (simgen writes an observation
for every frame/person pair), so the runner's job is to decide which
person's observation each track actually sees: the ground-truth person
whose box overlaps the track box the most, mirroring an analysis module
being run on the track's cropped region. An identity switch therefore
changes both the filter lifecycle and the observation content.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

from .bank import (
    MODULE_HEAD,
    MODULE_SKELETON,
    ChannelParams,
    CostModel,
    FilterBank,
    FreeFlightConfig,
    ModuleSchedule,
    ThroughputSummary,
    module_of_channel,
    summarize_throughput,
)
from .core import (
    BBox,
    ConfigError,
    DataError,
    FrameStamp,
    HeadOrientation,
    Scenario,
    TrackAttrRecord,
    TrackId,
    TrackRecord,
    by_frame,
    channel_order,
)
from .ghfilter import GHParams
from .metrics import (
    AttrReport,
    ChannelScore,
    ClearReport,
    MatchEvent,
    attr_eval,
    clear_matching,
)
from .tracker import IouTracker

# Minimum overlap for a track crop to be considered "showing" a person.
CROP_IOU_MIN = 0.1


@dataclass(frozen=True)
class TrackerParams:
    iou_threshold: float = 0.3
    confirm_hits: int = 2
    max_misses: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.confirm_hits < 1 or self.max_misses < 0:
            raise ConfigError("confirm_hits must be >= 1 and max_misses >= 0")


@dataclass(frozen=True)
class RunConfig:
    channels: ChannelParams = field(default_factory=ChannelParams)
    schedule: FreeFlightConfig = field(default_factory=FreeFlightConfig)
    cost: CostModel = field(default_factory=CostModel)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    expire_after: int = 10

    def to_dict(self) -> dict:
        from .core import CHANNELS
        return {
            "channels": {c: {"g": self.channels.for_channel(c).g,
                             "h": self.channels.for_channel(c).h} for c in CHANNELS},
            "modules": {m: {"stride": s.stride, "phase": s.phase}
                        for m, s in self.schedule.modules.items()},
            "cost": {"fixed_per_frame": self.cost.fixed_per_frame,
                     "per_call": dict(self.cost.per_call)},
            "tracker": {"iou_threshold": self.tracker.iou_threshold,
                        "confirm_hits": self.tracker.confirm_hits,
                        "max_misses": self.tracker.max_misses},
            "expire_after": self.expire_after,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        known = {"channels", "modules", "cost", "tracker", "expire_after"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            channels = ChannelParams()
            for c, gh in d.get("channels", {}).items():
                channel_order(c)
                channels = channels.with_channel(c, GHParams(float(gh["g"]), float(gh["h"])))
            modules = {m: ModuleSchedule(int(s.get("stride", 1)), int(s.get("phase", 0)))
                       for m, s in d.get("modules",
                                         {MODULE_HEAD: {}, MODULE_SKELETON: {}}).items()}
            cost_d = d.get("cost", {})
            cost = CostModel(
                fixed_per_frame=float(cost_d.get("fixed_per_frame", 0.001)),
                per_call={m: float(v) for m, v in cost_d.get(
                    "per_call", {m: 0.009 for m in modules}).items()},
            )
            trk = d.get("tracker", {})
            tracker = TrackerParams(
                iou_threshold=float(trk.get("iou_threshold", 0.3)),
                confirm_hits=int(trk.get("confirm_hits", 2)),
                max_misses=int(trk.get("max_misses", 5)),
            )
            return cls(channels, FreeFlightConfig(modules), cost, tracker,
                       int(d.get("expire_after", 10)))
        except (TypeError, KeyError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"malformed run config: {e}") from e


# ---------------------------------------------------------------------------
# Stages

def track_scenario(scenario: Scenario, params: TrackerParams = TrackerParams()
                   ) -> tuple[TrackRecord, ...]:
    """Run the tracker over the detection stream, frame by frame."""
    dets = by_frame(scenario.detections)
    tracker = IouTracker(params.iou_threshold, params.confirm_hits, params.max_misses)
    out: list[TrackRecord] = []
    for f in range(scenario.n_frames):
        boxes = [d.bbox for d in dets.get(f, ())]
        for tid, bbox in tracker.tick(f, boxes):
            out.append(TrackRecord(f, tid, bbox))
    return tuple(out)


def _crop_person(track_box: BBox, gt_rows) -> int | None:
    """Ground-truth person the track's crop is showing, if any.

    Highest IoU wins; ties go to the lowest person id (rows arrive sorted).
    """
    best_pid = None
    best_iou = 0.0
    for g in gt_rows:
        v = track_box.iou(g.bbox)
        if v >= CROP_IOU_MIN and v > best_iou:
            best_pid = g.person_id
            best_iou = v
    return best_pid


def iter_bank_inputs(
    scenario: Scenario,
    tracks: Sequence[TrackRecord],
    modules: Sequence[str],
) -> Iterator[tuple[FrameStamp, list[tuple[TrackId, BBox]], dict]]:
    """Per-frame (stamp, live tracks, observations keyed by (module, id))."""
    gt_f = {f: sorted(rows, key=lambda g: g.person_id)
            for f, rows in by_frame(scenario.gt).items()}
    trk_f = by_frame(tracks)
    oh = {(r.frame_index, r.person_id): r for r in scenario.obs_head}
    os_ = {(r.frame_index, r.person_id): r for r in scenario.obs_skel}
    for f in range(scenario.n_frames):
        live = [(r.track_id, r.bbox) for r in trk_f.get(f, ())]
        obs: dict[tuple[str, TrackId], object] = {}
        gt_rows = gt_f.get(f, ())
        for tid, bbox in live:
            pid = _crop_person(bbox, gt_rows)
            if pid is None:
                continue
            if MODULE_HEAD in modules:
                rec = oh.get((f, pid))
                if rec is not None:
                    obs[(MODULE_HEAD, tid)] = HeadOrientation(rec.theta)
            if MODULE_SKELETON in modules:
                rec = os_.get((f, pid))
                if rec is not None:
                    obs[(MODULE_SKELETON, tid)] = rec.skeleton
        yield scenario.stamp(f), live, obs


def run_bank(
    scenario: Scenario,
    tracks: Sequence[TrackRecord],
    channels: ChannelParams,
    schedule: FreeFlightConfig,
    expire_after: int = 10,
) -> tuple[tuple[TrackAttrRecord, ...], FilterBank]:
    bank = FilterBank(channels, schedule, expire_after)
    records: list[TrackAttrRecord] = []
    for stamp, live, obs in iter_bank_inputs(scenario, tracks, tuple(schedule.modules)):
        records.extend(bank.on_frame(stamp, live, obs))
    return tuple(records), bank


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario                  # input augmented with trk and trk-attr records
    throughput: ThroughputSummary
    dropped_observations: int
    wall_hz: float | None = None


def run_scenario(scenario: Scenario, config: RunConfig = RunConfig(),
                 wall_clock: bool = False) -> RunResult:
    t0 = time.perf_counter()
    tracks = track_scenario(scenario, config.tracker)
    attrs, bank = run_bank(scenario, tracks, config.channels, config.schedule,
                           config.expire_after)
    elapsed = time.perf_counter() - t0
    n = scenario.n_frames
    throughput = summarize_throughput(n, config.schedule, config.cost)
    wall_hz = (n / elapsed if elapsed > 0 else float("inf")) if wall_clock else None
    augmented = replace(scenario, tracks=tracks, track_attrs=attrs)
    return RunResult(augmented, throughput, bank.dropped_observations, wall_hz)


# ---------------------------------------------------------------------------
# Evaluation

@dataclass(frozen=True)
class EvalResult:
    clear: ClearReport
    matches: tuple[MatchEvent, ...]
    attr: Mapping[str, AttrReport]  # "raw" and "filtered"


def gt_boxes_by_frame(scenario: Scenario) -> dict[int, list[tuple[int, BBox]]]:
    out: dict[int, list[tuple[int, BBox]]] = {}
    for r in scenario.gt:
        out.setdefault(r.frame_index, []).append((r.person_id, r.bbox))
    return out


def hyp_boxes_by_frame(tracks: Sequence[TrackRecord]) -> dict[int, list[tuple[int, BBox]]]:
    out: dict[int, list[tuple[int, BBox]]] = {}
    for r in tracks:
        out.setdefault(r.frame_index, []).append((r.track_id, r.bbox))
    return out


def evaluate(scenario: Scenario, iou_threshold: float = 0.5) -> EvalResult:
    """CLEAR plus raw/filtered attribute reports for a completed run."""
    if not scenario.tracks:
        raise DataError("scenario has no trk records; run the pipeline first")
    report, matches = clear_matching(
        gt_boxes_by_frame(scenario), hyp_boxes_by_frame(scenario.tracks), iou_threshold)
    attr = attr_eval(scenario, matches)
    return EvalResult(report, tuple(matches), attr)


# ---------------------------------------------------------------------------
# Experiments

@dataclass(frozen=True)
class SweepCell:
    g: float
    h: float
    count: int
    mean_offset: float
    score: float
    best: bool


@dataclass(frozen=True)
class SweepResult:
    channel: str
    stride: int
    cells: tuple[SweepCell, ...]
    raw: ChannelScore
    best: SweepCell


def sweep_channel(
    scenario: Scenario,
    channel: str,
    g_grid: Sequence[float],
    h_grid: Sequence[float],
    stride: int = 1,
    tracker: TrackerParams = TrackerParams(),
    expire_after: int = 10,
) -> SweepResult:
    """Filter-quality heatmap for one channel over a (g, h) grid.

    The tracker runs once; only the bank is re-run per cell. Scores are the
    channel's PCO/PCKh over the CLEAR correspondence, which is also fixed
    across cells.
    """
    if not g_grid or not h_grid:
        raise ConfigError("g and h grids must be non-empty")
    grid = [(g, h) for g in g_grid for h in h_grid]
    for g, h in grid:
        GHParams(g, h)  # validates ranges

    channel_order(channel)
    module = module_of_channel(channel)
    schedule = FreeFlightConfig.single(module, stride)
    tracks = track_scenario(scenario, tracker)
    base = replace(scenario, tracks=tracks)

    cells: list[SweepCell] = []
    raw_score = None
    for g, h in grid:
        params = ChannelParams().with_channel(channel, GHParams(g, h))
        attrs, _ = run_bank(scenario, tracks, params, schedule, expire_after)
        result = evaluate(replace(base, track_attrs=attrs))
        sc = result.attr["filtered"].score_for(channel)
        cells.append(SweepCell(g, h, sc.count, sc.mean_offset, sc.score, False))
        if raw_score is None:
            raw_score = result.attr["raw"].score_for(channel)

    best_i = max(range(len(cells)),
                 key=lambda i: (cells[i].score, -cells[i].mean_offset, -i))
    cells[best_i] = replace(cells[best_i], best=True)
    return SweepResult(channel, stride, tuple(cells), raw_score, cells[best_i])


@dataclass(frozen=True)
class FreeFlightRow:
    stride: int
    keep_score: float
    predict_score: float
    model_hz: float
    measured_hz: float


def freeflight_table(
    scenario: Scenario,
    channel: str,
    strides: Sequence[int] = (1, 2, 3, 5),
    channels: ChannelParams = ChannelParams(),
    fixed_cost: float = 0.001,
    call_cost: float = 0.009,
    tracker: TrackerParams = TrackerParams(),
    expire_after: int = 10,
) -> list[FreeFlightRow]:
    """Keep-vs-predict comparison per stride, with the cost model's rates.

    The keep column runs the bank with g=1, h=0 (hold the last scheduled
    observation); the predict column uses the tuned channel gains. Both see
    the identical observation schedule.
    """
    if any(s < 1 for s in strides):
        raise ConfigError(f"strides must be >= 1, got {list(strides)}")
    channel_order(channel)
    module = module_of_channel(channel)
    tracks = track_scenario(scenario, tracker)
    base = replace(scenario, tracks=tracks)
    keep = ChannelParams.keep_last()

    rows: list[FreeFlightRow] = []
    for s in strides:
        schedule = FreeFlightConfig.single(module, s)
        cost = CostModel(fixed_cost, {module: call_cost})
        scores = []
        for params in (keep, channels):
            attrs, _ = run_bank(scenario, tracks, params, schedule, expire_after)
            result = evaluate(replace(base, track_attrs=attrs))
            scores.append(result.attr["filtered"].score_for(channel).score)
        throughput = summarize_throughput(scenario.n_frames, schedule, cost)
        rows.append(FreeFlightRow(s, scores[0], scores[1],
                                  throughput.model_hz, throughput.effective_hz))
    return rows
