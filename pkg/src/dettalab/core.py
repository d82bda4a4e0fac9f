"""Core value types and the line-based scenario stream format.

Everything in this module is an immutable value. A :class:`Scenario` is a
plain container of frame-indexed record streams that the generator, the
tracker, the filter bank, and the metrics exchange with each other and
with disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

SCENARIO_MAGIC = "detta-scenario"
SCENARIO_VERSION = "v1"


# ---------------------------------------------------------------------------
# Error taxonomy (mapped to CLI exit codes in cli.py)

class ConfigError(ValueError):
    """Bad configuration, unknown preset, or an infeasible scenario spec."""


class DataError(ValueError):
    """Input streams are missing pieces required by the requested operation."""


class UndefinedMetricError(ValueError):
    """A metric was requested over an empty support set."""


class TimeRegressionError(ValueError):
    """Frames or timestamps arrived out of order."""


class ScenarioParseError(ValueError):
    """A scenario file line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnsupportedVersionError(ScenarioParseError):
    """The scenario file declares a format version this reader does not know."""


# ---------------------------------------------------------------------------
# Angles (degrees, canonical range (-180, 180], tie at +-180 resolves to +180)

def wrap_angle(theta: float) -> float:
    """Map an angle in degrees onto the canonical range ``(-180, 180]``.

    The fast path returns canonical inputs unchanged, bit for bit, which the
    rest of the package relies on for exact hold-last identities.
    """
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    if -180.0 < theta <= 180.0:
        return theta
    r = theta % 360.0
    return r - 360.0 if r > 180.0 else r


def angular_diff(a: float, b: float) -> float:
    """Shortest signed arc from ``b`` to ``a``, in degrees in ``(-180, 180]``."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"angles must be finite, got {a!r}, {b!r}")
    return wrap_angle(a - b)


# ---------------------------------------------------------------------------
# Domain types

@dataclass(frozen=True)
class FrameStamp:
    """A dense frame index plus its wall-clock time in seconds."""

    frame_index: int
    time: float

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if not math.isfinite(self.time) or self.time < 0.0:
            raise ValueError(f"time must be a non-negative real, got {self.time!r}")


TrackId = int  # positive, unique per trajectory hypothesis within a run


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, top-left corner plus size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise ValueError(f"bbox fields must be finite, got {self!r}")
        if self.w <= 0.0 or self.h <= 0.0:
            raise ValueError(f"bbox needs w > 0 and h > 0, got w={self.w}, h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    def iou(self, other: "BBox") -> float:
        ix = min(self.x + self.w, other.x + other.w) - max(self.x, other.x)
        if ix <= 0.0:
            return 0.0
        iy = min(self.y + self.h, other.y + other.h) - max(self.y, other.y)
        if iy <= 0.0:
            return 0.0
        inter = ix * iy
        return inter / (self.w * self.h + other.w * other.h - inter)


@dataclass(frozen=True)
class HeadOrientation:
    """A head orientation in degrees, always stored canonical."""

    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))


class JointName(Enum):
    HEAD = "head"
    NECK = "neck"
    L_SHOULDER = "l_shoulder"
    R_SHOULDER = "r_shoulder"
    L_ELBOW = "l_elbow"
    R_ELBOW = "r_elbow"
    L_WRIST = "l_wrist"
    R_WRIST = "r_wrist"


JOINTS: tuple[JointName, ...] = tuple(JointName)
_JOINT_INDEX = {j: i for i, j in enumerate(JOINTS)}

Point = tuple[float, float]


@dataclass(frozen=True)
class SkeletonObservation:
    """Per-joint 2D points in canonical joint order; ``None`` marks an invisible joint."""

    points: tuple[Point | None, ...]

    def __post_init__(self) -> None:
        if len(self.points) != len(JOINTS):
            raise ValueError(f"need {len(JOINTS)} joint slots, got {len(self.points)}")
        for p in self.points:
            if p is None:
                continue
            if len(p) != 2 or not (math.isfinite(p[0]) and math.isfinite(p[1])):
                raise ValueError(f"joint points must be finite 2D, got {p!r}")

    def point(self, joint: JointName) -> Point | None:
        return self.points[_JOINT_INDEX[joint]]

    def visible(self, joint: JointName) -> bool:
        return self.point(joint) is not None

    @classmethod
    def from_mapping(cls, points: dict[JointName, Point | None]) -> "SkeletonObservation":
        return cls(tuple(points.get(j) for j in JOINTS))


AttributeObservation = Union[HeadOrientation, SkeletonObservation]


@dataclass(frozen=True)
class GroundTruthRecord:
    frame_index: int
    person_id: int
    bbox: BBox
    head_theta: float
    skeleton: SkeletonObservation
    head_size: float

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        if self.person_id <= 0:
            raise ValueError("person_id must be positive")
        if not -180.0 < self.head_theta <= 180.0:
            raise ValueError(f"head_theta must be canonical, got {self.head_theta}")
        if not (math.isfinite(self.head_size) and self.head_size > 0.0):
            raise ValueError(f"head_size must be > 0, got {self.head_size}")


@dataclass(frozen=True)
class DetectionRecord:
    frame_index: int
    bbox: BBox


@dataclass(frozen=True)
class HeadObsRecord:
    frame_index: int
    person_id: int
    theta: float


@dataclass(frozen=True)
class SkelObsRecord:
    frame_index: int
    person_id: int
    skeleton: SkeletonObservation


@dataclass(frozen=True)
class TrackRecord:
    frame_index: int
    track_id: TrackId
    bbox: BBox


# ---------------------------------------------------------------------------
# Attribute channels: the head orientation channel plus one channel per joint.
# Joint channels are namespaced ("skel:head", ...) because the joint set
# itself contains "head".

CHANNEL_HEAD = "head"


def joint_channel(joint: JointName) -> str:
    return "skel:" + joint.value


CHANNELS: tuple[str, ...] = (CHANNEL_HEAD,) + tuple(joint_channel(j) for j in JOINTS)

_CHANNEL_ORDER = {c: i for i, c in enumerate(CHANNELS)}
_CHANNEL_JOINT = {joint_channel(j): j for j in JOINTS}


def channel_order(channel: str) -> int:
    try:
        return _CHANNEL_ORDER[channel]
    except KeyError:
        raise ValueError(f"unknown attribute channel {channel!r}") from None


def channel_joint(channel: str) -> JointName | None:
    """The joint behind a skeleton channel, or ``None`` for the head channel."""
    channel_order(channel)
    return _CHANNEL_JOINT.get(channel)


_CHANNEL_NVALUES = {c: (1 if c == CHANNEL_HEAD else 2) for c in CHANNELS}


def channel_value_count(channel: str) -> int:
    try:
        return _CHANNEL_NVALUES[channel]
    except KeyError:
        raise ValueError(f"unknown attribute channel {channel!r}") from None


@dataclass(frozen=True)
class TrackAttrRecord:
    """One filtered attribute value for one track and channel at one frame."""

    frame_index: int
    track_id: TrackId
    channel: str
    values: tuple[float, ...]
    observed: bool

    def __post_init__(self) -> None:
        n = channel_value_count(self.channel)
        if len(self.values) != n:
            raise ValueError(
                f"channel {self.channel!r} carries {n} values, got {len(self.values)}")


# ---------------------------------------------------------------------------
# Scenario container

@dataclass(frozen=True)
class Scenario:
    """All record streams of one sequence, at a fixed frame rate."""

    fps: float
    gt: tuple[GroundTruthRecord, ...] = ()
    detections: tuple[DetectionRecord, ...] = ()
    obs_head: tuple[HeadObsRecord, ...] = ()
    obs_skel: tuple[SkelObsRecord, ...] = ()
    tracks: tuple[TrackRecord, ...] = ()
    track_attrs: tuple[TrackAttrRecord, ...] = ()

    def __post_init__(self) -> None:
        if not (math.isfinite(self.fps) and self.fps > 0.0):
            raise ValueError(f"fps must be > 0, got {self.fps!r}")

    @property
    def n_frames(self) -> int:
        """Dense frame count, derived as 1 + the largest frame index on record."""
        last = -1
        for stream in (self.gt, self.detections, self.obs_head, self.obs_skel,
                       self.tracks, self.track_attrs):
            for r in stream:
                if r.frame_index > last:
                    last = r.frame_index
        return last + 1

    def stamp(self, frame_index: int) -> FrameStamp:
        return FrameStamp(frame_index, frame_index / self.fps)


def by_frame(records: Iterable) -> dict[int, list]:
    """Group records carrying a ``frame_index`` field into per-frame lists."""
    out: dict[int, list] = {}
    for r in records:
        out.setdefault(r.frame_index, []).append(r)
    return out


# ---------------------------------------------------------------------------
# Serialization.
#
# The file is UTF-8 text. Header line:
#
#   detta-scenario v1 fps=<float>
#
# Every other line is `<kind> <frame_index> <fields...>`, floats with 6
# decimal places, joints in canonical order as `<x> <y> <visible:0|1>`
# triples (an invisible joint writes the placeholder `0.000000 0.000000 0`):
#
#   gt       <frame> <person_id> <x> <y> <w> <h> <head_theta> <head_size> <8 joint triples>
#   det      <frame> <x> <y> <w> <h>
#   obs-head <frame> <person_id> <theta>
#   obs-skel <frame> <person_id> <8 joint triples>
#   trk      <frame> <track_id> <x> <y> <w> <h>
#   trk-attr <frame> <track_id> <channel> <value...> <observed:0|1>
#
# Records are written grouped by kind, each group in stream order.

def _f6(v: float) -> str:
    return f"{v:.6f}"


def _skel_fields(skel: SkeletonObservation) -> list[str]:
    out: list[str] = []
    for p in skel.points:
        if p is None:
            out += ["0.000000", "0.000000", "0"]
        else:
            out += [_f6(p[0]), _f6(p[1]), "1"]
    return out


def scenario_to_lines(scenario: Scenario) -> list[str]:
    lines = [f"{SCENARIO_MAGIC} {SCENARIO_VERSION} fps={_f6(scenario.fps)}"]
    for g in scenario.gt:
        b = g.bbox
        lines.append(" ".join(
            ["gt", str(g.frame_index), str(g.person_id),
             _f6(b.x), _f6(b.y), _f6(b.w), _f6(b.h),
             _f6(g.head_theta), _f6(g.head_size)] + _skel_fields(g.skeleton)))
    for d in scenario.detections:
        b = d.bbox
        lines.append(" ".join(
            ["det", str(d.frame_index), _f6(b.x), _f6(b.y), _f6(b.w), _f6(b.h)]))
    for o in scenario.obs_head:
        lines.append(" ".join(
            ["obs-head", str(o.frame_index), str(o.person_id), _f6(o.theta)]))
    for o in scenario.obs_skel:
        lines.append(" ".join(
            ["obs-skel", str(o.frame_index), str(o.person_id)] + _skel_fields(o.skeleton)))
    for t in scenario.tracks:
        b = t.bbox
        lines.append(" ".join(
            ["trk", str(t.frame_index), str(t.track_id),
             _f6(b.x), _f6(b.y), _f6(b.w), _f6(b.h)]))
    for a in scenario.track_attrs:
        lines.append(" ".join(
            ["trk-attr", str(a.frame_index), str(a.track_id), a.channel]
            + [_f6(v) for v in a.values] + ["1" if a.observed else "0"]))
    return lines


def write_scenario(scenario: Scenario, path: str | Path) -> None:
    text = "\n".join(scenario_to_lines(scenario)) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")


class _LineParser:
    """Tokenized access to one record line with positioned error reporting."""

    def __init__(self, line_no: int, tokens: list[str]):
        self.line_no = line_no
        self.tokens = tokens
        self.pos = 0

    def fail(self, message: str):
        raise ScenarioParseError(self.line_no, message)

    def take(self) -> str:
        if self.pos >= len(self.tokens):
            self.fail(f"record truncated after {self.pos} fields")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def take_int(self, name: str) -> int:
        tok = self.take()
        try:
            return int(tok)
        except ValueError:
            self.fail(f"field {name!r}: expected integer, got {tok!r}")

    def take_float(self, name: str) -> float:
        tok = self.take()
        try:
            v = float(tok)
        except ValueError:
            self.fail(f"field {name!r}: expected float, got {tok!r}")
        if not math.isfinite(v):
            self.fail(f"field {name!r}: must be finite, got {tok!r}")
        return v

    def take_flag(self, name: str) -> bool:
        tok = self.take()
        if tok == "1":
            return True
        if tok == "0":
            return False
        self.fail(f"field {name!r}: expected 0 or 1, got {tok!r}")

    def done(self) -> None:
        if self.pos != len(self.tokens):
            self.fail(f"trailing fields after position {self.pos}")

    def take_bbox(self) -> BBox:
        x = self.take_float("x")
        y = self.take_float("y")
        w = self.take_float("w")
        h = self.take_float("h")
        try:
            return BBox(x, y, w, h)
        except ValueError as e:
            self.fail(str(e))

    def take_skeleton(self) -> SkeletonObservation:
        points: list[Point | None] = []
        for joint in JOINTS:
            jx = self.take_float(f"{joint.value}.x")
            jy = self.take_float(f"{joint.value}.y")
            vis = self.take_flag(f"{joint.value}.visible")
            points.append((jx, jy) if vis else None)
        return SkeletonObservation(tuple(points))


def _parse_header(line: str) -> float:
    parts = line.split()
    if len(parts) != 3 or parts[0] != SCENARIO_MAGIC:
        raise ScenarioParseError(
            1, f"expected header '{SCENARIO_MAGIC} {SCENARIO_VERSION} fps=<fps>', got {line!r}")
    if parts[1] != SCENARIO_VERSION:
        raise UnsupportedVersionError(1, f"unsupported scenario version {parts[1]!r}")
    if not parts[2].startswith("fps="):
        raise ScenarioParseError(1, f"expected 'fps=<fps>', got {parts[2]!r}")
    try:
        fps = float(parts[2][4:])
    except ValueError:
        raise ScenarioParseError(1, f"bad fps value {parts[2][4:]!r}") from None
    if not (math.isfinite(fps) and fps > 0.0):
        raise ScenarioParseError(1, f"fps must be > 0, got {fps!r}")
    return fps


def scenario_from_lines(lines: Iterable[str]) -> Scenario:
    it = iter(lines)
    try:
        header = next(it)
    except StopIteration:
        raise ScenarioParseError(1, "empty file, missing header") from None
    fps = _parse_header(header.rstrip("\n"))

    gt: list[GroundTruthRecord] = []
    detections: list[DetectionRecord] = []
    obs_head: list[HeadObsRecord] = []
    obs_skel: list[SkelObsRecord] = []
    tracks: list[TrackRecord] = []
    track_attrs: list[TrackAttrRecord] = []

    for line_no, raw in enumerate(it, start=2):
        line = raw.rstrip("\n")
        if not line:
            continue
        p = _LineParser(line_no, line.split())
        kind = p.take()
        frame = p.take_int("frame_index")
        if frame < 0:
            p.fail(f"frame_index must be >= 0, got {frame}")
        if kind == "gt":
            pid = p.take_int("person_id")
            bbox = p.take_bbox()
            theta = wrap_angle(p.take_float("head_theta"))
            head_size = p.take_float("head_size")
            skel = p.take_skeleton()
            p.done()
            try:
                gt.append(GroundTruthRecord(frame, pid, bbox, theta, skel, head_size))
            except ValueError as e:
                p.fail(str(e))
        elif kind == "det":
            bbox = p.take_bbox()
            p.done()
            detections.append(DetectionRecord(frame, bbox))
        elif kind == "obs-head":
            pid = p.take_int("person_id")
            theta = wrap_angle(p.take_float("theta"))
            p.done()
            obs_head.append(HeadObsRecord(frame, pid, theta))
        elif kind == "obs-skel":
            pid = p.take_int("person_id")
            skel = p.take_skeleton()
            p.done()
            obs_skel.append(SkelObsRecord(frame, pid, skel))
        elif kind == "trk":
            tid = p.take_int("track_id")
            bbox = p.take_bbox()
            p.done()
            tracks.append(TrackRecord(frame, tid, bbox))
        elif kind == "trk-attr":
            tid = p.take_int("track_id")
            channel = p.take()
            try:
                n = channel_value_count(channel)
            except ValueError as e:
                p.fail(str(e))
            values = tuple(p.take_float(f"value[{i}]") for i in range(n))
            if channel == CHANNEL_HEAD:
                values = (wrap_angle(values[0]),)
            observed = p.take_flag("observed")
            p.done()
            track_attrs.append(TrackAttrRecord(frame, tid, channel, values, observed))
        else:
            p.fail(f"unknown record kind {kind!r}")

    return Scenario(fps, tuple(gt), tuple(detections), tuple(obs_head),
                    tuple(obs_skel), tuple(tracks), tuple(track_attrs))


def read_scenario(path: str | Path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_lines(fh)
