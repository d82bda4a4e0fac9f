"""Deterministic synthetic scenario generation.

Ground truth is piecewise-constant-velocity box motion plus a turning head
and a template skeleton with small per-joint sinusoidal articulation.
Detector and analysis-module outputs are emulated by drawing from a noise
model over the ground truth. Observations are emitted for every frame a
person is present; deciding which of them get consumed is the downstream
scheduler's job, so one scenario file serves every stride setting.

All random draws come from one seeded generator in a fixed frame/person/
joint order, and every emitted float is quantized to 6 decimals, so a
(spec, seed) pair reproduces byte-identical scenario files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import (
    JOINTS,
    BBox,
    ConfigError,
    DetectionRecord,
    GroundTruthRecord,
    HeadObsRecord,
    JointName,
    Point,
    Scenario,
    SkeletonObservation,
    SkelObsRecord,
    wrap_angle,
)

# Template skeleton as fractions of the bbox (x from left, y from top).
SKELETON_TEMPLATE: Mapping[JointName, tuple[float, float]] = {
    JointName.HEAD: (0.50, 0.10),
    JointName.NECK: (0.50, 0.25),
    JointName.L_SHOULDER: (0.30, 0.30),
    JointName.R_SHOULDER: (0.70, 0.30),
    JointName.L_ELBOW: (0.22, 0.55),
    JointName.R_ELBOW: (0.78, 0.55),
    JointName.L_WRIST: (0.18, 0.78),
    JointName.R_WRIST: (0.82, 0.78),
}

_JOINT_PHASE = {j: 0.9 * i for i, j in enumerate(JOINTS)}


def _default_amplitudes() -> dict[JointName, float]:
    # Wrists articulate the most, elbows some, the torso joints barely.
    amp = {JointName.HEAD: 1.0, JointName.NECK: 1.0,
           JointName.L_SHOULDER: 1.5, JointName.R_SHOULDER: 1.5,
           JointName.L_ELBOW: 3.0, JointName.R_ELBOW: 3.0,
           JointName.L_WRIST: 6.0, JointName.R_WRIST: 6.0}
    return amp


def round6(v: float) -> float:
    return round(float(v), 6)


def canon6(theta: float) -> float:
    """Canonical angle quantized to 6 decimals (re-wrapped after rounding)."""
    return wrap_angle(round(wrap_angle(theta), 6))


# ---------------------------------------------------------------------------
# Spec types

@dataclass(frozen=True)
class MotionSegment:
    frames: int
    vx: float  # px/s
    vy: float


@dataclass(frozen=True)
class TurnSegment:
    frames: int
    omega: float  # deg/s


@dataclass(frozen=True)
class ArticulationSpec:
    period_s: float = 2.0
    amplitude_px: Mapping[JointName, float] = field(default_factory=_default_amplitudes)

    def amplitude(self, joint: JointName) -> float:
        return float(self.amplitude_px.get(joint, 0.0))


@dataclass(frozen=True)
class PersonSpec:
    person_id: int
    entry_frame: int
    exit_frame: int  # exclusive
    x0: float
    y0: float
    w: float
    h: float
    motion: tuple[MotionSegment, ...]
    head0: float
    turning: tuple[TurnSegment, ...]
    articulation: ArticulationSpec = ArticulationSpec()


@dataclass(frozen=True)
class NoiseSpec:
    det_miss_prob: float = 0.0
    det_fp_rate: float = 0.0        # expected false positives per frame
    det_pos_sigma: float = 0.0      # px, bbox center jitter
    det_size_sigma: float = 0.0     # px, bbox size jitter
    head_sigma: float = 0.0         # degrees
    head_outlier_prob: float = 0.0  # outliers drawn uniform on the circle
    joint_sigma: float = 0.0        # px, per axis
    joint_sigma_by: Mapping[JointName, float] = field(default_factory=dict)
    joint_dropout_prob: float = 0.0
    joint_dropout_by: Mapping[JointName, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        probs = [("det_miss_prob", self.det_miss_prob),
                 ("head_outlier_prob", self.head_outlier_prob),
                 ("joint_dropout_prob", self.joint_dropout_prob),
                 *((f"joint_dropout_by[{j.value}]", p) for j, p in self.joint_dropout_by.items())]
        for name, p in probs:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        sigmas = [("det_fp_rate", self.det_fp_rate),
                  ("det_pos_sigma", self.det_pos_sigma),
                  ("det_size_sigma", self.det_size_sigma),
                  ("head_sigma", self.head_sigma),
                  ("joint_sigma", self.joint_sigma),
                  *((f"joint_sigma_by[{j.value}]", s) for j, s in self.joint_sigma_by.items())]
        for name, s in sigmas:
            if s < 0.0:
                raise ConfigError(f"{name} must be >= 0, got {s}")

    def sigma_for(self, joint: JointName) -> float:
        return float(self.joint_sigma_by.get(joint, self.joint_sigma))

    def dropout_for(self, joint: JointName) -> float:
        return float(self.joint_dropout_by.get(joint, self.joint_dropout_prob))


@dataclass(frozen=True)
class ScenarioSpec:
    n_frames: int
    persons: tuple[PersonSpec, ...]
    noise: NoiseSpec = NoiseSpec()
    fps: float = 30.0
    image_w: int = 640
    image_h: int = 480
    skeleton_margin: float = 10.0


def without_noise(spec: ScenarioSpec) -> ScenarioSpec:
    return replace(spec, noise=NoiseSpec())


# ---------------------------------------------------------------------------
# Validation and ground-truth synthesis

def _segment_index(segments, rel_frame: int) -> int:
    acc = 0
    for i, seg in enumerate(segments):
        acc += seg.frames
        if rel_frame < acc:
            return i
    return len(segments) - 1


def _validate_person(spec: ScenarioSpec, p: PersonSpec) -> None:
    if p.person_id <= 0:
        raise ConfigError(f"person ids must be positive, got {p.person_id}")
    if not 0 <= p.entry_frame < p.exit_frame <= spec.n_frames:
        raise ConfigError(
            f"person {p.person_id}: lifetime [{p.entry_frame}, {p.exit_frame}) "
            f"must fit inside [0, {spec.n_frames})")
    if p.w <= 0 or p.h <= 0:
        raise ConfigError(f"person {p.person_id}: bbox size must be positive")
    life = p.exit_frame - p.entry_frame
    for kind, segs in (("motion", p.motion), ("turning", p.turning)):
        if any(s.frames <= 0 for s in segs):
            raise ConfigError(f"person {p.person_id}: {kind} segment with <= 0 frames")
        total = sum(s.frames for s in segs)
        if total != life:
            raise ConfigError(
                f"person {p.person_id}: {kind} segments cover {total} frames, "
                f"lifetime is {life}")
    if p.articulation.period_s <= 0:
        raise ConfigError(f"person {p.person_id}: articulation period must be > 0")
    for joint in JOINTS:
        fx, fy = SKELETON_TEMPLATE[joint]
        amp = p.articulation.amplitude(joint)
        m = spec.skeleton_margin
        if fx * p.w - amp < -m or fx * p.w + amp > p.w + m \
                or fy * p.h - amp < -m or fy * p.h + amp > p.h + m:
            raise ConfigError(
                f"person {p.person_id}: joint {joint.value} articulation "
                f"(amplitude {amp}px) leaves the bbox margin of {m}px")


def _person_track(spec: ScenarioSpec, p: PersonSpec):
    """Per-frame (bbox, theta, joints, head_size) for one person's lifetime."""
    _validate_person(spec, p)
    life = p.exit_frame - p.entry_frame
    dt = 1.0 / spec.fps

    out = []
    x, y = float(p.x0), float(p.y0)
    theta = float(p.head0)
    for rel in range(life):
        f = p.entry_frame + rel
        if rel > 0:
            seg = p.motion[_segment_index(p.motion, rel - 1)]
            x += seg.vx * dt
            y += seg.vy * dt
            theta += p.turning[_segment_index(p.turning, rel - 1)].omega * dt
        xr, yr = round6(x), round6(y)
        if xr < 0.0 or yr < 0.0 or xr + p.w > spec.image_w or yr + p.h > spec.image_h:
            seg_i = _segment_index(p.motion, max(rel - 1, 0))
            raise ConfigError(
                f"person {p.person_id}: motion segment {seg_i} pushes the bbox "
                f"out of the {spec.image_w}x{spec.image_h} image at frame {f}")
        bbox = BBox(xr, yr, round6(p.w), round6(p.h))

        t = f / spec.fps
        joints: list[Point] = []
        for joint in JOINTS:
            fx, fy = SKELETON_TEMPLATE[joint]
            amp = p.articulation.amplitude(joint)
            ph = 2.0 * math.pi * t / p.articulation.period_s + _JOINT_PHASE[joint]
            joints.append((round6(xr + fx * p.w + amp * math.sin(ph)),
                           round6(yr + fy * p.h + amp * math.cos(ph))))
        head_pt = joints[JOINTS.index(JointName.HEAD)]
        neck_pt = joints[JOINTS.index(JointName.NECK)]
        head_size = round6(2.0 * math.hypot(head_pt[0] - neck_pt[0],
                                            head_pt[1] - neck_pt[1]))
        if head_size <= 0.0:
            raise ConfigError(
                f"person {p.person_id}: degenerate head size at frame {f}")
        out.append((f, bbox, canon6(theta), tuple(joints), head_size))
    return out


# ---------------------------------------------------------------------------
# Generation

def generate(spec: ScenarioSpec, seed: int) -> Scenario:
    """Build the full scenario for (spec, seed); deterministic, byte-stable."""
    if spec.n_frames < 0:
        raise ConfigError(f"n_frames must be >= 0, got {spec.n_frames}")
    ids = [p.person_id for p in spec.persons]
    if len(set(ids)) != len(ids):
        raise ConfigError("person ids must be unique")

    persons = sorted(spec.persons, key=lambda p: p.person_id)
    tracks = {p.person_id: dict((row[0], row) for row in _person_track(spec, p))
              for p in persons}

    rng = np.random.default_rng(seed)
    noise = spec.noise

    gt: list[GroundTruthRecord] = []
    dets: list[DetectionRecord] = []
    obs_head: list[HeadObsRecord] = []
    obs_skel: list[SkelObsRecord] = []

    for f in range(spec.n_frames):
        live = [p for p in persons if f in tracks[p.person_id]]

        for p in live:
            _, bbox, theta, joints, head_size = tracks[p.person_id][f]
            gt.append(GroundTruthRecord(
                f, p.person_id, bbox, theta,
                SkeletonObservation(tuple(joints)), head_size))

        # Detector emulation: per-person miss + jitter, then false positives.
        for p in live:
            _, bbox, _, _, _ = tracks[p.person_id][f]
            missed = rng.random() < noise.det_miss_prob
            dx, dy = rng.normal(0.0, noise.det_pos_sigma, 2)
            dw, dh = rng.normal(0.0, noise.det_size_sigma, 2)
            if missed:
                continue
            w = max(1.0, bbox.w + dw)
            h = max(1.0, bbox.h + dh)
            x = bbox.cx + dx - w / 2.0
            y = bbox.cy + dy - h / 2.0
            dets.append(DetectionRecord(
                f, BBox(round6(x), round6(y), round6(w), round6(h))))
        for _ in range(int(rng.poisson(noise.det_fp_rate))):
            w = rng.uniform(24.0, 100.0)
            h = rng.uniform(60.0, 180.0)
            x = rng.uniform(0.0, spec.image_w - w)
            y = rng.uniform(0.0, spec.image_h - h)
            dets.append(DetectionRecord(
                f, BBox(round6(x), round6(y), round6(w), round6(h))))

        # Analysis-module emulation: every (frame, person) gets observations.
        for p in live:
            _, _, theta, joints, _ = tracks[p.person_id][f]
            outlier = rng.random() < noise.head_outlier_prob
            jitter = rng.normal(0.0, noise.head_sigma)
            uniform = rng.uniform(-180.0, 180.0)
            obs_theta = uniform if outlier else theta + jitter
            obs_head.append(HeadObsRecord(f, p.person_id, canon6(obs_theta)))

            points: list[Point | None] = []
            for joint, (jx, jy) in zip(JOINTS, joints):
                dropped = rng.random() < noise.dropout_for(joint)
                nx, ny = rng.normal(0.0, noise.sigma_for(joint), 2)
                points.append(None if dropped else (round6(jx + nx), round6(jy + ny)))
            obs_skel.append(SkelObsRecord(
                f, p.person_id, SkeletonObservation(tuple(points))))

    return Scenario(spec.fps, tuple(gt), tuple(dets),
                    tuple(obs_head), tuple(obs_skel))


# ---------------------------------------------------------------------------
# Presets

def _single_walker() -> ScenarioSpec:
    person = PersonSpec(
        person_id=1, entry_frame=0, exit_frame=300,
        x0=40.0, y0=160.0, w=60.0, h=160.0,
        motion=(MotionSegment(120, 45.0, 0.0),
                MotionSegment(60, 0.0, 0.0),
                MotionSegment(120, 45.0, 0.0)),
        head0=90.0,
        turning=(TurnSegment(120, 0.0),
                 TurnSegment(60, 60.0),
                 TurnSegment(120, -30.0)),
    )
    noise = NoiseSpec(
        det_miss_prob=0.03, det_fp_rate=0.01,
        det_pos_sigma=2.0, det_size_sigma=1.5,
        head_sigma=15.0, head_outlier_prob=0.02,
        joint_sigma=3.0,
        joint_sigma_by={JointName.L_WRIST: 5.0, JointName.R_WRIST: 5.0},
        joint_dropout_prob=0.05,
    )
    return ScenarioSpec(n_frames=300, persons=(person,), noise=noise)


def _crossing_pair() -> ScenarioSpec:
    left = PersonSpec(
        person_id=1, entry_frame=0, exit_frame=240,
        x0=30.0, y0=160.0, w=60.0, h=160.0,
        motion=(MotionSegment(240, 57.5, 0.0),),
        head0=90.0, turning=(TurnSegment(240, 10.0),),
    )
    right = PersonSpec(
        person_id=2, entry_frame=0, exit_frame=240,
        x0=550.0, y0=160.0, w=60.0, h=160.0,
        motion=(MotionSegment(240, -57.5, 0.0),),
        head0=-90.0, turning=(TurnSegment(240, -10.0),),
    )
    noise = NoiseSpec(
        det_miss_prob=0.10, det_fp_rate=0.02,
        det_pos_sigma=2.5, det_size_sigma=2.0,
        head_sigma=15.0, head_outlier_prob=0.02,
        joint_sigma=3.0,
        joint_sigma_by={JointName.L_WRIST: 5.0, JointName.R_WRIST: 5.0},
        joint_dropout_prob=0.08,
    )
    return ScenarioSpec(n_frames=240, persons=(left, right), noise=noise)


def _deboarding_77() -> ScenarioSpec:
    n_frames = 1218
    n_persons = 77
    persons = []
    for i in range(n_persons):
        life = 150 + (i * 37) % 110
        entry = (i * (n_frames - life)) // (n_persons - 1)
        w = 52.0 + (i % 3) * 6.0
        h = 150.0
        y = 40.0 + (i % 5) * 56.0
        walk_a = (2 * life) // 5
        pause = life // 5
        walk_b = life - walk_a - pause
        budget = 640.0 - w - 40.0
        speed = min(65.0, budget * 30.0 / (walk_a + walk_b))
        direction = 1.0 if i % 2 == 0 else -1.0
        x0 = 20.0 if direction > 0 else 640.0 - w - 20.0
        persons.append(PersonSpec(
            person_id=i + 1, entry_frame=entry, exit_frame=entry + life,
            x0=x0, y0=y, w=w, h=h,
            motion=(MotionSegment(walk_a, direction * speed, 0.0),
                    MotionSegment(pause, 0.0, 0.0),
                    MotionSegment(walk_b, direction * speed, 0.0)),
            head0=90.0 * direction,
            turning=(TurnSegment(walk_a, 0.0),
                     TurnSegment(pause, 45.0 * direction),
                     TurnSegment(walk_b, -20.0 * direction)),
        ))
    noise = NoiseSpec(
        det_miss_prob=0.08, det_fp_rate=0.05,
        det_pos_sigma=2.5, det_size_sigma=2.0,
        head_sigma=18.0, head_outlier_prob=0.03,
        joint_sigma=3.5,
        joint_sigma_by={JointName.L_WRIST: 6.0, JointName.R_WRIST: 6.0},
        joint_dropout_prob=0.08,
    )
    return ScenarioSpec(n_frames=n_frames, persons=tuple(persons), noise=noise)


_PRESETS = {
    "single-walker": _single_walker,
    "crossing-pair": _crossing_pair,
    "deboarding-77": _deboarding_77,
}


def preset(name: str) -> ScenarioSpec:
    try:
        build = _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}") from None
    return build()


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


# ---------------------------------------------------------------------------
# Declarative spec files (JSON)

def _joint_map_to_dict(m: Mapping[JointName, float]) -> dict[str, float]:
    return {j.value: float(v) for j, v in m.items()}


def _joint_map_from_dict(d: Mapping[str, float], where: str) -> dict[JointName, float]:
    out = {}
    for name, v in d.items():
        try:
            out[JointName(name)] = float(v)
        except ValueError:
            raise ConfigError(f"{where}: unknown joint {name!r}") from None
    return out


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "n_frames": spec.n_frames,
        "fps": spec.fps,
        "image_w": spec.image_w,
        "image_h": spec.image_h,
        "skeleton_margin": spec.skeleton_margin,
        "persons": [
            {
                "person_id": p.person_id,
                "entry_frame": p.entry_frame,
                "exit_frame": p.exit_frame,
                "x0": p.x0, "y0": p.y0, "w": p.w, "h": p.h,
                "motion": [[s.frames, s.vx, s.vy] for s in p.motion],
                "head0": p.head0,
                "turning": [[s.frames, s.omega] for s in p.turning],
                "articulation": {
                    "period_s": p.articulation.period_s,
                    "amplitude_px": _joint_map_to_dict(p.articulation.amplitude_px),
                },
            }
            for p in spec.persons
        ],
        "noise": {
            "det_miss_prob": spec.noise.det_miss_prob,
            "det_fp_rate": spec.noise.det_fp_rate,
            "det_pos_sigma": spec.noise.det_pos_sigma,
            "det_size_sigma": spec.noise.det_size_sigma,
            "head_sigma": spec.noise.head_sigma,
            "head_outlier_prob": spec.noise.head_outlier_prob,
            "joint_sigma": spec.noise.joint_sigma,
            "joint_sigma_by": _joint_map_to_dict(spec.noise.joint_sigma_by),
            "joint_dropout_prob": spec.noise.joint_dropout_prob,
            "joint_dropout_by": _joint_map_to_dict(spec.noise.joint_dropout_by),
        },
    }


def _require(d: Mapping, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return d[key]


def spec_from_dict(d: Mapping) -> ScenarioSpec:
    try:
        persons = []
        for i, pd in enumerate(_require(d, "persons", "spec")):
            where = f"persons[{i}]"
            art = pd.get("articulation", {})
            persons.append(PersonSpec(
                person_id=int(_require(pd, "person_id", where)),
                entry_frame=int(_require(pd, "entry_frame", where)),
                exit_frame=int(_require(pd, "exit_frame", where)),
                x0=float(_require(pd, "x0", where)),
                y0=float(_require(pd, "y0", where)),
                w=float(_require(pd, "w", where)),
                h=float(_require(pd, "h", where)),
                motion=tuple(MotionSegment(int(s[0]), float(s[1]), float(s[2]))
                             for s in _require(pd, "motion", where)),
                head0=float(_require(pd, "head0", where)),
                turning=tuple(TurnSegment(int(s[0]), float(s[1]))
                              for s in _require(pd, "turning", where)),
                articulation=ArticulationSpec(
                    period_s=float(art.get("period_s", 2.0)),
                    amplitude_px=(_joint_map_from_dict(art["amplitude_px"], where)
                                  if "amplitude_px" in art else _default_amplitudes()),
                ),
            ))
        nd = d.get("noise", {})
        noise = NoiseSpec(
            det_miss_prob=float(nd.get("det_miss_prob", 0.0)),
            det_fp_rate=float(nd.get("det_fp_rate", 0.0)),
            det_pos_sigma=float(nd.get("det_pos_sigma", 0.0)),
            det_size_sigma=float(nd.get("det_size_sigma", 0.0)),
            head_sigma=float(nd.get("head_sigma", 0.0)),
            head_outlier_prob=float(nd.get("head_outlier_prob", 0.0)),
            joint_sigma=float(nd.get("joint_sigma", 0.0)),
            joint_sigma_by=_joint_map_from_dict(nd.get("joint_sigma_by", {}), "noise"),
            joint_dropout_prob=float(nd.get("joint_dropout_prob", 0.0)),
            joint_dropout_by=_joint_map_from_dict(nd.get("joint_dropout_by", {}), "noise"),
        )
        return ScenarioSpec(
            n_frames=int(_require(d, "n_frames", "spec")),
            persons=tuple(persons),
            noise=noise,
            fps=float(d.get("fps", 30.0)),
            image_w=int(d.get("image_w", 640)),
            image_h=int(d.get("image_h", 480)),
            skeleton_margin=float(d.get("skeleton_margin", 10.0)),
        )
    except (TypeError, KeyError, IndexError) as e:
        raise ConfigError(f"malformed scenario spec: {e}") from e


def read_spec_file(path: str | Path) -> ScenarioSpec:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"spec file {path}: invalid JSON ({e})") from e
    return spec_from_dict(d)
