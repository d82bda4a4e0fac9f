"""Shared test helpers: independent oracles and small scenario builders.

The hold-last oracle here deliberately re-implements scheduling, value
holding, and key lifecycle from scratch (plain dicts, modular arithmetic)
so it can stand as an independent check against the filter bank.
"""

from __future__ import annotations

import itertools
from typing import Mapping, Sequence

from dettalab.core import JOINTS, BBox, Scenario, TrackAttrRecord, TrackRecord, joint_channel
from dettalab.pipeline import iter_bank_inputs
from dettalab.simgen import (
    MotionSegment,
    NoiseSpec,
    PersonSpec,
    ScenarioSpec,
    TurnSegment,
)

JOINT_CHANNELS = tuple(joint_channel(j) for j in JOINTS)


def hold_last_outputs(
    scenario: Scenario,
    tracks: Sequence[TrackRecord],
    schedule: Mapping[str, tuple[int, int]],
    expire_after: int = 10,
) -> list[TrackAttrRecord]:
    """Hold-the-last-scheduled-observation baseline, coded independently.

    ``schedule`` maps module name -> (stride, phase). Keys appear on the
    first consumed observation, emit their held value every frame their
    track is present, and disappear after ``expire_after`` consecutive
    frames of track absence.
    """
    held: dict[tuple[int, str], tuple[float, ...]] = {}
    absent: dict[int, int] = {}
    out: list[TrackAttrRecord] = []

    for stamp, live, obs in iter_bank_inputs(scenario, tracks, tuple(schedule)):
        f = stamp.frame_index
        live_ids = sorted({tid for tid, _ in live})
        live_set = set(live_ids)

        for tid in sorted({k[0] for k in held}):
            if tid in live_set:
                absent[tid] = 0
            else:
                absent[tid] = absent.get(tid, 0) + 1
                if absent[tid] >= expire_after:
                    for k in [k for k in held if k[0] == tid]:
                        del held[k]
                    del absent[tid]

        fires = {m: f % s == p for m, (s, p) in schedule.items()}
        for tid in live_ids:
            if "head" in schedule:
                o = obs.get(("head", tid)) if fires["head"] else None
                key = (tid, "head")
                if o is not None:
                    held[key] = (o.theta,)
                    out.append(TrackAttrRecord(f, tid, "head", held[key], True))
                elif key in held:
                    out.append(TrackAttrRecord(f, tid, "head", held[key], False))
            if "skeleton" in schedule:
                sk = obs.get(("skeleton", tid)) if fires["skeleton"] else None
                for joint, ch in zip(JOINTS, JOINT_CHANNELS):
                    key = (tid, ch)
                    zp = sk.point(joint) if sk is not None else None
                    if zp is not None:
                        held[key] = zp
                        out.append(TrackAttrRecord(f, tid, ch, zp, True))
                    elif key in held:
                        out.append(TrackAttrRecord(f, tid, ch, held[key], False))
    return out


def brute_force_max_iou(
    track_boxes: Sequence[BBox],
    det_boxes: Sequence[BBox],
    iou_threshold: float,
) -> float:
    """Best achievable total IoU over one-to-one matchings (exhaustive)."""
    n_t, n_d = len(track_boxes), len(det_boxes)
    best = 0.0
    if n_t <= n_d:
        for perm in itertools.permutations(range(n_d), n_t):
            total = 0.0
            for ti, di in enumerate(perm):
                v = track_boxes[ti].iou(det_boxes[di])
                if v >= iou_threshold:
                    total += v
            best = max(best, total)
    else:
        for perm in itertools.permutations(range(n_t), n_d):
            total = 0.0
            for di, ti in enumerate(perm):
                v = track_boxes[ti].iou(det_boxes[di])
                if v >= iou_threshold:
                    total += v
            best = max(best, total)
    return best


def turning_head_spec(
    n_frames: int = 150,
    omega_deg_per_frame: float = 5.0,
    head_sigma: float = 20.0,
    fps: float = 30.0,
) -> ScenarioSpec:
    """One stationary person whose head turns at a constant rate."""
    person = PersonSpec(
        person_id=1, entry_frame=0, exit_frame=n_frames,
        x0=290.0, y0=160.0, w=60.0, h=160.0,
        motion=(MotionSegment(n_frames, 0.0, 0.0),),
        head0=0.0,
        turning=(TurnSegment(n_frames, omega_deg_per_frame * fps),),
    )
    return ScenarioSpec(n_frames=n_frames, persons=(person,),
                        noise=NoiseSpec(head_sigma=head_sigma), fps=fps)


def walker_spec(n_frames: int = 120, head_omega_dps: float = 60.0) -> ScenarioSpec:
    """One noise-free walking person with a steadily turning head."""
    person = PersonSpec(
        person_id=1, entry_frame=0, exit_frame=n_frames,
        x0=40.0, y0=160.0, w=60.0, h=160.0,
        motion=(MotionSegment(n_frames, 60.0, 0.0),),
        head0=20.0,
        turning=(TurnSegment(n_frames, head_omega_dps),),
    )
    return ScenarioSpec(n_frames=n_frames, persons=(person,), noise=NoiseSpec())
