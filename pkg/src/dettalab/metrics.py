"""Evaluation measures: angular/positional offsets, PCO, PCKh, CLEAR.

PCO is the fraction of frames whose wrapped absolute angular error is
within a threshold (default 45 degrees). PCKh counts a keypoint correct
when its Euclidean error is within half the ground-truth head size of the
same frame. Both thresholds are inclusive. CLEAR matching prefers
persisting the previous frame's correspondences while they still overlap,
then optimally assigns the rest; unmatched hypotheses are false positives,
unmatched ground truths false negatives, and a ground truth whose matched
hypothesis id differs from its last matched id counts one identity switch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    CHANNEL_HEAD,
    CHANNELS,
    BBox,
    DataError,
    JointName,
    Point,
    Scenario,
    UndefinedMetricError,
    angular_diff,
    channel_joint,
    channel_order,
    joint_channel,
)

POOLED_SKELETON = "skel:all"


# ---------------------------------------------------------------------------
# Attribute scores

def pco(errors: Sequence[float], threshold: float = 45.0) -> float:
    """Fraction of wrapped absolute angular errors within the threshold."""
    if len(errors) == 0:
        raise UndefinedMetricError("PCO over an empty error set is undefined")
    for e in errors:
        if not math.isfinite(e) or e < 0.0:
            raise ValueError(f"errors must be absolute angular differences, got {e!r}")
    return sum(1 for e in errors if e <= threshold) / len(errors)


@dataclass(frozen=True)
class JointSample:
    joint: JointName
    estimate: Point
    truth: Point
    head_size: float


def pckh(samples: Iterable[JointSample]) -> dict[str, float]:
    """Per-joint and pooled fraction of keypoints within 0.5 x head size.

    Keys are joint channel names plus ``skel:all`` for the pooled score.
    """
    per_joint: dict[JointName, list[bool]] = {}
    pooled: list[bool] = []
    for s in samples:
        if s.head_size is None or not math.isfinite(s.head_size) or s.head_size <= 0.0:
            raise DataError(f"PCKh needs a positive head size, got {s.head_size!r}")
        err = math.hypot(s.estimate[0] - s.truth[0], s.estimate[1] - s.truth[1])
        ok = err <= 0.5 * s.head_size
        per_joint.setdefault(s.joint, []).append(ok)
        pooled.append(ok)
    if not pooled:
        raise UndefinedMetricError("PCKh over an empty sample set is undefined")
    out = {joint_channel(j): sum(v) / len(v) for j, v in per_joint.items()}
    out[POOLED_SKELETON] = sum(pooled) / len(pooled)
    return out


# ---------------------------------------------------------------------------
# CLEAR

@dataclass(frozen=True)
class ClearReport:
    mota: float
    motp: float
    fp: int
    fn: int
    ids: int
    ids_rate: float  # identity switches per ground-truth box
    total_gt: int
    matches: int


@dataclass(frozen=True)
class MatchEvent:
    frame_index: int
    gt_id: int
    hyp_id: int
    iou: float


FrameBoxes = Mapping[int, Sequence[tuple[int, BBox]]]


def clear_matching(
    gt: FrameBoxes,
    hyp: FrameBoxes,
    iou_threshold: float = 0.5,
) -> tuple[ClearReport, list[MatchEvent]]:
    """CLEAR scores plus the per-frame correspondence they are based on."""
    frames = sorted(set(gt) | set(hyp))
    if frames and frames[0] < 0:
        raise DataError(f"negative frame index {frames[0]} in evaluation streams")

    total_gt = 0
    fp = fn = ids = 0
    iou_sum = 0.0
    events: list[MatchEvent] = []
    prev_match: dict[int, int] = {}   # gt id -> hyp id matched in previous frame
    last_match: dict[int, int] = {}   # gt id -> most recent hyp id ever matched

    for f in frames:
        gt_rows = sorted(gt.get(f, ()), key=lambda r: r[0])
        hyp_rows = sorted(hyp.get(f, ()), key=lambda r: r[0])
        total_gt += len(gt_rows)

        gt_left = dict(gt_rows)
        hyp_left = dict(hyp_rows)
        if len(gt_left) != len(gt_rows):
            raise DataError(f"duplicate ground-truth ids at frame {f}")
        if len(hyp_left) != len(hyp_rows):
            raise DataError(f"duplicate hypothesis ids at frame {f}")

        matched: list[tuple[int, int, float]] = []

        # Keep yesterday's pairs while they still overlap enough.
        for g, h in sorted(prev_match.items()):
            if g in gt_left and h in hyp_left:
                v = gt_left[g].iou(hyp_left[h])
                if v >= iou_threshold:
                    matched.append((g, h, v))
                    del gt_left[g]
                    del hyp_left[h]

        # Optimal assignment over the rest.
        if gt_left and hyp_left:
            g_ids = sorted(gt_left)
            h_ids = sorted(hyp_left)
            iou = np.zeros((len(g_ids), len(h_ids)))
            for i, g in enumerate(g_ids):
                for j, h in enumerate(h_ids):
                    v = gt_left[g].iou(hyp_left[h])
                    if v >= iou_threshold:
                        iou[i, j] = v
            rows, cols = linear_sum_assignment(iou, maximize=True)
            for i, j in zip(rows, cols):
                if iou[i, j] >= iou_threshold:
                    matched.append((g_ids[i], h_ids[j], float(iou[i, j])))
                    del gt_left[g_ids[i]]
                    del hyp_left[h_ids[j]]

        matched.sort(key=lambda m: m[0])
        for g, h, v in matched:
            if g in last_match and last_match[g] != h:
                ids += 1
            last_match[g] = h
            iou_sum += v
            events.append(MatchEvent(f, g, h, v))

        fn += len(gt_left)
        fp += len(hyp_left)
        prev_match = {g: h for g, h, _ in matched}

    if total_gt == 0:
        raise UndefinedMetricError("CLEAR over an empty ground-truth stream is undefined")
    n_matches = len(events)
    mota = 1.0 - (fp + fn + ids) / total_gt
    motp = iou_sum / n_matches if n_matches else 0.0
    report = ClearReport(mota, motp, fp, fn, ids, ids / total_gt, total_gt, n_matches)
    return report, events


def clear(gt: FrameBoxes, hyp: FrameBoxes, iou_threshold: float = 0.5) -> ClearReport:
    report, _ = clear_matching(gt, hyp, iou_threshold)
    return report


# ---------------------------------------------------------------------------
# Attribute evaluation over CLEAR correspondences

@dataclass(frozen=True)
class ChannelScore:
    channel: str
    count: int
    mean_offset: float  # degrees for the head channel, pixels otherwise
    score: float        # PCO or PCKh fraction


@dataclass(frozen=True)
class AttrReport:
    scores: tuple[ChannelScore, ...]

    def score_for(self, channel: str) -> ChannelScore:
        for s in self.scores:
            if s.channel == channel:
                return s
        raise UndefinedMetricError(f"no samples for channel {channel!r}")

    def channels(self) -> tuple[str, ...]:
        return tuple(s.channel for s in self.scores)


def _head_report_entries(errors: list[float], pco_threshold: float):
    if not errors:
        return []
    return [ChannelScore(CHANNEL_HEAD, len(errors),
                         sum(errors) / len(errors), pco(errors, pco_threshold))]


def _skel_report_entries(samples: list[JointSample]):
    if not samples:
        return []
    fractions = pckh(samples)
    errors: dict[str, list[float]] = {}
    for s in samples:
        err = math.hypot(s.estimate[0] - s.truth[0], s.estimate[1] - s.truth[1])
        errors.setdefault(joint_channel(s.joint), []).append(err)
        errors.setdefault(POOLED_SKELETON, []).append(err)
    out = []
    for ch in sorted(errors, key=lambda c: (c == POOLED_SKELETON, channel_order(c)
                                            if c != POOLED_SKELETON else 0)):
        e = errors[ch]
        out.append(ChannelScore(ch, len(e), sum(e) / len(e), fractions[ch]))
    return out


def attr_eval(
    scenario: Scenario,
    matches: Sequence[MatchEvent],
    pco_threshold: float = 45.0,
) -> dict[str, AttrReport]:
    """Raw-vs-filtered attribute reports over matched (GT, track) pairs.

    The raw stream is the analysis module's per-frame observation for the
    matched ground-truth person; the filtered stream is the bank's output
    for the matched track. Errors are only collected where ground truth,
    an estimate, and (for joints) a visible ground-truth joint all exist.
    """
    if not scenario.track_attrs:
        raise DataError("scenario has no trk-attr records; run the pipeline first")

    active = sorted({r.channel for r in scenario.track_attrs}, key=channel_order)
    eval_head = CHANNEL_HEAD in active
    eval_joints = [channel_joint(c) for c in active if channel_joint(c) is not None]

    gt_map = {(r.frame_index, r.person_id): r for r in scenario.gt}
    oh_map = {(r.frame_index, r.person_id): r for r in scenario.obs_head}
    os_map = {(r.frame_index, r.person_id): r for r in scenario.obs_skel}
    attr_map = {(r.frame_index, r.track_id, r.channel): r for r in scenario.track_attrs}

    raw_head: list[float] = []
    filt_head: list[float] = []
    raw_skel: list[JointSample] = []
    filt_skel: list[JointSample] = []

    for m in matches:
        g = gt_map.get((m.frame_index, m.gt_id))
        if g is None:
            raise DataError(
                f"match references unknown ground truth (frame {m.frame_index}, "
                f"person {m.gt_id})")
        if eval_head:
            obs = oh_map.get((m.frame_index, m.gt_id))
            if obs is not None:
                raw_head.append(abs(angular_diff(obs.theta, g.head_theta)))
            rec = attr_map.get((m.frame_index, m.hyp_id, CHANNEL_HEAD))
            if rec is not None:
                filt_head.append(abs(angular_diff(rec.values[0], g.head_theta)))
        if eval_joints:
            obs = os_map.get((m.frame_index, m.gt_id))
            for joint in eval_joints:
                truth = g.skeleton.point(joint)
                if truth is None:
                    continue
                if obs is not None:
                    pt = obs.skeleton.point(joint)
                    if pt is not None:
                        raw_skel.append(JointSample(joint, pt, truth, g.head_size))
                rec = attr_map.get((m.frame_index, m.hyp_id, joint_channel(joint)))
                if rec is not None:
                    filt_skel.append(JointSample(joint, tuple(rec.values), truth,
                                                 g.head_size))

    raw_scores = _head_report_entries(raw_head, pco_threshold) + _skel_report_entries(raw_skel)
    filt_scores = _head_report_entries(filt_head, pco_threshold) + _skel_report_entries(filt_skel)
    if not raw_scores and not filt_scores:
        raise UndefinedMetricError(
            "no matched frames with both ground truth and estimates")
    return {"raw": AttrReport(tuple(raw_scores)),
            "filtered": AttrReport(tuple(filt_scores))}
