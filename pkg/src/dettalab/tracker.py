"""Online IoU tracker with optimal per-frame assignment.

Deliberately minimal: association runs against each track's last box with
no motion model, so the temporal smoothing under study stays entirely in
the filter bank. Tracks confirm after ``confirm_hits`` consecutive matched
frames, survive up to ``max_misses`` consecutive missed frames, and only
tracks matched in the current frame emit output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BBox, TimeRegressionError, TrackId

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


@dataclass
class TrackState:
    id: TrackId
    bbox: BBox
    hits: int = 1      # consecutive matched frames, reset by a miss
    misses: int = 0    # consecutive missed frames, reset by a match
    status: str = TENTATIVE


def associate(
    tracks: Sequence[TrackState],
    detections: Sequence[BBox],
    iou_threshold: float = 0.3,
) -> tuple[list[tuple[int, int, float]], list[int], list[int]]:
    """One-to-one track/detection matching maximizing total IoU.

    Pairs with IoU below ``iou_threshold`` are never matched. Returns
    ``(matches, unmatched_track_idx, unmatched_det_idx)`` where each match
    is ``(track_idx, det_idx, iou)``.
    """
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))

    iou = np.zeros((len(tracks), len(detections)))
    for ti, tr in enumerate(tracks):
        for di, det in enumerate(detections):
            v = tr.bbox.iou(det)
            if v >= iou_threshold:
                iou[ti, di] = v

    rows, cols = linear_sum_assignment(iou, maximize=True)
    matches = [(int(r), int(c), float(iou[r, c]))
               for r, c in zip(rows, cols) if iou[r, c] >= iou_threshold]
    matched_t = {m[0] for m in matches}
    matched_d = {m[1] for m in matches}
    unmatched_t = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_d = [i for i in range(len(detections)) if i not in matched_d]
    return matches, unmatched_t, unmatched_d


@dataclass
class IouTracker:
    iou_threshold: float = 0.3
    confirm_hits: int = 2
    max_misses: int = 5
    tracks: list[TrackState] = field(default_factory=list)
    _next_id: int = 1
    _last_frame: int | None = None

    def tick(self, frame_index: int, detections: Sequence[BBox]) -> list[tuple[TrackId, BBox]]:
        """Advance one frame; returns the (id, bbox) outputs for this frame."""
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise TimeRegressionError(
                f"frame {frame_index} arrived after frame {self._last_frame}")
        self._last_frame = frame_index

        matches, unmatched_t, unmatched_d = associate(
            self.tracks, detections, self.iou_threshold)

        emitted: list[tuple[TrackId, BBox]] = []
        for ti, di, _ in matches:
            tr = self.tracks[ti]
            tr.bbox = detections[di]
            tr.hits += 1
            tr.misses = 0
            if tr.status == TENTATIVE and tr.hits >= self.confirm_hits:
                tr.status = CONFIRMED
            if tr.status == CONFIRMED:
                emitted.append((tr.id, tr.bbox))

        for ti in unmatched_t:
            tr = self.tracks[ti]
            tr.hits = 0
            tr.misses += 1
            if tr.misses > self.max_misses:
                tr.status = DEAD

        for di in unmatched_d:
            self.tracks.append(TrackState(self._next_id, detections[di]))
            self._next_id += 1

        self.tracks = [t for t in self.tracks if t.status != DEAD]
        emitted.sort(key=lambda e: e[0])
        return emitted
