"""Scalar, angular, and 2D-point g-h (alpha-beta) filters.

The state is the filtered value and its first derivative, advanced by the
predict-update recurrence (time in seconds, gains dimensionless):

    x_pred = x + v * dt
    x_new  = x_pred + g * (z - x_pred)
    v_new  = v + h * (z - x_pred) / dt

The angular variant keeps ``x`` in degrees on ``(-180, 180]`` and takes the
residual along the shortest arc; the point variant runs two independent
scalar filters that share one clock. With ``g=1, h=0`` the filter reduces
exactly to holding the newest observation, and with ``g=0, h=0`` it stays
frozen at its initial value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Point, TimeRegressionError, angular_diff, wrap_angle


@dataclass(frozen=True)
class GHParams:
    """Value gain ``g`` in [0, 1] and derivative gain ``h`` >= 0."""

    g: float
    h: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.g) and math.isfinite(self.h)):
            raise ValueError(f"gains must be finite, got g={self.g!r}, h={self.h!r}")
        if not 0.0 <= self.g <= 1.0:
            raise ValueError(f"g must be in [0, 1], got {self.g}")
        if self.h < 0.0:
            raise ValueError(f"h must be >= 0, got {self.h}")


#: Holding the newest observation is the g=1, h=0 corner of the filter family.
KEEP_LAST = GHParams(1.0, 0.0)


@dataclass(frozen=True)
class GHState:
    x: float
    v: float
    last_time: float


@dataclass(frozen=True)
class PointGHState:
    """One scalar filter per image axis, sharing a single last-update time."""

    x: Point
    v: Point
    last_time: float


def _check_finite(z: float) -> float:
    if not math.isfinite(z):
        raise ValueError(f"observation must be finite, got {z!r}")
    return float(z)


def _dt(state, t: float) -> float:
    dt = t - state.last_time
    if dt < 0.0:
        raise TimeRegressionError(
            f"time ran backwards: t={t} before last_time={state.last_time}")
    return dt


def init(z0: float, t0: float) -> GHState:
    return GHState(_check_finite(z0), 0.0, float(t0))


def init_angular(z0: float, t0: float) -> GHState:
    return GHState(wrap_angle(z0), 0.0, float(t0))


def init_point(z0: Point, t0: float) -> PointGHState:
    return PointGHState((_check_finite(z0[0]), _check_finite(z0[1])), (0.0, 0.0), float(t0))


def predict(state: GHState, t: float) -> GHState:
    dt = _dt(state, t)
    return GHState(state.x + state.v * dt, state.v, t)


def predict_angular(state: GHState, t: float) -> GHState:
    dt = _dt(state, t)
    return GHState(wrap_angle(state.x + state.v * dt), state.v, t)


def predict_point(state: PointGHState, t: float) -> PointGHState:
    dt = _dt(state, t)
    return PointGHState(
        (state.x[0] + state.v[0] * dt, state.x[1] + state.v[1] * dt),
        state.v, t)


def _blend(x_pred: float, z: float, r: float, g: float) -> float:
    # g=1 collapses the blend to the measurement itself; assigning it directly
    # keeps the hold-last identity exact in floating point.
    return z if g == 1.0 else x_pred + g * r


def _new_v(v: float, r: float, dt: float, h: float) -> float:
    # dt == 0 would make the derivative correction ill-defined; treat the
    # update as a pure measurement blend and leave v alone.
    if dt == 0.0:
        return v
    return v + h * r / dt


def update(state: GHState, z: float, t: float, params: GHParams) -> GHState:
    z = _check_finite(z)
    dt = _dt(state, t)
    x_pred = state.x + state.v * dt
    r = z - x_pred
    return GHState(_blend(x_pred, z, r, params.g), _new_v(state.v, r, dt, params.h), t)


def update_angular(state: GHState, z: float, t: float, params: GHParams) -> GHState:
    z = wrap_angle(z)
    dt = _dt(state, t)
    x_pred = wrap_angle(state.x + state.v * dt)
    r = angular_diff(z, x_pred)
    x = z if params.g == 1.0 else wrap_angle(x_pred + params.g * r)
    return GHState(x, _new_v(state.v, r, dt, params.h), t)


def update_point(state: PointGHState, z: Point, t: float, params: GHParams) -> PointGHState:
    zu = _check_finite(z[0])
    zv = _check_finite(z[1])
    dt = _dt(state, t)
    xu = state.x[0] + state.v[0] * dt
    xv = state.x[1] + state.v[1] * dt
    ru = zu - xu
    rv = zv - xv
    return PointGHState(
        (_blend(xu, zu, ru, params.g), _blend(xv, zv, rv, params.g)),
        (_new_v(state.v[0], ru, dt, params.h),
         _new_v(state.v[1], rv, dt, params.h)),
        t)


def step(state: GHState, z: float | None, t: float, params: GHParams) -> GHState:
    """Update when an observation is present, otherwise predict only."""
    if z is None:
        return predict(state, t)
    return update(state, z, t, params)


def step_angular(state: GHState, z: float | None, t: float, params: GHParams) -> GHState:
    if z is None:
        return predict_angular(state, t)
    return update_angular(state, z, t, params)


def step_point(state: PointGHState, z: Point | None, t: float, params: GHParams) -> PointGHState:
    if z is None:
        return predict_point(state, t)
    return update_point(state, z, t, params)
