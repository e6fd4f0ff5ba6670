"""Adaptive explicit integration with dense output and event location.

A hand-rolled Dormand-Prince 5(4) embedded pair drives everything in this
package: it keeps the trajectories bitwise deterministic, exposes cubic
Hermite dense output between accepted steps, and lets event crossings be
located by bisection on that dense output.  Blowup times are recovered from
trajectory tails through the exact linearity of r^(1-alpha) in t on the
self-similar collapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NoEvent, NoEventDirection, NotBlowingUp, OutOfRange, StepFailure

# Dormand-Prince 5(4) tableau (FSAL: the last stage is f at the new point).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# b5 - b4 including the FSAL stage
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_EVENT_SUBSAMPLES = 8


@dataclass(frozen=True)
class IntegrationOptions:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = math.inf
    r_floor: float = 1e-10
    horizon: float = 1e3

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if self.r_floor < 0:
            raise ValueError("r_floor must be nonnegative")


DEFAULT_OPTIONS = IntegrationOptions()


@dataclass
class Trajectory:
    """Sampled solution with cubic Hermite dense output per accepted step.

    status is one of completed | hit_radius_floor | hit_event | step_failure
    and explains the terminal sample.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    status: str
    t_b_estimate: Optional[tuple] = None

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __call__(self, t):
        return self.sample(t)

    def sample(self, t):
        """Dense evaluation at scalar or array times within the sampled span."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        ts = self.times
        lo, hi = ts[0], ts[-1]
        pad = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(t_arr < lo - pad) or np.any(t_arr > hi + pad):
            raise OutOfRange(f"query outside sampled range [{lo}, {hi}]")
        tq = np.clip(t_arr, lo, hi)
        idx = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, len(ts) - 2)
        h = ts[idx + 1] - ts[idx]
        s = np.where(h > 0, (tq - ts[idx]) / np.where(h > 0, h, 1.0), 0.0)
        y0, y1 = self.states[idx], self.states[idx + 1]
        f0, f1 = self.derivs[idx], self.derivs[idx + 1]
        s = s[:, None]
        hcol = h[:, None]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out = h00 * y0 + h10 * hcol * f0 + h01 * y1 + h11 * hcol * f1
        if np.isscalar(t) or np.ndim(t) == 0:
            return out[0]
        return out

    def radii(self) -> np.ndarray:
        return np.sqrt(np.einsum("ij,ij->i", self.states, self.states))

    def to_csv(self, path):
        d = self.states.shape[1]
        header = "t," + ",".join(f"x{i+1}" for i in range(d))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, x in zip(self.times, self.states):
                fh.write(",".join(f"{v:.17g}" for v in (t, *x)) + "\n")


def _error_norm(err, y0, y1, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return math.sqrt(float(np.mean((err / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, direction, atol, rtol, max_step):
    # Hairer/Wanner starting-step heuristic.
    scale = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = np.asarray(rhs(t0 + h0 * direction, y1), dtype=float)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def _stepper(rhs, x0, t0, t1, opts, postprocess=None):
    """Generate accepted steps (t_prev, y_prev, f_prev, t_new, y_new, f_new).

    Raises StopIteration values through generator return semantics; the
    wrapping drivers collect samples and statuses.
    """
    y = np.asarray(x0, dtype=float).copy()
    t = t0
    f = np.asarray(rhs(t, y), dtype=float)
    if y.shape != f.shape:
        raise ValueError("rhs output shape does not match the state shape")
    h = _initial_step(rhs, t, y, f, 1.0, opts.atol, opts.rtol, opts.max_step)
    h = min(h, t1 - t0)
    K = np.empty((7, y.size))
    while t < t1:
        h = min(h, opts.max_step, t1 - t)
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepFailure(f"step size underflow at t = {t!r}", None)
        K[0] = f
        for i in range(5):
            yi = y + h * (K[: i + 1].T @ _A[i])
            K[i + 1] = rhs(t + _C[i + 1] * h, yi)
        y_new = y + h * (K[:6].T @ _B)
        t_new = t + h
        f_new = np.asarray(rhs(t_new, y_new), dtype=float)
        K[6] = f_new
        err = h * (K.T @ _E)
        enorm = _error_norm(err, y, y_new, opts.atol, opts.rtol)
        if enorm <= 1.0:
            if postprocess is not None:
                y_adj = postprocess(t_new, y_new)
                if y_adj is not y_new:
                    y_new = np.asarray(y_adj, dtype=float)
                    f_new = np.asarray(rhs(t_new, y_new), dtype=float)
            yield t, y, f, t_new, y_new, f_new
            t, y, f = t_new, y_new, f_new
            factor = _MAX_FACTOR if enorm == 0.0 else min(
                _MAX_FACTOR, _SAFETY * enorm ** -0.2
            )
            h *= max(_MIN_FACTOR, factor)
        else:
            h *= max(_MIN_FACTOR, min(1.0, _SAFETY * enorm ** -0.2))


def integrate(
    rhs: Callable,
    x0,
    t0: float,
    t1: float,
    opts: IntegrationOptions = DEFAULT_OPTIONS,
    postprocess=None,
) -> Trajectory:
    """Integrate dx/dt = rhs(t, x) from t0 to t1 with adaptive 5(4) stepping.

    Stops early with status hit_radius_floor when |x| drops below
    opts.r_floor (the ideal singular field cannot be followed into the
    origin).  Raises StepFailure, carrying the partial trajectory, when the
    step size underflows.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    x0 = np.asarray(x0, dtype=float)
    times = [t0]
    states = [x0.astype(float)]
    derivs = [np.asarray(rhs(t0, x0), dtype=float)]
    status = "completed"
    try:
        for tp, yp, fp, t_new, y_new, f_new in _stepper(rhs, x0, t0, t1, opts, postprocess):
            floor_hit = None
            if opts.r_floor > 0.0:
                floor_hit = _floor_crossing(opts.r_floor, tp, yp, fp, t_new, y_new, f_new)
            if floor_hit is not None:
                t_f, x_f = floor_hit
                times.append(t_f)
                states.append(x_f)
                derivs.append(np.asarray(rhs(t_f, x_f), dtype=float))
                status = "hit_radius_floor"
                break
            times.append(t_new)
            states.append(y_new)
            derivs.append(f_new)
    except StepFailure as exc:
        traj = Trajectory(np.array(times), np.array(states), np.array(derivs), "step_failure")
        raise StepFailure(str(exc), traj) from None
    return Trajectory(np.array(times), np.array(states), np.array(derivs), status)


def _floor_crossing(r_floor, tp, yp, fp, tn, yn, fn):
    """First sub-step time where the dense radius drops below r_floor.

    One accepted step can straddle the origin passage entirely (the window
    with r < r_floor is much narrower than the step), so the dense output is
    subsampled whenever an endpoint is within a few decades of the floor.
    """
    rp = math.sqrt(float(yp @ yp))
    rn = math.sqrt(float(yn @ yn))
    if min(rp, rn) >= 1e3 * r_floor:
        return None
    if rn < r_floor:
        lo, hi = tp, tn
    else:
        ts = np.linspace(tp, tn, 33)[1:-1]
        below = None
        for tq in ts:
            yq = _hermite_eval(tq, tp, yp, fp, tn, yn, fn)
            if math.sqrt(float(yq @ yq)) < r_floor:
                below = tq
                break
        if below is None:
            return None
        lo, hi = tp, below
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        ym = _hermite_eval(mid, tp, yp, fp, tn, yn, fn)
        if math.sqrt(float(ym @ ym)) < r_floor:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    t_f = hi
    return t_f, _hermite_eval(t_f, tp, yp, fp, tn, yn, fn)


def _hermite_eval(t, tp, yp, fp, tn, yn, fn):
    h = tn - tp
    s = (t - tp) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * yp + h10 * h * fp + h01 * yn + h11 * h * fn


def _locate_crossing(event, step, bracket):
    """Bisect the dense output of one accepted step for the event root.

    step is the full Hermite interval (tp, yp, fp, tn, yn, fn); bracket is
    (ta, ga, tb, gb) with the sign change between ta and tb.
    """
    tp, yp, fp, tn, yn, fn = step
    lo, glo, hi, ghi = bracket
    scale = max(1.0, abs(glo), abs(ghi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ymid = _hermite_eval(mid, tp, yp, fp, tn, yn, fn)
        gmid = float(event(mid, ymid))
        if abs(gmid) <= 1e-12 * scale or hi - lo <= 16 * np.finfo(float).eps * max(1.0, abs(mid)):
            return mid, ymid
        if (gmid > 0) == (glo > 0):
            lo, glo = mid, gmid
        else:
            hi = mid
    ymid = _hermite_eval(0.5 * (lo + hi), tp, yp, fp, tn, yn, fn)
    return 0.5 * (lo + hi), ymid


def _integrate_to_crossing(rhs, x0, t0, event, direction, opts, t_max, postprocess=None):
    """Event search without the strict start-side precondition.

    Detects the first crossing of event through zero in the requested
    direction strictly after t0, scanning the dense output of each accepted
    step.  Returns (t_event, x_event, trajectory ending at the event).
    """
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 (upward) or -1 (downward)")
    x0 = np.asarray(x0, dtype=float)
    times = [t0]
    states = [x0.astype(float)]
    derivs = [np.asarray(rhs(t0, x0), dtype=float)]
    g_prev = float(event(t0, x0))
    try:
        stepper = _stepper(rhs, x0, t0, t_max, opts, postprocess)
        for tp, yp, fp, tn, yn, fn in stepper:
            # subsample the step so double crossings are not skipped
            sub_t = np.linspace(tp, tn, _EVENT_SUBSAMPLES + 1)[1:]
            ga = g_prev
            ta = tp
            hit = None
            for tq in sub_t:
                yq = yn if tq == tn else _hermite_eval(tq, tp, yp, fp, tn, yn, fn)
                gq = float(event(tq, yq))
                crossed = (ga < 0.0 <= gq) if direction > 0 else (ga > 0.0 >= gq)
                if crossed:
                    hit = _locate_crossing(
                        event, (tp, yp, fp, tn, yn, fn), (ta, ga, tq, gq)
                    )
                    break
                ta, ga = tq, gq
            if hit is not None:
                t_e, x_e = hit
                times.append(t_e)
                states.append(x_e)
                derivs.append(np.asarray(rhs(t_e, x_e), dtype=float))
                traj = Trajectory(np.array(times), np.array(states), np.array(derivs), "hit_event")
                return t_e, x_e, traj
            g_prev = ga
            times.append(tn)
            states.append(yn)
            derivs.append(fn)
            if opts.r_floor > 0.0 and math.sqrt(float(yn @ yn)) < opts.r_floor:
                raise NoEvent("trajectory hit the radius floor before the event")
    except StepFailure as exc:
        raise NoEvent(f"integration failed before the event: {exc}") from None
    raise NoEvent(f"no event crossing within horizon t <= {t_max!r}")


def integrate_to_event(
    rhs: Callable,
    x0,
    t0: float,
    event: Callable,
    direction: int,
    opts: IntegrationOptions = DEFAULT_OPTIONS,
):
    """Locate the first directional zero crossing of event(t, x).

    direction=+1 looks for an upward crossing (the event function must be
    strictly negative at t0), direction=-1 for a downward one.  The search
    spans t0 .. t0 + opts.horizon.
    """
    x0 = np.asarray(x0, dtype=float)
    g0 = float(event(t0, x0))
    if direction > 0 and g0 >= 0.0:
        raise NoEventDirection(
            f"event already at or past an upward crossing at t0 (event = {g0!r})"
        )
    if direction < 0 and g0 <= 0.0:
        raise NoEventDirection(
            f"event already at or past a downward crossing at t0 (event = {g0!r})"
        )
    return _integrate_to_crossing(rhs, x0, t0, event, direction, opts, t0 + opts.horizon)


def estimate_blowup_time(traj: Trajectory, alpha: float):
    """Fit the collapse tail r^(1-alpha) ~ (t_b - t) and return (t_b, p, resid).

    p is the fitted exponent of r against (t_b - t), which equals 1/(1-alpha)
    for a self-similar blowup.  resid is the rms misfit of the linear law
    relative to the tail amplitude.  Raises NotBlowingUp when the tail radius
    is not monotonically decreasing over at least 20 samples.
    """
    r = traj.radii()
    t = traj.times
    n = len(r)
    i = n - 1
    while i > 0 and r[i - 1] > r[i]:
        i -= 1
    rt, tt = r[i:], t[i:]
    if len(rt) < 20:
        raise NotBlowingUp(
            f"tail has only {len(rt)} monotonically decreasing samples (need >= 20)"
        )
    # restrict to the self-similar regime: the deepest sub-tail that still
    # holds enough samples (transients decay like a power of r)
    for cut in (1e-4, 1e-3, 1e-2, 1e-1, 1.0):
        sel = rt <= rt[0] * cut
        if sel.sum() >= 20:
            break
    rt, tt = rt[sel][-400:], tt[sel][-400:]
    u = rt ** (1.0 - alpha)
    m, b = np.polyfit(tt, u, 1)
    if m >= 0:
        raise NotBlowingUp("tail radius is not shrinking linearly in r^(1-alpha)")
    t_b = -b / m
    resid = float(np.sqrt(np.mean((u - (m * tt + b)) ** 2)) / np.max(u))
    dt = t_b - tt
    ok = (dt > 0) & (rt > 0)
    p, _ = np.polyfit(np.log(dt[ok]), np.log(rt[ok]), 1)
    return float(t_b), float(p), resid
