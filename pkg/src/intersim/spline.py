"""Clamped cubic-spline reconstruction of prior trajectories.

A sampled feature vector fixes K+1 knots (entry point plus K way-points at
times k*T/K) and the first derivatives at both ends.  Each coordinate gets
its own C2 piecewise cubic, solved from the moment (second derivative)
tridiagonal system in O(K), then evaluated on a fixed dt grid with the
exact duration T appended when it is not a grid multiple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AgentKind, TrajectoryFeature
from .errors import InvalidKnots

DEFAULT_DT = 0.4
_GRID_EPS = 1e-9


@dataclass
class SplineCoeffs:
    """Per-coordinate cubics: segment i covers [i*h, (i+1)*h)."""

    h: float  # knot spacing T/K
    y: np.ndarray  # (K+1, 2) knot values
    b: np.ndarray  # (K, 2) linear coefficients per segment
    c: np.ndarray  # (K+1, 2) second derivatives (moments) at the knots
    # segment i, local tau: y[i] + b[i] tau + (c[i]/2) tau^2 + ((c[i+1]-c[i])/(6h)) tau^3

    @property
    def n_segments(self) -> int:
        return self.b.shape[0]

    @property
    def duration(self) -> float:
        return self.h * self.n_segments

    def evaluate(self, t: float) -> np.ndarray:
        if t >= self.duration:
            return self.y[-1].copy()
        if t <= 0.0:
            t = 0.0
        i = min(int(t / self.h), self.n_segments - 1)
        tau = t - i * self.h
        d3 = (self.c[i + 1] - self.c[i]) / (6.0 * self.h)
        return self.y[i] + tau * (self.b[i] + tau * (0.5 * self.c[i] + tau * d3))

    def derivative(self, t: float) -> np.ndarray:
        t = min(max(t, 0.0), self.duration)
        i = min(int(t / self.h), self.n_segments - 1)
        tau = t - i * self.h
        d3 = (self.c[i + 1] - self.c[i]) / (6.0 * self.h)
        return self.b[i] + tau * (self.c[i] + tau * 3.0 * d3)

    def second_derivative(self, t: float) -> np.ndarray:
        t = min(max(t, 0.0), self.duration)
        i = min(int(t / self.h), self.n_segments - 1)
        tau = t - i * self.h
        return self.c[i] + tau * (self.c[i + 1] - self.c[i]) / self.h


def fit_clamped(feature: TrajectoryFeature) -> SplineCoeffs:
    """Interpolate entry point and way-points with prescribed end velocities."""
    k = feature.k
    t_total = feature.duration_T
    if not t_total > 0:
        raise InvalidKnots("duration must be positive (knots would coincide)")
    h = t_total / k
    knots = np.vstack([feature.entry_pos[None, :], feature.waypoints])  # (K+1, 2)
    v0 = feature.entry_vel
    vk = feature.exit_vel

    # Moment system: tridiagonal in the second derivatives m_0..m_K.
    n = k + 1
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    rhs = np.empty((n, 2))
    diag[0] = 2.0
    upper[0] = 1.0
    rhs[0] = 6.0 * ((knots[1] - knots[0]) / h - v0) / h
    for i in range(1, k):
        lower[i] = 1.0
        diag[i] = 4.0
        upper[i] = 1.0
        rhs[i] = 6.0 * (knots[i + 1] - 2.0 * knots[i] + knots[i - 1]) / (h * h)
    lower[k] = 1.0
    diag[k] = 2.0
    rhs[k] = 6.0 * (vk - (knots[k] - knots[k - 1]) / h) / h

    moments = _thomas_solve(lower, diag, upper, rhs)
    b = (knots[1:] - knots[:-1]) / h - h * (2.0 * moments[:-1] + moments[1:]) / 6.0
    return SplineCoeffs(h=h, y=knots, b=b, c=moments)


def _thomas_solve(lower, diag, upper, rhs):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty_like(rhs)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    out = np.empty_like(rhs)
    out[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


@dataclass
class PriorTrajectory:
    """Coarse trajectory for one agent-to-be: spline samples on a dt grid.

    The grid always contains t = 0 and ends exactly at t = T (appended as a
    short final step when T is not a grid multiple), so the destination is
    always representable.
    """

    kind: AgentKind
    dt: float
    grid_times: np.ndarray  # (n,)
    points: np.ndarray  # (n, 2)
    duration_T: float
    source_feature: TrajectoryFeature
    coeffs: SplineCoeffs
    source_component: int | None = None

    @property
    def destination(self) -> np.ndarray:
        """Exit position x(T), the removal target during simulation."""
        return self.points[-1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def position_at(self, t: float) -> np.ndarray:
        return self.coeffs.evaluate(min(max(t, 0.0), self.duration_T))

    def goal_waypoint(self, t: float, l_pd: int) -> np.ndarray:
        """Rolling goal: the prior position one prediction window ahead of t,
        clamped to the destination once t + l_pd*dt reaches T."""
        th = t + l_pd * self.dt
        if th >= self.duration_T:
            return self.points[-1].copy()
        return self.coeffs.evaluate(th)

    def max_speed(self) -> float:
        step = np.diff(self.points, axis=0)
        dt_steps = np.diff(self.grid_times)
        speeds = np.linalg.norm(step, axis=1) / dt_steps
        return float(speeds.max()) if speeds.size else 0.0


def evaluate(
    coeffs: SplineCoeffs,
    feature: TrajectoryFeature,
    dt: float = DEFAULT_DT,
    kind: AgentKind = AgentKind.PEDESTRIAN,
    component: int | None = None,
) -> PriorTrajectory:
    """Sample the spline every dt seconds over [0, T], with T itself last."""
    if not dt > 0:
        raise InvalidKnots("dt must be positive")
    t_total = feature.duration_T
    n_full = int(np.floor(t_total / dt + _GRID_EPS))
    times = np.arange(n_full + 1, dtype=float) * dt
    if t_total - times[-1] > _GRID_EPS * max(1.0, t_total):
        times = np.append(times, t_total)
    else:
        times[-1] = t_total
    pts = np.stack([coeffs.evaluate(t) for t in times])
    return PriorTrajectory(
        kind=kind,
        dt=dt,
        grid_times=times,
        points=pts,
        duration_T=t_total,
        source_feature=feature,
        coeffs=coeffs,
        source_component=component,
    )


def prior_from_feature(
    feature: TrajectoryFeature,
    dt: float = DEFAULT_DT,
    kind: AgentKind = AgentKind.PEDESTRIAN,
    component: int | None = None,
) -> PriorTrajectory:
    return evaluate(fit_clamped(feature), feature, dt=dt, kind=kind, component=component)
