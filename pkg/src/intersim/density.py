"""Time-of-day agent-count model.

Hourly entry counts are treated as weights on a 24 h axis shifted to start
at 08:00 and fitted with a small mixture of Gaussians.  The axis is
circular, so components are evaluated as wrapped Gaussians (replicas one
period away on either side) and the weighted EM assigns mass across those
replicas too; without this a near-uniform day cannot be represented.  An
amplitude maps the unit density to an expected number of concurrently
active agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AgentKind
from .errors import InsufficientData, InvalidInput

PERIOD_HOURS = 24.0
DEFAULT_SHIFT_HOURS = 8.0
DEFAULT_COMPONENTS = {AgentKind.PEDESTRIAN: 4, AgentKind.VEHICLE: 3}

_MIN_STD = 0.25
_MAX_STD = PERIOD_HOURS / 2.0
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _wrapped_density(x, mean, std):
    """Gaussian density on a 24 h circle: sum over the 0 and +/- one-period images."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for k in (-1.0, 0.0, 1.0):
        d = x + k * PERIOD_HOURS - mean
        total += np.exp(-0.5 * (d / std) ** 2) / (std * _SQRT_2PI)
    return total


@dataclass
class TodDensityModel:
    kind: AgentKind
    shift_hours: float
    weights: np.ndarray  # (n,)
    mean_hours: np.ndarray  # (n,), on the shifted axis
    std_hours: np.ndarray  # (n,)
    amplitude: float
    fit_rmse: float = 0.0

    def density(self, t_hours) -> np.ndarray:
        """Mixture density at hours-of-day t (unshifted clock), wrapped mod 24."""
        x = (np.asarray(t_hours, dtype=float) - self.shift_hours) % PERIOD_HOURS
        out = np.zeros_like(x)
        for w, mu, sd in zip(self.weights, self.mean_hours, self.std_hours):
            out += w * _wrapped_density(x, mu, sd)
        return out

    def expected_count(self, t_hours: float) -> int:
        val = self.amplitude * float(self.density(t_hours))
        return max(0, int(np.floor(val + 0.5)))

    def sample_count(self, t_hours: float, rng: np.random.Generator) -> int:
        """Optional Poisson draw around the expected level (off the main path)."""
        lam = self.amplitude * float(self.density(t_hours))
        return int(rng.poisson(max(lam, 0.0)))

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind.value,
            "shift_hours": self.shift_hours,
            "components": [
                {"w": float(w), "mean": float(m), "std": float(s)}
                for w, m, s in zip(self.weights, self.mean_hours, self.std_hours)
            ],
            "amplitude": float(self.amplitude),
            "fit_rmse": float(self.fit_rmse),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TodDensityModel":
        comps = data["components"]
        return cls(
            kind=AgentKind.from_str(data["kind"]),
            shift_hours=float(data["shift_hours"]),
            weights=np.asarray([c["w"] for c in comps], dtype=float),
            mean_hours=np.asarray([c["mean"] for c in comps], dtype=float),
            std_hours=np.asarray([c["std"] for c in comps], dtype=float),
            amplitude=float(data["amplitude"]),
            fit_rmse=float(data.get("fit_rmse", 0.0)),
        )

    @classmethod
    def constant(cls, kind: AgentKind, level: float) -> "TodDensityModel":
        """Flat profile whose expected count is `level` at every hour (test and demo helper)."""
        model = cls(
            kind=kind,
            shift_hours=DEFAULT_SHIFT_HOURS,
            weights=np.array([1.0]),
            mean_hours=np.array([PERIOD_HOURS / 2.0]),
            std_hours=np.array([_MAX_STD]),
            amplitude=1.0,
        )
        peak = float(model.density(model.shift_hours + PERIOD_HOURS / 2.0))
        # wrapped sigma=12 density is flat to ~3%; normalize at the midpoint
        model.amplitude = level / peak
        return model


def fit_tod(
    hourly_counts,
    kind: AgentKind,
    n_components: int | None = None,
    shift_hours: float = DEFAULT_SHIFT_HOURS,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-10,
) -> TodDensityModel:
    """Fit the hourly profile with a weighted mixture of wrapped Gaussians.

    Hour h contributes the value (h - shift) mod 24 with weight counts[h].
    The amplitude is the least-squares scale matching density to counts.
    """
    counts = np.asarray(hourly_counts, dtype=float)
    if counts.shape != (24,):
        raise InvalidInput("hourly_counts must have exactly 24 entries")
    if (counts < 0).any() or not np.isfinite(counts).all():
        raise InvalidInput("counts must be finite and non-negative")
    if counts.sum() <= 0:
        raise InsufficientData("all hourly counts are zero")
    if n_components is None:
        n_components = DEFAULT_COMPONENTS[kind]
    if n_components < 1 or n_components > 24:
        raise InvalidInput("component count out of range")

    x = (np.arange(24.0) - shift_hours) % PERIOD_HOURS
    w_data = counts / counts.sum()

    weights, means, stds = _weighted_wrapped_em(
        x, w_data, n_components, max_iter=max_iter, tol=tol
    )

    model = TodDensityModel(
        kind=kind,
        shift_hours=shift_hours,
        weights=weights,
        mean_hours=means,
        std_hours=stds,
        amplitude=1.0,
    )
    dens = model.density(np.arange(24.0))
    denom = float(dens @ dens)
    model.amplitude = float(dens @ counts) / denom if denom > 0 else 0.0
    model.fit_rmse = float(np.sqrt(np.mean((model.amplitude * dens - counts) ** 2)))
    return model


def _weighted_wrapped_em(x, w_data, n, max_iter, tol):
    # Deterministic init at weighted quantiles, one period-spanning std.
    order = np.argsort(x)
    cum = np.cumsum(w_data[order])
    targets = (2 * np.arange(n) + 1) / (2 * n)
    means = np.array([x[order[np.searchsorted(cum, q)]] for q in targets], dtype=float)
    stds = np.full(n, 4.0)
    weights = np.full(n, 1.0 / n)

    offsets = np.array([-PERIOD_HOURS, 0.0, PERIOD_HOURS])
    xr = x[None, :, None] + offsets[None, None, :]  # (1, 24, 3) replic. positions

    prev = -np.inf
    for _ in range(max_iter):
        # responsibilities over (component, replica)
        d = xr - means[:, None, None]
        log_phi = -0.5 * (d / stds[:, None, None]) ** 2 - np.log(stds[:, None, None] * _SQRT_2PI)
        log_num = np.log(weights[:, None, None]) + log_phi  # (n, 24, 3)
        m = log_num.max(axis=(0, 2), keepdims=True)
        norm = m[0, :, 0] + np.log(np.exp(log_num - m).sum(axis=(0, 2)))
        resp = np.exp(log_num - norm[None, :, None]) * w_data[None, :, None]

        nk = resp.sum(axis=(1, 2))
        nk = np.maximum(nk, 1e-300)
        weights = nk / nk.sum()
        means = (resp * xr).sum(axis=(1, 2)) / nk
        var = (resp * (xr - means[:, None, None]) ** 2).sum(axis=(1, 2)) / nk
        stds = np.clip(np.sqrt(np.maximum(var, 0.0)), _MIN_STD, _MAX_STD)
        means = means % PERIOD_HOURS

        ll = float((w_data * norm).sum())
        if np.isfinite(prev) and abs(ll - prev) < tol:
            break
        prev = ll

    order = np.argsort(means)
    return weights[order], means[order], stds[order]
