"""Full-covariance Gaussian mixtures over trajectory feature space.

Fitting runs EM on standardized features with farthest-point seeding and a
small diagonal regularizer on every covariance update.  Sampling supports
restriction to a component subset with renormalized weights, which is how
steering commands bias where new agents enter and exit.  Likelihood
z-scores over a corpus surface outlier trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AgentKind
from .errors import (
    ComponentCollapse,
    DegenerateLikelihoods,
    InsufficientData,
    InvalidCondition,
    InvalidInput,
)

DEFAULT_COMPONENTS = 12
_COLLAPSE_WEIGHT = 1e-8
_MAX_COLLAPSE_RESTARTS = 5
_N_INIT_RESTARTS = 3


def _as_matrix(features) -> np.ndarray:
    """Accept a list of TrajectoryFeature or a plain (N, D) array."""
    if isinstance(features, np.ndarray):
        mat = np.asarray(features, dtype=float)
    else:
        rows = [
            f.flatten() if hasattr(f, "flatten") else np.asarray(f, dtype=float)
            for f in features
        ]
        mat = np.asarray(rows, dtype=float)
    if mat.ndim != 2:
        raise InvalidInput("features must form an (N, D) matrix")
    if not np.isfinite(mat).all():
        raise InvalidInput("features contain non-finite entries")
    return mat


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def inverse(self, u: np.ndarray) -> np.ndarray:
        return u * self.scale + self.mean

    @property
    def log_jacobian(self) -> float:
        # log |du/dz| applied when mapping densities back to raw units
        return float(-np.sum(np.log(self.scale)))


@dataclass
class GmmModel:
    """Fitted mixture: weights, means and full covariances in standardized space."""

    kind: AgentKind
    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, D)
    covariances: np.ndarray  # (M, D, D)
    standardizer: Standardizer

    def __post_init__(self):
        self._refresh_factors()

    def _refresh_factors(self):
        self._chol = np.stack([np.linalg.cholesky(c) for c in self.covariances])
        self._log_det = np.array([2.0 * np.log(np.diag(L)).sum() for L in self._chol])

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def component_log_density(self, u: np.ndarray) -> np.ndarray:
        """Per-component Gaussian log densities of standardized rows u (N, D) -> (N, M)."""
        u = np.atleast_2d(u)
        n, d = u.shape
        out = np.empty((n, self.m))
        const = d * np.log(2.0 * np.pi)
        for j in range(self.m):
            diff = u - self.means[j]
            y = np.linalg.solve(self._chol[j], diff.T)
            out[:, j] = -0.5 * (const + self._log_det[j] + np.sum(y * y, axis=0))
        return out

    def log_pdf(self, z: np.ndarray) -> float:
        return float(self.log_pdf_many(np.atleast_2d(np.asarray(z, dtype=float))[0:1])[0])

    def log_pdf_many(self, z: np.ndarray) -> np.ndarray:
        """Mixture log density of raw-unit feature rows, log-sum-exp stabilized."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != self.d:
            raise InvalidInput(f"feature dimension {z.shape[1]} != model dimension {self.d}")
        if not np.isfinite(z).all():
            raise InvalidInput("non-finite feature")
        u = self.standardizer.forward(z)
        comp = self.component_log_density(u) + np.log(self.weights)
        hi = comp.max(axis=1, keepdims=True)
        ll = hi[:, 0] + np.log(np.exp(comp - hi).sum(axis=1))
        return ll + self.standardizer.log_jacobian

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw n feature vectors; returns (features (n, D), component index per draw)."""
        return self.sample_conditional(list(range(self.m)), n, rng)

    def sample_conditional(
        self, components, n: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Draw from the mixture restricted to `components`, weights renormalized."""
        comp = validate_component_set(components, self.m)
        w = self.weights[comp]
        w = w / w.sum()
        picks = rng.choice(len(comp), size=n, p=w)
        idx = comp[picks]
        u = rng.standard_normal((n, self.d))
        out = np.empty((n, self.d))
        for row in range(n):
            j = idx[row]
            out[row] = self.means[j] + self._chol[j] @ u[row]
        return self.standardizer.inverse(out), idx

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind.value,
            "d": self.d,
            "m": self.m,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": [c.reshape(-1).tolist() for c in self.covariances],
            "standardizer": {
                "mean": self.standardizer.mean.tolist(),
                "scale": self.standardizer.scale.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GmmModel":
        d = int(data["d"])
        return cls(
            kind=AgentKind.from_str(data["kind"]),
            weights=np.asarray(data["weights"], dtype=float),
            means=np.asarray(data["means"], dtype=float),
            covariances=np.stack(
                [np.asarray(c, dtype=float).reshape(d, d) for c in data["covariances"]]
            ),
            standardizer=Standardizer(
                mean=np.asarray(data["standardizer"]["mean"], dtype=float),
                scale=np.asarray(data["standardizer"]["scale"], dtype=float),
            ),
        )


def validate_component_set(components, m: int) -> np.ndarray:
    comp = np.asarray(sorted(set(int(c) for c in components)), dtype=int)
    if comp.size == 0:
        raise InvalidCondition("component set is empty")
    if comp.min() < 0 or comp.max() >= m:
        raise InvalidCondition(f"component index out of range for M={m}")
    return comp


def _farthest_point_means(u: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    first = int(rng.integers(u.shape[0]))
    centers = [u[first]]
    d2 = np.sum((u - centers[0]) ** 2, axis=1)
    for _ in range(1, m):
        nxt = int(np.argmax(d2))
        centers.append(u[nxt])
        d2 = np.minimum(d2, np.sum((u - centers[-1]) ** 2, axis=1))
    return np.stack(centers)


def fit_em(
    features,
    m: int,
    seed: int,
    kind: AgentKind = AgentKind.PEDESTRIAN,
    max_iter: int = 200,
    tol: float = 1e-6,
    reg: float = 1e-6,
) -> GmmModel:
    """Fit an m-component mixture by EM.

    Features are standardized per dimension first.  Means start from
    farthest-point seeding; three seeded restarts are run and the fit with
    the best total log-likelihood wins.  Every covariance update adds
    reg * I.  A component whose weight collapses below 1e-8 is restarted
    from the worst-fit sample, at most 5 times per run.
    """
    x = _as_matrix(features)
    n, d = x.shape
    if n < 10 * m:
        raise InsufficientData(f"need at least {10 * m} samples for M={m}, got {n}")
    std = Standardizer.fit(x)
    u = std.forward(x)

    master = np.random.default_rng(seed)
    best = None
    for _ in range(_N_INIT_RESTARTS):
        rng = np.random.default_rng(master.integers(2**63))
        params, total_ll = _run_em(u, m, rng, max_iter=max_iter, tol=tol, reg=reg)
        if best is None or total_ll > best[1]:
            best = (params, total_ll)
    weights, means, covs = best[0]
    return GmmModel(kind=kind, weights=weights, means=means, covariances=covs, standardizer=std)


def _run_em(u, m, rng, max_iter, tol, reg):
    n, d = u.shape
    means = _farthest_point_means(u, m, rng)
    covs = np.tile(np.eye(d), (m, 1, 1))
    weights = np.full(m, 1.0 / m)
    model_stub = GmmModel(
        kind=AgentKind.PEDESTRIAN,
        weights=weights,
        means=means,
        covariances=covs,
        standardizer=Standardizer(mean=np.zeros(d), scale=np.ones(d)),
    )

    prev_ll = -np.inf
    total_ll = -np.inf
    restarts = 0
    for _ in range(max_iter):
        comp = model_stub.component_log_density(u) + np.log(model_stub.weights)
        hi = comp.max(axis=1, keepdims=True)
        log_norm = hi[:, 0] + np.log(np.exp(comp - hi).sum(axis=1))
        total_ll = float(log_norm.sum())
        resp = np.exp(comp - log_norm[:, None])

        nk = resp.sum(axis=0)
        collapsed = np.flatnonzero(nk / n < _COLLAPSE_WEIGHT)
        if collapsed.size:
            restarts += len(collapsed)
            if restarts > _MAX_COLLAPSE_RESTARTS:
                raise ComponentCollapse(
                    f"{len(collapsed)} component(s) kept collapsing after {restarts} restarts"
                )
            worst_order = np.argsort(log_norm)
            for pos, j in enumerate(collapsed):
                model_stub.means[j] = u[worst_order[pos]]
                model_stub.covariances[j] = np.eye(d)
                model_stub.weights[j] = 1.0 / m
            model_stub.weights /= model_stub.weights.sum()
            model_stub._refresh_factors()
            prev_ll = -np.inf
            continue

        weights = nk / n
        means = (resp.T @ u) / nk[:, None]
        covs = np.empty((m, d, d))
        for j in range(m):
            diff = u - means[j]
            covs[j] = (resp[:, j][:, None] * diff).T @ diff / nk[j] + reg * np.eye(d)
        model_stub.weights = weights
        model_stub.means = means
        model_stub.covariances = covs
        model_stub._refresh_factors()

        if (total_ll - prev_ll) / n < tol and np.isfinite(prev_ll):
            break
        prev_ll = total_ll

    comp = model_stub.component_log_density(u) + np.log(model_stub.weights)
    hi = comp.max(axis=1, keepdims=True)
    total_ll = float((hi[:, 0] + np.log(np.exp(comp - hi).sum(axis=1))).sum())
    return (model_stub.weights, model_stub.means, model_stub.covariances), total_ll


def zscore_outliers(
    model: GmmModel, features, threshold: float = 20.0
) -> list[tuple[int, float]]:
    """Indices whose log-likelihood sits more than `threshold` standard
    deviations from the corpus mean, strongest first."""
    x = _as_matrix(features)
    if x.shape[0] < 2:
        raise InvalidInput("need at least 2 features for outlier scoring")
    ll = model.log_pdf_many(x)
    mean = ll.mean()
    sd = ll.std()
    if sd == 0.0:
        raise DegenerateLikelihoods("all log-likelihoods identical")
    z = (ll - mean) / sd
    hits = [(int(i), float(z[i])) for i in np.flatnonzero(np.abs(z) > threshold)]
    hits.sort(key=lambda p: -abs(p[1]))
    return hits
