"""Evaluation metrics and the scene-based evaluation harness.

Displacement errors follow the root-mean-square convention: ADE is the
square root of the mean squared point-to-point distance over all scored
(agent, step) pairs, FDE the same at the final step over the agents
still present there.
The --mean-l2 style alternative (plain average of distances) is available
through a flag.  Throughput is wall-clock over full refinement cycles,
one cycle being a joint prediction-window rollout for every agent.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .core import AgentKind, Scene, Trajectory, vectorize_trajectory
from .errors import EmptyEval, NoPairs
from .forecaster import ForecastModel, rollout
from .spline import prior_from_feature


def _gather(pred, truth, mask):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise EmptyEval("prediction and truth shapes differ")
    if mask is None:
        mask = np.ones(pred.shape[:-1], dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
    return pred, truth, mask


def ade(pred, truth, mask=None, mean_l2: bool = False) -> float:
    """Average displacement error over all scored steps."""
    pred, truth, mask = _gather(pred, truth, mask)
    if not mask.any():
        raise EmptyEval("no scored steps")
    sq = ((pred - truth) ** 2).sum(axis=-1)[mask]
    if mean_l2:
        return float(np.sqrt(sq).mean())
    return float(np.sqrt(sq.mean()))


def fde(pred, truth, mask=None, mean_l2: bool = False) -> float:
    """Final displacement error at the last step, over agents present there.

    Agents absent at the final step are excluded entirely rather than
    falling back to their last scored step.
    """
    pred, truth, mask = _gather(pred, truth, mask)
    present = np.flatnonzero(mask[:, -1])
    if present.size == 0:
        raise EmptyEval("no agent present at the final step")
    finals = ((pred[present, -1] - truth[present, -1]) ** 2).sum(axis=-1)
    if mean_l2:
        return float(np.sqrt(finals).mean())
    return float(np.sqrt(finals.mean()))


def min_separation(positions: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Smallest pairwise distance between co-present agents over all frames."""
    positions = np.asarray(positions, dtype=float)
    a, length = positions.shape[0], positions.shape[1]
    if mask is None:
        mask = np.ones((a, length), dtype=bool)
    best = np.inf
    for f in range(length):
        idx = np.flatnonzero(mask[:, f])
        if idx.size < 2:
            continue
        pts = positions[idx, f]
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        best = min(best, float(d.min()))
    if not np.isfinite(best):
        raise NoPairs("no frame holds two agents at once")
    return best


def min_separation_trace(records: list[dict]) -> float:
    """Minimum pairwise distance over a recorded simulation trace."""
    best = np.inf
    for rec in records:
        agents = rec.get("agents", [])
        if len(agents) < 2:
            continue
        pts = np.array([[ag["x"], ag["y"]] for ag in agents])
        d = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        best = min(best, float(d.min()))
    if not np.isfinite(best):
        raise NoPairs("trace never holds two agents at once")
    return best


# ---------------------------------------------------------------------------
# scene evaluation protocol

@dataclass
class EvalRow:
    label: str
    l_pd: int
    goal: str
    ade: float
    fde: float
    fps: float
    n_agents: int = 0


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "l_pd", "goal", "ade", "fde", "fps", "n_agents"])
            for r in self.rows:
                w.writerow([r.label, r.l_pd, r.goal, f"{r.ade:.6f}", f"{r.fde:.6f}",
                            f"{r.fps:.2f}", r.n_agents])

    def format_table(self) -> str:
        headers = ["Model", "L_pd", "Goal", "ADE", "FDE", "FPS"]
        body = [
            [r.label, str(r.l_pd), r.goal, f"{r.ade:.3f}", f"{r.fde:.3f}", f"{r.fps:.1f}"]
            for r in self.rows
        ]
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
                  for i, h in enumerate(headers)]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
            "  ".join("-" * widths[i] for i in range(len(headers))),
        ]
        for row in body:
            lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(headers))))
        return "\n".join(lines)


def _scene_eval_setup(scene: Scene, l_ob: int, horizon: int | None):
    """Shared handoff protocol: who is eligible, their histories and truth."""
    length = scene.length
    if l_ob + 1 >= length:
        return None
    h_max = length - l_ob
    h = h_max if horizon is None else min(horizon, h_max)
    eligible = (
        scene.mask[:, l_ob - 1]
        & scene.mask[:, l_ob - 2]
        & scene.mask[:, l_ob : l_ob + h].any(axis=1)
    )
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        return None
    histories = []
    for a in idx:
        present = np.flatnonzero(scene.mask[a, :l_ob])
        histories.append(scene.positions[a, present[0] : l_ob].copy())
    t_last = np.array([scene.agent_local_time(int(a), l_ob - 1) for a in idx])
    truth = scene.positions[idx, l_ob : l_ob + h]
    valid = scene.mask[idx, l_ob : l_ob + h]
    return idx, histories, t_last, truth, valid, h


def evaluate_model(
    model: ForecastModel,
    scenes: list[Scene],
    label: str = "refined",
    horizon: int | None = None,
    mean_l2: bool = False,
) -> EvalRow:
    """Roll the model over every scene from the standard handoff point."""
    l_ob = model.l_ob
    preds_all, truth_all, valid_all = [], [], []
    wall = 0.0
    cycles = 0
    for scene in scenes:
        setup = _scene_eval_setup(scene, l_ob, horizon)
        if setup is None:
            continue
        idx, histories, t_last, truth, valid, h = setup
        kinds = [scene.kinds[int(a)] for a in idx]
        priors = None if scene.priors is None else [scene.priors[int(a)] for a in idx]
        t0 = time.perf_counter()
        pred = rollout(model, histories, kinds, priors, t_last, h)
        wall += time.perf_counter() - t0
        cycles += int(np.ceil(h / model.l_pd))
        preds_all.append(pred)
        truth_all.append(np.where(valid[:, :, None], truth, 0.0))
        valid_all.append(valid)
    if not preds_all:
        raise EmptyEval("no scene produced an eligible agent")
    pred = np.concatenate(_pad(preds_all))
    truth = np.concatenate(_pad(truth_all))
    valid = np.concatenate(_pad_mask(valid_all))
    fps = cycles / wall if wall > 0 else float("inf")
    return EvalRow(
        label=label,
        l_pd=model.l_pd,
        goal=model.supervision,
        ade=ade(pred, truth, valid, mean_l2=mean_l2),
        fde=fde(pred, truth, valid, mean_l2=mean_l2),
        fps=fps,
        n_agents=int(valid.shape[0]),
    )


def _pad(arrays: list[np.ndarray]) -> list[np.ndarray]:
    h = max(a.shape[1] for a in arrays)
    out = []
    for a in arrays:
        if a.shape[1] < h:
            pad = np.zeros((a.shape[0], h - a.shape[1], 2))
            a = np.concatenate([a, pad], axis=1)
        out.append(a)
    return out


def _pad_mask(arrays: list[np.ndarray]) -> list[np.ndarray]:
    h = max(a.shape[1] for a in arrays)
    out = []
    for a in arrays:
        if a.shape[1] < h:
            pad = np.zeros((a.shape[0], h - a.shape[1]), dtype=bool)
            a = np.concatenate([a, pad], axis=1)
        out.append(a)
    return out


def evaluate_constant_velocity(
    scenes: list[Scene],
    l_ob: int = 8,
    l_pd: int = 12,
    dt: float = 0.4,
    label: str = "const-vel",
    horizon: int | None = None,
    mean_l2: bool = False,
) -> EvalRow:
    """Extrapolate each agent's last observed velocity; the reference model."""
    preds_all, truth_all, valid_all = [], [], []
    wall = 0.0
    cycles = 0
    for scene in scenes:
        setup = _scene_eval_setup(scene, l_ob, horizon)
        if setup is None:
            continue
        idx, histories, t_last, truth, valid, h = setup
        t0 = time.perf_counter()
        pred = np.zeros((idx.size, h, 2))
        for i, hist in enumerate(histories):
            vel = (hist[-1] - hist[-2]) / dt if hist.shape[0] >= 2 else np.zeros(2)
            steps = np.arange(1, h + 1)[:, None] * dt
            pred[i] = hist[-1] + steps * vel
        wall += time.perf_counter() - t0
        cycles += int(np.ceil(h / l_pd))
        preds_all.append(pred)
        truth_all.append(np.where(valid[:, :, None], truth, 0.0))
        valid_all.append(valid)
    if not preds_all:
        raise EmptyEval("no scene produced an eligible agent")
    pred = np.concatenate(_pad(preds_all))
    truth = np.concatenate(_pad(truth_all))
    valid = np.concatenate(_pad_mask(valid_all))
    fps = cycles / wall if wall > 0 else float("inf")
    return EvalRow(
        label=label,
        l_pd=l_pd,
        goal="-",
        ade=ade(pred, truth, valid, mean_l2=mean_l2),
        fde=fde(pred, truth, valid, mean_l2=mean_l2),
        fps=fps,
        n_agents=int(valid.shape[0]),
    )


def measure_cycle_rate(
    model: ForecastModel, n_agents: int = 50, n_cycles: int = 20, seed: int = 0
) -> float:
    """Refinement cycles per second for a synthetic crowd of n_agents."""
    rng = np.random.default_rng(seed)
    dt = model.dt
    kind_list = [AgentKind.PEDESTRIAN if i % 2 == 0 else AgentKind.VEHICLE for i in range(n_agents)]
    histories, priors = [], []
    for i in range(n_agents):
        start = rng.uniform(-20, 20, size=2)
        vel = rng.uniform(-2, 2, size=2)
        n = model.l_ob + model.l_pd + 2
        pts = start + np.arange(n)[:, None] * vel * dt
        traj = Trajectory(agent_id=i, kind=kind_list[i], t0=0.0, dt=dt, points=pts)
        feat = vectorize_trajectory(traj)
        priors.append(prior_from_feature(feat, dt=dt, kind=kind_list[i]))
        histories.append(pts[: model.l_ob])
    t_last = np.full(n_agents, (model.l_ob - 1) * dt)
    # warm once so timing excludes first-touch costs
    rollout(model, histories, kind_list, priors, t_last, model.l_pd)
    t0 = time.perf_counter()
    for _ in range(n_cycles):
        rollout(model, histories, kind_list, priors, t_last, model.l_pd)
    wall = time.perf_counter() - t0
    return n_cycles / wall if wall > 0 else float("inf")
