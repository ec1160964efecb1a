"""Goal-supervised recurrent trajectory refinement.

One shared network refines all agents: each step embeds (displacement,
goal offset, neighbor occupancy grid, kind flag), updates a gated
recurrent state per agent, and decodes the next 2-D displacement.  All
inputs are relative quantities, which makes predictions translation
equivariant.  Training uses teacher forcing with smooth-L1 loss and exact
hand-derived backpropagation through time; inference is autoregressive
and chains fixed-horizon prediction cycles for longer horizons.

Supervision modes for the goal input:
  "none"         zero goal offset
  "destination"  offset to the prior's final position x(T)
  "waypoint"     offset to the prior one prediction window ahead (rolling,
                 clamped at the destination)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AgentKind, Scene
from .errors import EmptyBatch, InvalidInput, MissingHistory, NumericalFault

SUPERVISION_MODES = ("none", "destination", "waypoint")

DEFAULT_EMBED = 32
DEFAULT_HIDDEN = 32
DEFAULT_GRID = 6
DEFAULT_CELL = 1.0
DEFAULT_L_OB = 8
DEFAULT_L_PD = 12
DEFAULT_DT = 0.4

_PARAM_SHAPES = (
    ("We", lambda e, h, f: (e, f)),
    ("be", lambda e, h, f: (e,)),
    ("Wz", lambda e, h, f: (h, e)),
    ("Uz", lambda e, h, f: (h, h)),
    ("bz", lambda e, h, f: (h,)),
    ("Wr", lambda e, h, f: (h, e)),
    ("Ur", lambda e, h, f: (h, h)),
    ("br", lambda e, h, f: (h,)),
    ("Wc", lambda e, h, f: (h, e)),
    ("Uc", lambda e, h, f: (h, h)),
    ("bc", lambda e, h, f: (h,)),
    ("Wd", lambda e, h, f: (2, h)),
    ("bd", lambda e, h, f: (2,)),
)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ForecastModel:
    embed_dim: int
    hidden_dim: int
    grid_g: int
    grid_cell: float
    l_ob: int
    l_pd: int
    dt: float
    supervision: str
    params: dict[str, np.ndarray]
    input_mean: np.ndarray
    input_scale: np.ndarray

    @property
    def input_dim(self) -> int:
        return 5 + self.grid_g * self.grid_g  # disp(2) + goal(2) + occupancy + kind

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[name].reshape(-1) for name, _ in _PARAM_SHAPES])

    def set_flat_params(self, vec: np.ndarray) -> None:
        off = 0
        for name, shape_fn in _PARAM_SHAPES:
            shape = shape_fn(self.embed_dim, self.hidden_dim, self.input_dim)
            size = int(np.prod(shape))
            self.params[name] = vec[off : off + size].reshape(shape).copy()
            off += size

    def standardize(self, u: np.ndarray) -> np.ndarray:
        return (u - self.input_mean) / self.input_scale

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "hyper": {
                "embed_dim": self.embed_dim,
                "hidden_dim": self.hidden_dim,
                "grid_g": self.grid_g,
                "grid_cell": self.grid_cell,
                "l_ob": self.l_ob,
                "l_pd": self.l_pd,
                "dt": self.dt,
            },
            "supervision": self.supervision,
            "input_mean": self.input_mean.tolist(),
            "input_scale": self.input_scale.tolist(),
            "params": {name: self.params[name].reshape(-1).tolist() for name, _ in _PARAM_SHAPES},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForecastModel":
        hy = data["hyper"]
        model = init_model(
            seed=0,
            embed_dim=int(hy["embed_dim"]),
            hidden_dim=int(hy["hidden_dim"]),
            grid_g=int(hy["grid_g"]),
            grid_cell=float(hy["grid_cell"]),
            l_ob=int(hy["l_ob"]),
            l_pd=int(hy["l_pd"]),
            dt=float(hy["dt"]),
            supervision=data["supervision"],
        )
        for name, shape_fn in _PARAM_SHAPES:
            shape = shape_fn(model.embed_dim, model.hidden_dim, model.input_dim)
            model.params[name] = np.asarray(data["params"][name], dtype=float).reshape(shape)
        model.input_mean = np.asarray(data["input_mean"], dtype=float)
        model.input_scale = np.asarray(data["input_scale"], dtype=float)
        return model


def init_model(
    seed: int,
    embed_dim: int = DEFAULT_EMBED,
    hidden_dim: int = DEFAULT_HIDDEN,
    grid_g: int = DEFAULT_GRID,
    grid_cell: float = DEFAULT_CELL,
    l_ob: int = DEFAULT_L_OB,
    l_pd: int = DEFAULT_L_PD,
    dt: float = DEFAULT_DT,
    supervision: str = "waypoint",
    zero: bool = False,
) -> ForecastModel:
    """Seeded uniform init, fan-in scaled; biases start at zero."""
    if supervision not in SUPERVISION_MODES:
        raise InvalidInput(f"unknown supervision mode {supervision!r}")
    f = 5 + grid_g * grid_g
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape_fn in _PARAM_SHAPES:
        shape = shape_fn(embed_dim, hidden_dim, f)
        if zero or len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[1])
            params[name] = rng.uniform(-bound, bound, size=shape)
    return ForecastModel(
        embed_dim=embed_dim,
        hidden_dim=hidden_dim,
        grid_g=grid_g,
        grid_cell=grid_cell,
        l_ob=l_ob,
        l_pd=l_pd,
        dt=dt,
        supervision=supervision,
        params=params,
        input_mean=np.zeros(f),
        input_scale=np.ones(f),
    )


# ---------------------------------------------------------------------------
# social grid pooling

def pool_neighbors(
    positions: np.ndarray,
    self_index: int,
    grid_g: int = DEFAULT_GRID,
    grid_cell: float = DEFAULT_CELL,
) -> np.ndarray:
    """Count neighbors in a grid_g x grid_g window centered on one agent.

    Cells are axis aligned, grid_cell meters wide, indexed from the
    window's minimum corner as [x_bin, y_bin].  The agent itself is
    excluded; neighbors outside the window are ignored.
    """
    positions = np.asarray(positions, dtype=float)
    grid = np.zeros((grid_g, grid_g))
    if positions.shape[0] <= 1:
        return grid
    offsets = np.delete(positions, self_index, axis=0) - positions[self_index]
    half = grid_g * grid_cell / 2.0
    bins = np.floor((offsets + half) / grid_cell).astype(int)
    ok = (bins >= 0).all(axis=1) & (bins < grid_g).all(axis=1)
    for bx, by in bins[ok]:
        grid[bx, by] += 1.0
    return grid


def pool_all(positions: np.ndarray, grid_g: int, grid_cell: float) -> np.ndarray:
    """Occupancy grids for every agent at once, (A, G, G)."""
    a = positions.shape[0]
    grids = np.zeros((a, grid_g, grid_g))
    if a <= 1:
        return grids
    offsets = positions[None, :, :] - positions[:, None, :]  # offsets[i, j] = pos_j - pos_i
    half = grid_g * grid_cell / 2.0
    bins = np.floor((offsets + half) / grid_cell).astype(int)
    ok = (bins >= 0).all(axis=2) & (bins < grid_g).all(axis=2)
    np.fill_diagonal(ok, False)
    ii, jj = np.nonzero(ok)
    np.add.at(grids, (ii, bins[ii, jj, 0], bins[ii, jj, 1]), 1.0)
    return grids


def assemble_input(
    displacement: np.ndarray,
    goal_offset: np.ndarray,
    occupancy: np.ndarray,
    kind_flag: np.ndarray,
) -> np.ndarray:
    """Stack per-agent step features into the raw (A, F) input matrix."""
    a = displacement.shape[0]
    return np.concatenate(
        [
            displacement.reshape(a, 2),
            goal_offset.reshape(a, 2),
            occupancy.reshape(a, -1),
            kind_flag.reshape(a, 1).astype(float),
        ],
        axis=1,
    )


def kind_flags(kinds) -> np.ndarray:
    return np.array([1.0 if k == AgentKind.VEHICLE else 0.0 for k in kinds])


# ---------------------------------------------------------------------------
# single-step forward (public) and the internal cached version

def forward_step(
    model: ForecastModel, state_h: np.ndarray, raw_input: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Advance the recurrent state one step; returns (new state, displacement)."""
    u = model.standardize(np.atleast_2d(raw_input))
    h = np.atleast_2d(state_h)
    if h.shape[1] != model.hidden_dim:
        raise InvalidInput("state dimension mismatch")
    cache = _step_forward(model.params, u, h)
    for key, layer in (("x_e", "embedding"), ("h_new", "recurrent"), ("d", "decoder")):
        if not np.isfinite(cache[key]).all():
            raise NumericalFault(layer)
    return cache["h_new"], cache["d"]


def _step_forward(p, u, h):
    e_pre = u @ p["We"].T + p["be"]
    x_e = np.tanh(e_pre)
    z = _sigmoid(x_e @ p["Wz"].T + h @ p["Uz"].T + p["bz"])
    r = _sigmoid(x_e @ p["Wr"].T + h @ p["Ur"].T + p["br"])
    rh = r * h
    c = np.tanh(x_e @ p["Wc"].T + rh @ p["Uc"].T + p["bc"])
    h_new = (1.0 - z) * h + z * c
    d = h_new @ p["Wd"].T + p["bd"]
    return {"u": u, "h": h, "x_e": x_e, "z": z, "r": r, "rh": rh, "c": c, "h_new": h_new, "d": d}


def _step_backward(p, cache, dh_new, dd, grads):
    """Backprop one recurrent step; returns gradient w.r.t. the incoming state."""
    h, x_e, z, r, rh, c, h_new = (
        cache["h"], cache["x_e"], cache["z"], cache["r"], cache["rh"], cache["c"], cache["h_new"],
    )
    if dd is not None:
        grads["Wd"] += dd.T @ h_new
        grads["bd"] += dd.sum(axis=0)
        dh_new = dh_new + dd @ p["Wd"]

    dz = dh_new * (c - h)
    dc = dh_new * z
    dh = dh_new * (1.0 - z)

    dc_pre = dc * (1.0 - c * c)
    grads["Wc"] += dc_pre.T @ x_e
    grads["Uc"] += dc_pre.T @ rh
    grads["bc"] += dc_pre.sum(axis=0)
    drh = dc_pre @ p["Uc"]
    dh += drh * r
    dr = drh * h

    dr_pre = dr * r * (1.0 - r)
    grads["Wr"] += dr_pre.T @ x_e
    grads["Ur"] += dr_pre.T @ h
    grads["br"] += dr_pre.sum(axis=0)
    dh += dr_pre @ p["Ur"]

    dz_pre = dz * z * (1.0 - z)
    grads["Wz"] += dz_pre.T @ x_e
    grads["Uz"] += dz_pre.T @ h
    grads["bz"] += dz_pre.sum(axis=0)
    dh += dz_pre @ p["Uz"]

    dx_e = dc_pre @ p["Wc"] + dr_pre @ p["Wr"] + dz_pre @ p["Wz"]
    de_pre = dx_e * (1.0 - x_e * x_e)
    grads["We"] += de_pre.T @ cache["u"]
    grads["be"] += de_pre.sum(axis=0)
    return dh


# ---------------------------------------------------------------------------
# smooth-L1 loss

def loss_smooth_l1(pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean Huber(delta=1) over present (agent, step, coordinate) entries."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise InvalidInput("prediction/target shape mismatch")
    d = pred - target
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        d = d[mask]
    d = d.reshape(-1)
    if d.size == 0:
        raise EmptyBatch("no present entries to score")
    small = np.abs(d) <= 1.0
    vals = np.where(small, 0.5 * d * d, np.abs(d) - 0.5)
    return float(vals.mean())


def _huber_grad(d):
    return np.where(np.abs(d) <= 1.0, d, np.sign(d))


# ---------------------------------------------------------------------------
# teacher-forced training pipeline

@dataclass
class TrainItem:
    """Precomputed teacher-forced inputs for one scene.

    With teacher forcing every input is parameter independent, so a scene
    reduces to raw input tensors, masks and target displacements once.
    """

    inputs: np.ndarray  # (A, S, F) raw, S = scene length - 1
    update_mask: np.ndarray  # (A, S) recurrent state advances
    loss_mask: np.ndarray  # (A, S) prediction scored
    target_disp: np.ndarray  # (A, S, 2)

    @property
    def n_agents(self) -> int:
        return self.inputs.shape[0]


def goal_target(prior, t_local: float, mode: str, l_pd: int) -> np.ndarray:
    if mode == "none" or prior is None:
        return None
    if mode == "destination":
        return prior.destination
    return prior.goal_waypoint(t_local, l_pd)


def prepare_scene(scene: Scene, model: ForecastModel, mode: str | None = None) -> TrainItem:
    """Teacher-forced step inputs for one scene under a supervision mode."""
    mode = model.supervision if mode is None else mode
    if mode not in SUPERVISION_MODES:
        raise InvalidInput(f"unknown supervision mode {mode!r}")
    if mode != "none" and scene.priors is None:
        raise MissingHistory("scene carries no priors but goal supervision was requested")
    a, length = scene.mask.shape
    s_steps = length - 1
    f = model.input_dim
    flags = kind_flags(scene.kinds)

    inputs = np.zeros((a, s_steps, f))
    update_mask = np.zeros((a, s_steps), dtype=bool)
    loss_mask = np.zeros((a, s_steps), dtype=bool)
    target = np.zeros((a, s_steps, 2))

    for s in range(1, length):
        present = scene.mask[:, s] & scene.mask[:, s - 1]
        if not present.any():
            continue
        pos_now = scene.positions[:, s]
        occ_agents = np.flatnonzero(scene.mask[:, s])
        occ = np.zeros((a, model.grid_g, model.grid_g))
        occ[occ_agents] = pool_all(pos_now[occ_agents], model.grid_g, model.grid_cell)
        disp = np.zeros((a, 2))
        disp[present] = pos_now[present] - scene.positions[present, s - 1]
        goal = np.zeros((a, 2))
        if mode != "none":
            for i in np.flatnonzero(present):
                tgt = goal_target(scene.priors[i], scene.agent_local_time(i, s), mode, model.l_pd)
                goal[i] = tgt - pos_now[i]
        inputs[:, s - 1] = assemble_input(disp, goal, occ, flags)
        update_mask[:, s - 1] = present
        if s + 1 < length:
            scored = present & scene.mask[:, s + 1] & (s + 1 >= model.l_ob)
            loss_mask[:, s - 1] = scored
            target[scored, s - 1] = scene.positions[scored, s + 1] - pos_now[scored]
    return TrainItem(inputs=inputs, update_mask=update_mask, loss_mask=loss_mask, target_disp=target)


def fit_input_stats(model: ForecastModel, items: list[TrainItem]) -> None:
    """Per-dimension standardization of step inputs, estimated over valid steps."""
    rows = [it.inputs[it.update_mask] for it in items if it.update_mask.any()]
    if not rows:
        raise EmptyBatch("no valid steps to estimate input statistics")
    allrows = np.concatenate(rows, axis=0)
    model.input_mean = allrows.mean(axis=0)
    scale = allrows.std(axis=0)
    model.input_scale = np.where(scale < 1e-8, 1.0, scale)


def _batch_forward_backward(model: ForecastModel, items: list[TrainItem], want_grad: bool = True):
    """Loss (mean of per-scene means) and parameter gradients over a batch."""
    p = model.params
    a_sizes = [it.n_agents for it in items]
    a_total = sum(a_sizes)
    s_max = max(it.inputs.shape[1] for it in items)
    f = model.input_dim

    u = np.zeros((a_total, s_max, f))
    upd = np.zeros((a_total, s_max), dtype=bool)
    lm = np.zeros((a_total, s_max), dtype=bool)
    tgt = np.zeros((a_total, s_max, 2))
    scene_of = np.zeros(a_total, dtype=int)
    off = 0
    for idx, it in enumerate(items):
        s_i = it.inputs.shape[1]
        u[off : off + it.n_agents, :s_i] = model.standardize(it.inputs)
        upd[off : off + it.n_agents, :s_i] = it.update_mask
        lm[off : off + it.n_agents, :s_i] = it.loss_mask
        tgt[off : off + it.n_agents, :s_i] = it.target_disp
        scene_of[off : off + it.n_agents] = idx
        off += it.n_agents

    n_scenes = len(items)
    entries = np.zeros(n_scenes)
    np.add.at(entries, scene_of, 2.0 * lm.sum(axis=1))
    if entries.sum() == 0:
        raise EmptyBatch("batch has no scored prediction steps")
    # weight of each scored coordinate: mean within scene, mean over scenes
    safe_entries = np.where(entries > 0, entries, 1.0)
    w_agent = 1.0 / (n_scenes * safe_entries[scene_of])

    h = np.zeros((a_total, model.hidden_dim))
    caches = []
    scene_loss = np.zeros(n_scenes)
    resid_steps = []
    for s in range(s_max):
        cache = _step_forward(p, u[:, s], h)
        m = upd[:, s][:, None]
        h = np.where(m, cache["h_new"], h)
        cache["mask"] = upd[:, s]
        caches.append(cache)
        scored = lm[:, s]
        if scored.any():
            resid = np.where(scored[:, None], cache["d"] - tgt[:, s], 0.0)
            resid_steps.append((s, resid))
        else:
            resid_steps.append((s, None))

    for s, resid in resid_steps:
        if resid is None:
            continue
        scored = lm[:, s]
        rr = resid[scored]
        hub = np.where(np.abs(rr) <= 1.0, 0.5 * rr * rr, np.abs(rr) - 0.5).sum(axis=1)
        np.add.at(scene_loss, scene_of[scored], hub)
    per_scene = np.where(entries > 0, scene_loss / safe_entries, 0.0)
    loss = float(per_scene.mean())

    if not want_grad:
        return loss, None, per_scene

    grads = {name: np.zeros_like(arr) for name, arr in p.items()}
    dh = np.zeros_like(h)
    for s in range(s_max - 1, -1, -1):
        cache = caches[s]
        resid = resid_steps[s][1]
        dd = None
        if resid is not None:
            dd = _huber_grad(resid) * w_agent[:, None]
            dd[~lm[:, s]] = 0.0
        m = cache["mask"][:, None]
        dh_gate = np.where(m, dh, 0.0)
        dh_pass = np.where(m, 0.0, dh)
        if dd is not None or dh_gate.any():
            dh_prev = _step_backward(p, cache, dh_gate, dd, grads)
        else:
            dh_prev = np.zeros_like(dh)
        dh = dh_prev * cache["mask"][:, None] + dh_pass
    return loss, grads, per_scene


@dataclass
class TrainOptions:
    lr: float = 1e-2
    momentum: float = 0.9
    clip_norm: float = 5.0
    batch_size: int = 16
    seed: int = 0


@dataclass
class Trainer:
    """SGD with momentum over precomputed teacher-forced scene items.

    Batch order is drawn from one generator seeded at construction, so a
    full training run is reproducible from (model seed, trainer seed).
    """

    model: ForecastModel
    opts: TrainOptions = field(default_factory=TrainOptions)

    def __post_init__(self) -> None:
        self._rng = np.random.default_rng(self.opts.seed)
        self._velocity = {k: np.zeros_like(v) for k, v in self.model.params.items()}
        self.epoch = 0

    def train_epoch(self, items: list[TrainItem]) -> float:
        if not items:
            raise EmptyBatch("no scenes to train on")
        order = self._rng.permutation(len(items))
        total = 0.0
        n_batches = 0
        for start in range(0, len(order), self.opts.batch_size):
            batch_idx = order[start : start + self.opts.batch_size]
            batch = [items[i] for i in batch_idx]
            loss, grads, per_scene = _batch_forward_backward(self.model, batch)
            if not np.isfinite(loss):
                bad = batch_idx[int(np.flatnonzero(~np.isfinite(per_scene))[0])]
                raise NumericalFault("training", f"non-finite loss at scene index {bad}")
            self._apply(grads)
            total += loss
            n_batches += 1
        self.epoch += 1
        return total / n_batches

    def _apply(self, grads: dict[str, np.ndarray]) -> None:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > self.opts.clip_norm:
            scale = self.opts.clip_norm / norm
            grads = {k: g * scale for k, g in grads.items()}
        for k in self.model.params:
            self._velocity[k] = self.opts.momentum * self._velocity[k] - self.opts.lr * grads[k]
            self.model.params[k] = self.model.params[k] + self._velocity[k]


def batch_loss(model: ForecastModel, items: list[TrainItem]) -> float:
    loss, _, _ = _batch_forward_backward(model, items, want_grad=False)
    return loss


def train(
    model: ForecastModel,
    scenes: list[Scene],
    epochs: int,
    opts: TrainOptions | None = None,
    log: list[tuple[int, float]] | None = None,
) -> Trainer:
    """Standardize inputs, precompute scene items, run the epoch loop."""
    opts = opts or TrainOptions()
    items = [prepare_scene(sc, model) for sc in scenes]
    fit_input_stats(model, items)  # items hold raw inputs; stats applied at batch time
    trainer = Trainer(model, opts)
    for _ in range(epochs):
        loss = trainer.train_epoch(items)
        if log is not None:
            log.append((trainer.epoch, loss))
    return trainer


def gradient_check(
    model: ForecastModel, scene: Scene, epsilon: float = 1e-5, n_directions: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks every coordinate by default; pass n_directions to probe a
    seeded random subset for speed.
    """
    item = prepare_scene(scene, model)
    _, grads, _ = _batch_forward_backward(model, [item])
    flat_grad = np.concatenate([grads[name].reshape(-1) for name, _ in _PARAM_SHAPES])
    theta = model.flat_params()
    idxs = np.arange(theta.size)
    if n_directions is not None and n_directions < theta.size:
        idxs = np.random.default_rng(seed).choice(theta.size, size=n_directions, replace=False)
    worst = 0.0
    for i in idxs:
        bump = np.zeros_like(theta)
        bump[i] = epsilon
        model.set_flat_params(theta + bump)
        lp = batch_loss(model, [item])
        model.set_flat_params(theta - bump)
        lm = batch_loss(model, [item])
        fd = (lp - lm) / (2.0 * epsilon)
        # the floor keeps finite-difference noise on near-zero coordinates
        # from registering as relative error
        denom = max(abs(fd), abs(flat_grad[i]), 1e-5)
        worst = max(worst, abs(fd - flat_grad[i]) / denom)
    model.set_flat_params(theta)
    return worst


# ---------------------------------------------------------------------------
# autoregressive rollout

def rollout(
    model: ForecastModel,
    histories: list[np.ndarray],
    kinds: list[AgentKind],
    priors: list | None,
    t_last: np.ndarray,
    horizon: int,
) -> np.ndarray:
    """Predict future positions jointly for a group of agents.

    histories holds each agent's observed positions (most recent last,
    at the model time step); agents younger than the observation window
    are padded by repeating their earliest sample.  t_last gives each
    agent's local time at its final history sample, used to query goal
    priors.  Horizons longer than one prediction window are chained:
    after each window the observation window is rebuilt from the latest
    positions and the recurrent state is re-warmed, so an external
    caller feeding predictions back in reproduces the internal result
    exactly.

    Returns predicted positions, shape (A, horizon, 2).
    """
    a = len(histories)
    if a == 0:
        raise EmptyBatch("no agents to roll out")
    if horizon < 1:
        raise InvalidInput("horizon must be positive")
    if model.l_ob < 2:
        raise InvalidInput("observation window must cover at least two frames")
    if model.supervision != "none" and priors is None:
        raise MissingHistory("goal supervision requires agent priors")
    windows = []
    for i, hist in enumerate(histories):
        hist = np.asarray(hist, dtype=float).reshape(-1, 2)
        if hist.shape[0] == 0:
            raise MissingHistory(f"agent {i} has no observed positions")
        if hist.shape[0] >= model.l_ob:
            win = hist[-model.l_ob :].copy()
        else:
            pad = np.repeat(hist[:1], model.l_ob - hist.shape[0], axis=0)
            win = np.concatenate([pad, hist], axis=0)
        windows.append(win)
    window = np.stack(windows)  # (A, L_ob, 2)
    t_last = np.asarray(t_last, dtype=float).copy()
    flags = kind_flags(kinds)
    out = np.zeros((a, horizon, 2))
    done = 0
    remaining = horizon
    while remaining > 0:
        steps = min(model.l_pd, remaining)
        preds = _rollout_cycle(model, window, flags, priors, t_last, steps)
        out[:, done : done + steps] = preds
        seq = np.concatenate([window, preds], axis=1)
        window = seq[:, -model.l_ob :].copy()
        t_last = t_last + steps * model.dt
        done += steps
        remaining -= steps
    return out


def _rollout_cycle(model, window, flags, priors, t_last, steps):
    a, l_ob = window.shape[0], model.l_ob
    h = np.zeros((a, model.hidden_dim))
    preds = np.zeros((a, steps, 2))
    pos_prev = window[:, 0]
    pos_cur = None
    n_pred = 0
    # step s consumes the displacement into position s and, once the
    # observation window is exhausted, emits the position for s + 1
    for s in range(1, l_ob + steps - 1 + 1):
        if s < l_ob:
            pos_cur = window[:, s]
        disp = pos_cur - pos_prev
        t_cur = t_last + (s - (l_ob - 1)) * model.dt
        goal = np.zeros((a, 2))
        if model.supervision != "none":
            for i in range(a):
                tgt = goal_target(priors[i], float(t_cur[i]), model.supervision, model.l_pd)
                goal[i] = tgt - pos_cur[i]
        occ = pool_all(pos_cur, model.grid_g, model.grid_cell)
        raw = assemble_input(disp, goal, occ, flags)
        h, d = forward_step(model, h, raw)
        if s >= l_ob - 1:
            pos_prev = pos_cur
            pos_cur = pos_cur + d
            preds[:, n_pred] = pos_cur
            n_pred += 1
            if n_pred == steps:
                break
        else:
            pos_prev = window[:, s]
    return preds
