"""Dense Q-network with a dueling head, written against numpy only.

Layout: state -> ReLU(256) -> ReLU(256) -> {value (1), advantage (|A|)}.
The dueling output is ``Q = V + A - mean(A)``; the plain variant drops the
value head and uses the advantage head as Q directly. Everything is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1
TRUNK = ("W1", "b1", "W2", "b2")


class NumericalError(ArithmeticError):
    def __init__(self, message: str, **diagnostics):
        super().__init__(f"{message}: {diagnostics}")
        self.diagnostics = diagnostics


@dataclass
class NetParams:
    arrays: dict[str, np.ndarray]
    dueling: bool = True

    @property
    def names(self) -> tuple[str, ...]:
        head = ("Wv", "bv", "Wa", "ba") if self.dueling else ("Wa", "ba")
        return TRUNK + head

    @property
    def state_dim(self) -> int:
        return self.arrays["W1"].shape[0]

    @property
    def num_actions(self) -> int:
        return self.arrays["Wa"].shape[1]

    def copy(self) -> "NetParams":
        return NetParams({k: v.copy() for k, v in self.arrays.items()}, self.dueling)

    def zeros_like(self) -> "NetParams":
        return NetParams({k: np.zeros_like(v) for k, v in self.arrays.items()}, self.dueling)

    def equals(self, other: "NetParams") -> bool:
        return (self.dueling == other.dueling and self.arrays.keys() == other.arrays.keys()
                and all(np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays))


def init_params(state_dim: int, num_actions: int, rng: np.random.Generator,
                hidden: tuple[int, int] = (256, 256), dueling: bool = True) -> NetParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    if state_dim < 1 or num_actions < 1:
        raise ValueError("state_dim and num_actions must be >= 1")
    h1, h2 = hidden
    shapes = {"W1": (state_dim, h1), "b1": (h1,), "W2": (h1, h2), "b2": (h2,),
              "Wa": (h2, num_actions), "ba": (num_actions,)}
    if dueling:
        shapes.update(Wv=(h2, 1), bv=(1,))
    fan_in = {"W1": state_dim, "b1": state_dim, "W2": h1, "b2": h1,
              "Wv": h2, "bv": h2, "Wa": h2, "ba": h2}
    arrays = {}
    for name in ("W1", "b1", "W2", "b2", "Wv", "bv", "Wa", "ba"):
        if name in shapes:
            bound = 1.0 / np.sqrt(fan_in[name])
            arrays[name] = rng.uniform(-bound, bound, size=shapes[name])
    return NetParams(arrays, dueling)


@dataclass
class _Cache:
    x: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray


def _forward(p: NetParams, x: np.ndarray):
    w = p.arrays
    z1 = x @ w["W1"] + w["b1"]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w["W2"] + w["b2"]
    h2 = np.maximum(z2, 0.0)
    adv = h2 @ w["Wa"] + w["ba"]
    if p.dueling:
        value = (h2 @ w["Wv"] + w["bv"])[:, 0]
        q = value[:, None] + adv - adv.mean(axis=1, keepdims=True)
    else:
        value = adv.mean(axis=1)
        q = adv
    return q, value, adv, _Cache(x, z1, h1, z2, h2)


def _as_batch(p: NetParams, states) -> tuple[np.ndarray, bool]:
    x = np.asarray(states, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != p.state_dim:
        raise ValueError(f"expected state dimension {p.state_dim}, got shape {np.shape(states)}")
    return x, single


def forward(p: NetParams, states):
    """Return ``(q, value, advantage)`` for one state or a batch of states.

    In plain mode ``value`` is reported as the mean of Q so the return shape
    stays the same.
    """
    x, single = _as_batch(p, states)
    q, v, a, _ = _forward(p, x)
    if single:
        return q[0], float(v[0]), a[0]
    return q, v, a


def q_values(p: NetParams, states) -> np.ndarray:
    x, single = _as_batch(p, states)
    q = _forward(p, x)[0]
    return q[0] if single else q


def td_target(reward, next_state, tp: NetParams, gamma: float, done):
    """``r`` if terminal else ``r + gamma * max_a Q_target(s', a)``; works on batches."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    r = np.asarray(reward, dtype=np.float64)
    d = np.asarray(done, dtype=bool)
    q_next = q_values(tp, next_state)
    best = q_next.max(axis=-1)
    out = np.where(d, r, r + gamma * best)
    return float(out) if out.ndim == 0 else out


def loss_and_gradient(p: NetParams, states, actions, targets) -> tuple[float, NetParams]:
    """Mean squared TD error over the taken actions and its gradient."""
    x, _ = _as_batch(p, states)
    a_idx = np.asarray(actions, dtype=np.int64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = x.shape[0]
    if n == 0:
        raise ValueError("batch must be nonempty")
    if a_idx.shape[0] != n or y.shape[0] != n:
        raise ValueError("states, actions and targets must have the same length")
    q, _, _, c = _forward(p, x)
    rows = np.arange(n)
    err = q[rows, a_idx] - y
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise NumericalError("non-finite loss", max_abs_q=float(np.nanmax(np.abs(q))),
                             max_abs_target=float(np.nanmax(np.abs(y))))
    w = p.arrays
    dq = np.zeros_like(q)
    dq[rows, a_idx] = 2.0 * err / n
    g = {}
    if p.dueling:
        dv = dq.sum(axis=1, keepdims=True)
        da = dq - dv / q.shape[1]
        g["Wv"] = c.h2.T @ dv
        g["bv"] = dv.sum(axis=0)
        dh2 = da @ w["Wa"].T + dv @ w["Wv"].T
    else:
        da = dq
        dh2 = da @ w["Wa"].T
    g["Wa"] = c.h2.T @ da
    g["ba"] = da.sum(axis=0)
    dz2 = dh2 * (c.z2 > 0)
    g["W2"] = c.h1.T @ dz2
    g["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ w["W2"].T) * (c.z1 > 0)
    g["W1"] = c.x.T @ dz1
    g["b1"] = dz1.sum(axis=0)
    return loss, NetParams(g, p.dueling)


def apply_update(p: NetParams, grads: NetParams, lr: float) -> NetParams:
    """One plain gradient-descent step ``theta - lr * grad`` (returns new params)."""
    if p.arrays.keys() != grads.arrays.keys():
        raise ValueError("gradient does not match parameter layout")
    out = {}
    for k, v in p.arrays.items():
        if v.shape != grads.arrays[k].shape:
            raise ValueError(f"shape mismatch for {k}")
        out[k] = v - lr * grads.arrays[k]
    return NetParams(out, p.dueling)


@dataclass
class Adam:
    """Adaptive-moment optimiser; state is kept per parameter name."""
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, p: NetParams, grads: NetParams) -> NetParams:
        self.step_count += 1
        b1t = 1.0 - self.beta1 ** self.step_count
        b2t = 1.0 - self.beta2 ** self.step_count
        out = {}
        for k, theta in p.arrays.items():
            g = grads.arrays[k]
            m = self.m.get(k, np.zeros_like(g))
            v = self.v.get(k, np.zeros_like(g))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            out[k] = theta - self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
        return NetParams(out, p.dueling)


def sync_target(p: NetParams, tp: NetParams | None = None) -> NetParams:
    """Return an exact copy of ``p`` to serve as the target network."""
    return p.copy()


def save_params(p: NetParams, path) -> None:
    np.savez(path, format_version=np.int64(CHECKPOINT_VERSION), dueling=np.bool_(p.dueling),
             **{f"param_{k}": v for k, v in p.arrays.items()})


def load_params(path) -> NetParams:
    with np.load(path, allow_pickle=False) as f:
        version = int(f["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arrays = {k[len("param_"):]: f[k].copy() for k in f.files if k.startswith("param_")}
        return NetParams(arrays, bool(f["dueling"]))
