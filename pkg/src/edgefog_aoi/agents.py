"""Experience replay, epsilon-greedy control and the DQN training loop."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import net as qnet


class Env(Protocol):
    num_actions: int
    state_dim: int

    def reset(self, seed: int | None = None) -> np.ndarray: ...
    def step(self, action: int): ...


EnvFactory = Callable[[int], Env]


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        if np.shape(self.state) != np.shape(self.next_state):
            raise ValueError("state and next_state must have the same shape")
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def push(self, tr: Transition) -> None:
        i = self.inserted % self.capacity
        self.states[i] = tr.state
        self.next_states[i] = tr.next_state
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.dones[i] = tr.done
        self.inserted += 1

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if len(self) == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, len(self), size=batch)

    def sample(self, batch: int, rng: np.random.Generator):
        i = self.sample_indices(batch, rng)
        return self.states[i], self.actions[i], self.rewards[i], self.next_states[i], self.dones[i]

    def insertion_ids(self) -> np.ndarray:
        """Global insertion number of each stored slot (for FIFO checks)."""
        n = len(self)
        first = self.inserted - n
        ids = np.arange(first, self.inserted)
        return ids[np.argsort(ids % self.capacity)]


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 128
    buffer_capacity: int = 100_000
    gamma: float = 0.99
    epsilon_start: float = 0.5
    epsilon_end: float = 0.01
    epsilon_decay_frac: float = 0.2       # share of total steps over which epsilon decays linearly
    episodes: int = 2000
    steps_per_episode: int = 10
    target_sync_steps: int = 200
    hidden: tuple[int, int] = (256, 256)
    optimizer: str = "sgd"                # "sgd" or "adam"
    loss_ceiling: float = 1e6
    divergence_patience: int = 100

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(self.hidden))
        if not (self.lr > 0 and self.batch_size >= 1 and self.buffer_capacity >= 1):
            raise ValueError("lr, batch_size and buffer_capacity must be positive")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        for name in ("epsilon_start", "epsilon_end", "epsilon_decay_frac"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.episodes < 0 or self.steps_per_episode < 1 or self.target_sync_steps < 1:
            raise ValueError("episodes >= 0, steps_per_episode >= 1 and target_sync_steps >= 1 required")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")

    def epsilon(self, step: int) -> float:
        horizon = self.epsilon_decay_frac * self.episodes * self.steps_per_episode
        if horizon <= 0:
            return self.epsilon_end
        frac = min(step / horizon, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def select_action(params: qnet.NetParams, state, epsilon: float, rng: np.random.Generator) -> int:
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(params.num_actions))
    return int(np.argmax(qnet.q_values(params, state)))     # argmax returns the lowest tied index


@dataclass
class EpisodeLog:
    episode: int
    cumulative_reward: float
    mean_loss: float
    mean_aoi: float
    epsilon: float


@dataclass
class TrainResult:
    params: qnet.NetParams
    log: list[EpisodeLog]
    losses: list[float]
    variant: str
    diverged: bool = False
    diagnostic: str = ""


def _episode_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def train(env_factory: EnvFactory, cfg: TrainConfig, variant: str = "dueling", seed: int = 0,
          progress: Callable[[EpisodeLog], None] | None = None) -> TrainResult:
    """Deep Q-learning with replay and a periodically synchronised target network."""
    if variant not in ("dueling", "plain"):
        raise ValueError("variant must be 'dueling' or 'plain'")
    root = np.random.SeedSequence([seed, 0 if variant == "dueling" else 1])
    init_ss, act_ss, sample_ss, env_ss = root.spawn(4)
    env = env_factory(int(env_ss.generate_state(1)[0]))
    params = qnet.init_params(env.state_dim, env.num_actions, np.random.default_rng(init_ss),
                              cfg.hidden, dueling=variant == "dueling")
    target = qnet.sync_target(params)
    buf = ReplayBuffer(cfg.buffer_capacity, env.state_dim)
    act_rng = np.random.default_rng(act_ss)
    sample_rng = np.random.default_rng(sample_ss)
    adam = qnet.Adam(lr=cfg.lr) if cfg.optimizer == "adam" else None
    ep_seeds = _episode_seeds(seed, cfg.episodes)

    result = TrainResult(params, [], [], variant)
    total_steps = 0
    over_ceiling = 0
    for ep in range(cfg.episodes):
        state = env.reset(seed=ep_seeds[ep])
        done = False
        ep_reward, ep_losses, ages = 0.0, [], []
        eps = cfg.epsilon(total_steps)
        while not done:
            eps = cfg.epsilon(total_steps)
            action = select_action(params, state, eps, act_rng)
            out = env.step(action)
            buf.push(Transition(state, action, out.reward, out.state, out.done))
            ep_reward += out.reward
            if "mean_age" in out.info:
                ages.append(out.info["mean_age"])
            state, done = out.state, out.done
            total_steps += 1

            if len(buf) >= cfg.batch_size:
                s, a, r, s2, d = buf.sample(cfg.batch_size, sample_rng)
                y = qnet.td_target(r, s2, target, cfg.gamma, d)
                loss, grads = qnet.loss_and_gradient(params, s, a, y)
                params = adam.update(params, grads) if adam else qnet.apply_update(params, grads, cfg.lr)
                result.losses.append(loss)
                ep_losses.append(loss)
                over_ceiling = over_ceiling + 1 if loss > cfg.loss_ceiling else 0
                if over_ceiling >= cfg.divergence_patience:
                    result.diverged = True
                    result.diagnostic = (f"loss above {cfg.loss_ceiling:g} for {over_ceiling} consecutive "
                                         f"updates (episode {ep}, step {total_steps}, last loss {loss:.6g})")
                    warnings.warn(result.diagnostic, RuntimeWarning, stacklevel=2)
                    break
            if total_steps % cfg.target_sync_steps == 0:
                target = qnet.sync_target(params)
        row = EpisodeLog(ep, ep_reward, float(np.mean(ep_losses)) if ep_losses else math.nan,
                         float(np.mean(ages)) if ages else math.nan, eps)
        result.log.append(row)
        if progress:
            progress(row)
        if result.diverged:
            break
    result.params = params
    return result


@dataclass
class EvalResult:
    mean_reward: float
    reward_ci: float
    mean_aoi: float
    aoi_ci: float
    episode_rewards: list[float] = field(default_factory=list)
    episode_aoi: list[float] = field(default_factory=list)


def ci_half_width(values) -> float:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(1.96 * v.std(ddof=1) / math.sqrt(v.size))


def greedy_policy(params: qnet.NetParams) -> Callable[[np.ndarray], int]:
    return lambda s: int(np.argmax(qnet.q_values(params, s)))


def random_policy(num_actions: int, seed: int) -> Callable[[np.ndarray], int]:
    rng = np.random.default_rng(seed)
    return lambda s: int(rng.integers(num_actions))


def evaluate(policy, env_factory: EnvFactory, episodes: int, seed: int) -> EvalResult:
    """Roll out ``episodes`` episodes; episode ``i`` uses the same env seed for any policy.

    ``policy`` is either network parameters (acted on greedily) or a callable
    mapping a state to an action.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if isinstance(policy, qnet.NetParams):
        policy = greedy_policy(policy)
    env = env_factory(seed)
    rewards, aois = [], []
    for s in _episode_seeds(seed, episodes):
        state = env.reset(seed=s)
        done, total, ages = False, 0.0, []
        while not done:
            out = env.step(policy(state))
            total += out.reward
            if "mean_age" in out.info:
                ages.append(out.info["mean_age"])
            state, done = out.state, out.done
        rewards.append(total)
        aois.append(float(np.mean(ages)) if ages else math.nan)
    return EvalResult(float(np.mean(rewards)), ci_half_width(rewards),
                      float(np.mean(aois)), ci_half_width(aois), rewards, aois)


class BanditEnv:
    """Constant-state toy task: action ``a`` pays ``payoffs[a]`` plus Gaussian noise."""

    def __init__(self, payoffs=(0.0, 1.0), noise: float = 0.1, horizon: int = 10, seed: int | None = None):
        self.payoffs = np.asarray(payoffs, dtype=float)
        self.noise = noise
        self.horizon = horizon
        self.num_actions = len(self.payoffs)
        self.state_dim = 2
        self._rng = np.random.default_rng(seed)
        self._t = horizon

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._t = 0
        return np.ones(self.state_dim)

    def step(self, action: int):
        from .env import StepOutcome
        self._t += 1
        r = float(self.payoffs[action] + self.noise * self._rng.standard_normal())
        return StepOutcome(np.ones(self.state_dim), r, self._t >= self.horizon, {})
