"""Replay buffer and the DDPG / TD3 / SSD3 actor-critic learners.

All agents act in the normalised cube [-1, 1]^A; the environment maps raw
actions onto physical bounds.  Batched helpers take ``(B, dim)`` arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .config import AgentHyperparams, ConfigError
from .neural import Adam, Mlp, MlpSpec, soft_update

log = logging.getLogger(__name__)

ALGORITHMS = ("ddpg", "td3", "ssd3")

ACTOR_FINAL_SCALE = 1e-3


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with uniform sampling."""

    def __init__(self, state_dim: int, action_dim: int, capacity: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state, done) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self._size < batch_size:
            raise ValueError(f"buffer holds {self._size} transitions, need {batch_size}")
        return rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(batch_size, rng)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.next_states[idx], self.dones[idx])


# ---------------------------------------------------------------------------
# acting and value targets

def act(actor: Mlp, state: np.ndarray, explore: bool, sigma_explore: float,
        rng: np.random.Generator) -> np.ndarray:
    a = actor.forward(state)
    if explore and sigma_explore > 0:
        a = a + rng.normal(0.0, sigma_explore, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def critic_value(critic: Mlp, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Q(s, a) with the scalar output squeezed: ``(B,)`` or a float for one pair."""
    x = np.concatenate([states, actions], axis=-1)
    return critic.forward(x)[..., 0]


def smoothed_target_action(actor_t: Mlp, next_states: np.ndarray, sigma_target: float,
                           c_clip: float, rng: np.random.Generator) -> np.ndarray:
    a = actor_t.forward(next_states)
    if sigma_target > 0:
        noise = np.clip(rng.normal(0.0, sigma_target, size=a.shape), -c_clip, c_clip)
        a = a + noise
    return np.clip(a, -1.0, 1.0)


def ddpg_target(rewards, dones, gamma: float, actor_t: Mlp, critic_t: Mlp,
                next_states: np.ndarray) -> np.ndarray:
    q_next = critic_value(critic_t, next_states, actor_t.forward(next_states))
    return np.asarray(rewards) + gamma * np.where(dones, 0.0, q_next)


def td3_target(rewards, dones, gamma: float, actor_t: Mlp, critic1_t: Mlp, critic2_t: Mlp,
               next_states: np.ndarray, sigma_target: float, c_clip: float,
               rng: np.random.Generator) -> np.ndarray:
    a_next = smoothed_target_action(actor_t, next_states, sigma_target, c_clip, rng)
    q_min = np.minimum(critic_value(critic1_t, next_states, a_next),
                       critic_value(critic2_t, next_states, a_next))
    return np.asarray(rewards) + gamma * np.where(dones, 0.0, q_min)


def softmax_weighted(values: np.ndarray, beta: float) -> np.ndarray:
    """Softmax(beta * v)-weighted average along axis 0, computed with max subtraction."""
    values = np.asarray(values, dtype=float)
    z = beta * values
    w = np.exp(z - z.max(axis=0, keepdims=True))
    return (w * values).sum(axis=0) / w.sum(axis=0)


def ssd3_target(rewards, dones, gamma: float, actors_t: tuple[Mlp, Mlp],
                critics_t: tuple[Mlp, Mlp], next_states: np.ndarray, sigma_target: float,
                c_clip: float, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Softmax fusion of the clipped-double-Q values of both target actors."""
    q_mins = []
    for actor_t in actors_t:
        a_next = smoothed_target_action(actor_t, next_states, sigma_target, c_clip, rng)
        q_mins.append(np.minimum(critic_value(critics_t[0], next_states, a_next),
                                 critic_value(critics_t[1], next_states, a_next)))
    fused = softmax_weighted(np.stack(q_mins), beta)
    return np.asarray(rewards) + gamma * np.where(dones, 0.0, fused)


def ssd3_select_actor(critic1: Mlp, critic2: Mlp, actor1: Mlp, actor2: Mlp,
                      states: np.ndarray) -> int:
    """0 if Q1(s, mu1(s)) >= Q2(s, mu2(s)) else 1; batches compare the means."""
    q1 = np.mean(critic_value(critic1, states, actor1.forward(states)))
    q2 = np.mean(critic_value(critic2, states, actor2.forward(states)))
    return 0 if q1 >= q2 else 1


# ---------------------------------------------------------------------------
# losses and gradient steps

def critic_loss_and_grads(critic: Mlp, states, actions, y) -> tuple[float, list[np.ndarray]]:
    x = np.concatenate([states, actions], axis=-1)
    q, cache = critic.forward_cached(x)
    err = q[:, 0] - y
    n = len(y)
    grads, _ = critic.backward(cache, (2.0 / n) * err[:, None])
    return float(np.mean(err * err)), grads


def _action_grad(critic: Mlp, states, actions, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Q values and dQ/da (scaled by ``upstream``) for each row."""
    x = np.concatenate([states, actions], axis=-1)
    q, cache = critic.forward_cached(x)
    _, dx = critic.backward(cache, upstream[:, None])
    return q[:, 0], dx[:, states.shape[1]:]


def ddpg_actor_loss(states, actor: Mlp, critic: Mlp) -> tuple[float, list[np.ndarray]]:
    """-mean Q(s, mu(s)) and its gradient w.r.t. the actor parameters."""
    n = len(states)
    a, cache = actor.forward_cached(states)
    q, dq_da = _action_grad(critic, states, a, np.full(n, -1.0 / n))
    grads, _ = actor.backward(cache, dq_da)
    return float(-q.mean()), grads


def ssd3_actor_loss(states, actor: Mlp, critic1: Mlp, critic2: Mlp,
                    lambda_ent: float) -> tuple[float, list[np.ndarray]]:
    """``-mean max(Q1, Q2)(s, mu(s)) + lambda_ent * mean ||mu(s)||^2``.

    The larger critic routes the gradient at each state, critic 1 on ties.
    """
    n = len(states)
    a, cache = actor.forward_cached(states)
    up = np.full(n, -1.0 / n)
    q1, g1 = _action_grad(critic1, states, a, up)
    q2, g2 = _action_grad(critic2, states, a, up)
    use_first = q1 >= q2
    q_max = np.where(use_first, q1, q2)
    da = np.where(use_first[:, None], g1, g2) + (2.0 * lambda_ent / n) * a
    grads, _ = actor.backward(cache, da)
    loss = -q_max.mean() + lambda_ent * np.mean(np.sum(a * a, axis=1))
    return float(loss), grads


# ---------------------------------------------------------------------------
# agents

def actor_spec(state_dim: int, action_dim: int, hyper: AgentHyperparams) -> MlpSpec:
    return MlpSpec(state_dim, hyper.hidden, action_dim, "tanh")


def critic_spec(state_dim: int, action_dim: int, hyper: AgentHyperparams) -> MlpSpec:
    return MlpSpec(state_dim + action_dim, hyper.hidden, 1, "identity")


class _Learner:
    """Online network + target copy + optimiser."""

    def __init__(self, net: Mlp, lr: float):
        self.net = net
        self.target = net.copy()
        self.opt = Adam(net.params, lr=lr)

    def step(self, grads) -> None:
        self.opt.step(self.net.params, grads)


class Agent:
    name = "base"
    n_actors = 1
    n_critics = 1

    def __init__(self, state_dim: int, action_dim: int, hyper: AgentHyperparams,
                 rng: np.random.Generator):
        self.hyper = hyper
        self.state_dim = state_dim
        self.action_dim = action_dim
        a_spec = actor_spec(state_dim, action_dim, hyper)
        c_spec = critic_spec(state_dim, action_dim, hyper)
        self.actors = [_Learner(Mlp.init(a_spec, rng, ACTOR_FINAL_SCALE), hyper.actor_lr)
                       for _ in range(self.n_actors)]
        self.critics = [_Learner(Mlp.init(c_spec, rng), hyper.critic_lr)
                        for _ in range(self.n_critics)]
        self.updates = 0

    def actor_index(self, state: np.ndarray) -> int:
        return 0

    def act(self, state: np.ndarray, explore: bool, rng: np.random.Generator) -> np.ndarray:
        actor = self.actors[self.actor_index(state)].net
        return act(actor, state, explore, self.hyper.sigma_explore, rng)

    def networks(self) -> dict[str, Mlp]:
        nets = {}
        for i, lr in enumerate(self.actors):
            nets[f"actor{i + 1}"] = lr.net
            nets[f"actor{i + 1}_target"] = lr.target
        for i, lr in enumerate(self.critics):
            nets[f"critic{i + 1}"] = lr.net
            nets[f"critic{i + 1}_target"] = lr.target
        return nets

    def _soft_update_all(self) -> None:
        for lr in (*self.actors, *self.critics):
            soft_update(lr.target, lr.net, self.hyper.rho)

    def update(self, batch: Batch, rng: np.random.Generator) -> dict:
        raise NotImplementedError


class DDPGAgent(Agent):
    name = "ddpg"

    def update(self, batch: Batch, rng: np.random.Generator) -> dict:
        h = self.hyper
        actor, critic = self.actors[0], self.critics[0]
        y = ddpg_target(batch.rewards, batch.dones, h.gamma, actor.target, critic.target,
                        batch.next_states)
        c_loss, c_grads = critic_loss_and_grads(critic.net, batch.states, batch.actions, y)
        critic.step(c_grads)
        a_loss, a_grads = ddpg_actor_loss(batch.states, actor.net, critic.net)
        actor.step(a_grads)
        self._soft_update_all()
        self.updates += 1
        return {"critic_loss": c_loss, "actor_loss": a_loss}


class TD3Agent(Agent):
    name = "td3"
    n_critics = 2

    def update(self, batch: Batch, rng: np.random.Generator) -> dict:
        h = self.hyper
        actor = self.actors[0]
        c1, c2 = self.critics
        y = td3_target(batch.rewards, batch.dones, h.gamma, actor.target, c1.target, c2.target,
                       batch.next_states, h.sigma_target, h.c_clip, rng)
        out = {}
        losses = []
        for c in (c1, c2):
            loss, grads = critic_loss_and_grads(c.net, batch.states, batch.actions, y)
            c.step(grads)
            losses.append(loss)
        out["critic_loss"] = float(np.mean(losses))
        self.updates += 1
        if self.updates % h.policy_delay == 0:
            out["actor_loss"], grads = ddpg_actor_loss(batch.states, actor.net, c1.net)
            actor.step(grads)
            self._soft_update_all()
        return out


class SSD3Agent(Agent):
    """Two actors sharing one pair of critics.

    Critics regress onto the softmax-fused target every update; the actor whose
    own critic rates it higher is updated with the regularised max-critic loss.
    """

    name = "ssd3"
    n_actors = 2
    n_critics = 2

    def actor_index(self, state: np.ndarray) -> int:
        (a1, a2), (c1, c2) = self.actors, self.critics
        return ssd3_select_actor(c1.net, c2.net, a1.net, a2.net, state)

    def update(self, batch: Batch, rng: np.random.Generator) -> dict:
        h = self.hyper
        (a1, a2), (c1, c2) = self.actors, self.critics
        y = ssd3_target(batch.rewards, batch.dones, h.gamma, (a1.target, a2.target),
                        (c1.target, c2.target), batch.next_states, h.sigma_target,
                        h.c_clip, h.beta, rng)
        losses = []
        for c in (c1, c2):
            loss, grads = critic_loss_and_grads(c.net, batch.states, batch.actions, y)
            c.step(grads)
            losses.append(loss)
        out = {"critic_loss": float(np.mean(losses))}
        self.updates += 1
        if self.updates % h.policy_delay == 0:
            chosen = ssd3_select_actor(c1.net, c2.net, a1.net, a2.net, batch.states)
            actor = self.actors[chosen]
            out["actor_loss"], grads = ssd3_actor_loss(batch.states, actor.net, c1.net,
                                                       c2.net, h.lambda_ent)
            actor.step(grads)
            out["chosen_actor"] = chosen
            self._soft_update_all()
        return out


AGENTS: dict[str, type[Agent]] = {"ddpg": DDPGAgent, "td3": TD3Agent, "ssd3": SSD3Agent}


def make_agent(algorithm: str, state_dim: int, action_dim: int, hyper: AgentHyperparams,
               rng: np.random.Generator) -> Agent:
    try:
        cls = AGENTS[algorithm]
    except KeyError:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}") from None
    if cls is DDPGAgent and hyper.policy_delay != 1:
        hyper = hyper.replace(policy_delay=1)
    return cls(state_dim, action_dim, hyper, rng)


# ---------------------------------------------------------------------------
# training loop

@dataclass
class TrainingLog:
    algorithm: str
    episodes: list[dict] = field(default_factory=list)
    step_eh_efficiency: list[list[float]] = field(default_factory=list)
    agent: Agent | None = None


def train(env, algorithm: str, hyper: AgentHyperparams, episodes: int, seed: int,
          on_episode: Callable[[dict], None] | None = None) -> TrainingLog:
    """Run the off-policy actor-critic loop for ``episodes`` episodes.

    ``env`` needs ``state_dim``, ``action_dim``, ``reset(seed=None)`` and
    ``step(raw_action)`` returning an object with ``reward``, ``next_state``,
    ``done`` and an ``info`` dict.  If the env has a ``state_scale`` array the
    agent observes ``state / state_scale``.  ``on_episode`` receives each episode
    record plus its per-step efficiency trace under ``eh_efficiency``.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if episodes < 0:
        raise ConfigError("episodes must be >= 0")
    env_ss, init_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    init_rng = np.random.default_rng(init_ss)
    rng = np.random.default_rng(noise_ss)
    agent = make_agent(algorithm, env.state_dim, env.action_dim, hyper, init_rng)
    buffer = ReplayBuffer(env.state_dim, env.action_dim, hyper.replay_capacity)
    log_ = TrainingLog(algorithm, agent=agent)
    start_updates = max(hyper.warmup, hyper.batch_size)
    total_steps = 0
    env_seed = int(env_ss.generate_state(1)[0])
    scale = getattr(env, "state_scale", None)
    observe = (lambda s: s) if scale is None else (lambda s: s / scale)

    for ep in range(episodes):
        state = observe(env.reset(seed=env_seed if ep == 0 else None))
        cum_reward = 0.0
        effs: list[float] = []
        qos_hits = 0
        critic_losses: list[float] = []
        actor_losses: list[float] = []
        done = False
        while not done:
            if total_steps < hyper.warmup:
                raw = rng.uniform(-1.0, 1.0, size=env.action_dim)
            else:
                raw = agent.act(state, True, rng)
            res = env.step(raw)
            next_state = observe(res.next_state)
            buffer.push(state, raw, res.reward, next_state, res.done)
            state, done = next_state, res.done
            total_steps += 1
            cum_reward += res.reward
            effs.append(float(res.info.get("eh_efficiency", res.reward)))
            qos_hits += bool(res.info.get("qos", True))
            if len(buffer) >= start_updates:
                diag = agent.update(buffer.sample(hyper.batch_size, rng), rng)
                critic_losses.append(diag["critic_loss"])
                if "actor_loss" in diag:
                    actor_losses.append(diag["actor_loss"])
        record = {
            "episode": ep,
            "cum_reward": cum_reward,
            "mean_eh_efficiency": float(np.mean(effs)),
            "qos_rate": qos_hits / len(effs),
            "critic_loss": float(np.mean(critic_losses)) if critic_losses else None,
            "actor_loss": float(np.mean(actor_losses)) if actor_losses else None,
        }
        log_.episodes.append(record)
        log_.step_eh_efficiency.append(effs)
        if on_episode is not None:
            on_episode(dict(record, eh_efficiency=effs))
    return log_


class QuadraticToyEnv:
    """One-dimensional bandit-like task with reward ``1 - (a - 0.3)^2``."""

    state_dim = 1
    action_dim = 1

    def __init__(self, horizon: int = 5, optimum: float = 0.3):
        self.horizon = horizon
        self.optimum = optimum
        self.t = 0

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.t = 0
        return np.ones(1)

    def step(self, raw):
        from .env import StepResult

        a = float(np.clip(np.asarray(raw).reshape(-1)[0], -1.0, 1.0))
        self.t += 1
        reward = 1.0 - (a - self.optimum) ** 2
        return StepResult(reward, np.ones(1), self.t >= self.horizon, {"qos": True})


def greedy_return(agent: Agent, env, episodes: int = 1) -> float:
    """Mean per-step reward of the noise-free policy."""
    rewards = []
    rng = np.random.default_rng(0)
    scale = getattr(env, "state_scale", None)
    observe = (lambda s: s) if scale is None else (lambda s: s / scale)
    for _ in range(episodes):
        state = observe(env.reset())
        done = False
        while not done:
            res = env.step(agent.act(state, False, rng))
            rewards.append(res.reward)
            state, done = observe(res.next_state), res.done
    return float(np.mean(rewards))
