"""The four samplers - trajectory-balance GFlowNet, A2C, SAC and a random
baseline - plus the online chunking training loop that drives them.

All samplers share the nonstationary-action-space policy network, the
diversity replay buffer, and the chunk-discovery mechanisms; only their
parameter updates differ. RL trainers receive reward log R(x) on the
terminal transition and 0 elsewhere; the GFlowNet objective uses the
reward exponent beta inside the trajectory-balance residual.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import autodiff as ad
from .autodiff import Var
from .backward import BackwardPolicy
from .config import RunConfig, echo_config
from .envs import make_env
from .library import ActionLibrary
from .metrics import ModeTracker
from .policy import NEG_INF, PolicyNet, rollout
from .replay import DiversityBuffer
from .tokenizer import (
    build_corpus,
    increment_step,
    make_trigger,
    random_merge_step,
    replace_step,
)
from .trajectory import Trajectory


class LinearSchedule:
    """Linear interpolation from start to end over total iterations."""

    def __init__(self, start: float, end: float, total: int):
        if start < end:
            raise ValueError("schedule must be non-increasing")
        self.start, self.end, self.total = start, end, total

    def value(self, iteration: int) -> float:
        if self.total <= 1:
            return self.end
        frac = min(1.0, max(0.0, (iteration - 1) / (self.total - 1)))
        return self.start + frac * (self.end - self.start)


def _check_finite(x: float, what: str, trajs=None):
    if not math.isfinite(x):
        dump = ""
        if trajs:
            dump = "; first trajectory: " + repr(trajs[0].actions)
        raise FloatingPointError(f"non-finite {what}: {x}{dump}")


def tb_loss(trajs, policy, backward, library, log_z: Var, beta: float) -> Var:
    """Mean squared trajectory-balance residual over a batch."""
    lpf = policy.traj_logprobs(trajs, library)  # (n, 1)
    const = np.array(
        [[backward.traj_logprob(t) + beta * math.log(t.reward)] for t in trajs]
    )
    resid = ad.sub(ad.add(log_z, lpf), const)
    loss = ad.mean(ad.square(resid))
    _check_finite(float(loss.data), "trajectory-balance loss", trajs)
    return loss


class GfnTrainer:
    """Trajectory balance with a learned scalar log Z and replay mixing."""

    def __init__(self, env, library, backward: BackwardPolicy, buffer: DiversityBuffer,
                 cfg: RunConfig):
        self.env, self.library, self.backward, self.buffer = env, library, backward, buffer
        self.policy = PolicyNet(env, d=cfg.d, hidden=cfg.hidden, seed=cfg.seed)
        self.log_z = ad.parameter(np.array([[cfg.logz_init]]), "gfn.log_z")
        self.beta = cfg.beta
        self.batch = cfg.batch
        self.mixture = cfg.mixture
        self.policy_opt = ad.Adam(self.policy.params, lr=cfg.lr)
        self.logz_opt = ad.Adam({"gfn.log_z": self.log_z}, lr=cfg.logz_lr)

    def checkpoint_params(self) -> dict:
        return {**self.policy.params, "gfn.log_z": self.log_z}

    def train_step(self, rng, eps: float) -> dict:
        n_buf = math.floor(self.mixture * self.batch) if len(self.buffer) else 0
        fresh = rollout(self.env, self.library, self.policy, rng, eps, self.batch - n_buf)
        replayed = [
            self.backward.sample(x, rng)
            for x, _ in (self.buffer.sample(n_buf, rng) if n_buf else [])
        ]
        trajs = fresh + replayed
        loss = tb_loss(trajs, self.policy, self.backward, self.library,
                       self.log_z, self.beta)
        grads = ad.grads_of(loss, self.checkpoint_params())
        self.policy_opt.step({k: grads[k] for k in self.policy.params})
        self.logz_opt.step({"gfn.log_z": grads["gfn.log_z"]})
        self.buffer.insert_batch([(t.terminal, t.reward) for t in fresh])
        return {
            "loss": float(loss.data),
            "log_z": float(self.log_z.data[0, 0]),
            "fresh": fresh,
        }


def _transitions(trajs, library):
    """Flatten trajectories into SARSA transitions over decision steps.

    Returns (states, chosen column per state, per-step terminal reward,
    next-step flat index or -1, trajectory of origin).
    """
    col = {a.id: j for j, a in enumerate(library.actions)}
    states, cols, rewards, next_idx = [], [], [], []
    for t in trajs:
        base = len(states)
        n = len(t.actions)
        for i, (s, a) in enumerate(zip(t.states[:-1], t.actions)):
            states.append(s)
            cols.append(col[a])
            last = i == n - 1
            rewards.append(math.log(t.reward) if last else 0.0)
            next_idx.append(-1 if last else base + i + 1)
    return states, np.array(cols), np.array(rewards), np.array(next_idx)


def _entropy(logp: Var, mask: np.ndarray) -> Var:
    """Per-row entropy of a masked policy; invalid entries contribute zero."""
    p = ad.exp(logp)
    neg = ad.mul(ad.mul(p, logp), -1.0)
    return ad.matmul(neg, Var(np.ones((logp.data.shape[1], 1))))


class A2CTrainer:
    """On-policy advantage actor-critic with a SARSA critic, discount 1."""

    def __init__(self, env, library, buffer: DiversityBuffer, cfg: RunConfig):
        self.env, self.library, self.buffer = env, library, buffer
        self.actor = PolicyNet(env, d=cfg.d, hidden=cfg.hidden, seed=cfg.seed, name="actor")
        self.critic = PolicyNet(env, d=cfg.d, hidden=cfg.hidden, seed=cfg.seed + 1,
                                name="critic")
        self.alpha = cfg.alpha
        self.batch = cfg.batch
        self.actor_opt = ad.Adam(self.actor.params, lr=cfg.lr)
        self.critic_opt = ad.Adam(self.critic.params, lr=cfg.lr)

    @property
    def policy(self):
        return self.actor

    def checkpoint_params(self) -> dict:
        return {**self.actor.params, **self.critic.params}

    def update_on(self, trajs) -> dict:
        lib = self.library
        states, cols, rewards, next_idx = _transitions(trajs, lib)
        n = len(states)
        flat = np.arange(n) * len(lib.actions) + cols

        q, _ = self.critic.scores(states, lib)
        q_data = q.data
        q_chosen_data = q_data.reshape(-1)[flat]
        # SARSA target: r + Q(s', a') with terminal bootstrap 0, detached
        q_next = np.where(next_idx >= 0, q_chosen_data[np.maximum(next_idx, 0)], 0.0)
        target = rewards + q_next
        q_chosen = ad.take_flat(q, flat)
        critic_loss = ad.mean(ad.square(ad.sub(q_chosen, target)))

        logp, mask = self.actor.log_probs(states, lib)
        p_data = np.exp(logp.data)
        v_data = (p_data * np.where(mask, q_data, 0.0)).sum(axis=1)
        advantage = q_chosen_data - v_data
        lp_chosen = ad.take_flat(logp, flat)
        pg = ad.mean(ad.mul(lp_chosen, -advantage))
        ent = ad.mean(_entropy(logp, mask))
        actor_loss = ad.sub(pg, ad.mul(ent, self.alpha))

        _check_finite(float(critic_loss.data), "critic loss", trajs)
        _check_finite(float(actor_loss.data), "actor loss", trajs)
        a_grads = ad.grads_of(actor_loss, self.actor.params)
        c_grads = ad.grads_of(critic_loss, self.critic.params)
        self.actor_opt.step(a_grads)
        self.critic_opt.step(c_grads)
        return {
            "loss": float(ad.add(actor_loss, critic_loss).data),
            "actor_loss": float(actor_loss.data),
            "critic_loss": float(critic_loss.data),
            "entropy": float(ent.data),
        }

    def train_step(self, rng, eps: float) -> dict:
        fresh = rollout(self.env, self.library, self.actor, rng, eps, self.batch)
        stats = self.update_on(fresh)
        self.buffer.insert_batch([(t.terminal, t.reward) for t in fresh])
        stats.update({"log_z": 0.0, "fresh": fresh})
        return stats


class SACTrainer:
    """Discrete soft actor-critic with a Polyak target critic.

    Updates are off-policy: stored terminal states are re-parsed with the
    configured backward policy into transitions each time they are sampled.
    """

    def __init__(self, env, library, backward: BackwardPolicy, buffer: DiversityBuffer,
                 cfg: RunConfig, tau: float = 0.995):
        self.env, self.library, self.backward, self.buffer = env, library, backward, buffer
        self.actor = PolicyNet(env, d=cfg.d, hidden=cfg.hidden, seed=cfg.seed, name="actor")
        self.critic = PolicyNet(env, d=cfg.d, hidden=cfg.hidden, seed=cfg.seed + 1,
                                name="critic")
        self.target = PolicyNet(env, d=cfg.d, hidden=cfg.hidden, seed=cfg.seed + 1,
                                name="target")
        for k_t, k_c in zip(sorted(self.target.params), sorted(self.critic.params)):
            self.target.params[k_t].data[:] = self.critic.params[k_c].data
        self.alpha = cfg.alpha
        self.tau = tau
        self.batch = cfg.batch
        self.actor_opt = ad.Adam(self.actor.params, lr=cfg.lr)
        self.critic_opt = ad.Adam(self.critic.params, lr=cfg.lr)

    @property
    def policy(self):
        return self.actor

    def checkpoint_params(self) -> dict:
        return {**self.actor.params, **self.critic.params, **self.target.params}

    def polyak_update(self) -> None:
        for k_t, k_c in zip(sorted(self.target.params), sorted(self.critic.params)):
            t, c = self.target.params[k_t].data, self.critic.params[k_c].data
            t *= self.tau
            t += (1.0 - self.tau) * c

    def update_on(self, trajs) -> dict:
        lib = self.library
        states, cols, rewards, next_idx = _transitions(trajs, lib)
        n = len(states)
        flat = np.arange(n) * len(lib.actions) + cols

        # soft Bellman target from the Polyak critic, detached
        with ad.no_grad():
            logp_np, mask = self.actor.log_probs(states, lib)
            qbar, _ = self.target.scores(states, lib)
        p_np = np.exp(logp_np.data)
        soft_v = (p_np * np.where(mask, qbar.data - self.alpha * logp_np.data, 0.0)).sum(axis=1)
        has_next = next_idx >= 0
        target = rewards + np.where(has_next, soft_v[np.maximum(next_idx, 0)], 0.0)

        q, _ = self.critic.scores(states, lib)
        q_chosen = ad.take_flat(q, flat)
        critic_loss = ad.mean(ad.square(ad.sub(q_chosen, target)))

        # actor: KL(pi || softmax(Q/alpha)) over valid actions, Q detached
        ref = np.where(mask, q.data, NEG_INF) / self.alpha
        ref = ref - logsumexp(ref, axis=1, keepdims=True)
        logp, _ = self.actor.log_probs(states, lib)
        p = ad.exp(logp)
        kl_terms = ad.mul(p, ad.sub(logp, np.where(mask, ref, 0.0)))
        ones = Var(np.ones((len(lib.actions), 1)))
        actor_loss = ad.mean(ad.matmul(kl_terms, ones))

        _check_finite(float(critic_loss.data), "critic loss", trajs)
        _check_finite(float(actor_loss.data), "actor loss", trajs)
        self.critic_opt.step(ad.grads_of(critic_loss, self.critic.params))
        self.actor_opt.step(ad.grads_of(actor_loss, self.actor.params))
        self.polyak_update()
        return {
            "loss": float(ad.add(actor_loss, critic_loss).data),
            "actor_loss": float(actor_loss.data),
            "critic_loss": float(critic_loss.data),
        }

    def train_step(self, rng, eps: float) -> dict:
        fresh = rollout(self.env, self.library, self.actor, rng, eps, self.batch)
        self.buffer.insert_batch([(t.terminal, t.reward) for t in fresh])
        sampled = self.buffer.sample(self.batch, rng)
        trajs = [self.backward.sample(x, rng) for x, _ in sampled]
        stats = self.update_on(trajs)
        stats.update({"log_z": 0.0, "fresh": fresh})
        return stats


def rollout_uniform(env, library, rng, n: int, max_batch: int = 256):
    """n trajectories drawn uniformly over valid actions at each step."""
    out = []
    ids = None
    for start in range(0, n, max_batch):
        b = min(max_batch, n - start)
        states = [env.initial_state() for _ in range(b)]
        step_states = [[s] for s in states]
        step_actions = [[] for _ in range(b)]
        alive = list(range(b))
        while alive:
            cur = [states[i] for i in alive]
            mask = library.valid_mask_batch(cur)
            ids = [a.id for a in library.actions]
            next_alive = []
            for row, i in zip(mask, alive):
                valid = np.flatnonzero(row)
                a = ids[valid[rng.integers(len(valid))]]
                s2 = library.apply_action(states[i], a)
                states[i] = s2
                step_states[i].append(s2)
                step_actions[i].append(a)
                if not env.is_terminal(s2):
                    next_alive.append(i)
            alive = next_alive
        for i in range(b):
            out.append(Trajectory(step_states[i], step_actions[i],
                                  env.reward(states[i]), library.generation))
    return out


class RandomTrainer:
    """No learning at all: uniform-over-valid sampling plus buffer upkeep."""

    def __init__(self, env, library, buffer: DiversityBuffer, cfg: RunConfig):
        self.env, self.library, self.buffer = env, library, buffer
        self.batch = cfg.batch
        self.policy = None

    def checkpoint_params(self) -> dict:
        return {}

    def train_step(self, rng, eps: float) -> dict:
        fresh = rollout_uniform(self.env, self.library, rng, self.batch)
        self.buffer.insert_batch([(t.terminal, t.reward) for t in fresh])
        return {"loss": 0.0, "log_z": 0.0, "fresh": fresh}


def make_trainer(env, library, backward, buffer, cfg: RunConfig):
    if cfg.sampler == "gfn":
        return GfnTrainer(env, library, backward, buffer, cfg)
    if cfg.sampler == "a2c":
        return A2CTrainer(env, library, buffer, cfg)
    if cfg.sampler == "sac":
        return SACTrainer(env, library, backward, buffer, cfg)
    if cfg.sampler == "random":
        return RandomTrainer(env, library, buffer, cfg)
    raise ValueError(f"unknown sampler {cfg.sampler!r}")


def run_training(cfg: RunConfig, library: ActionLibrary | None = None) -> dict:
    """Execute one full training run, writing artifacts incrementally.

    Artifacts in cfg.out_dir: config.txt (normalized echo), metrics.jsonl
    (one record per iteration), library_iter*.json snapshots at chunk
    events, library.json + checkpoint.bin at the end, chunk_usage.json,
    and failure.json if the run aborts.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(echo_config(cfg))

    env = make_env(cfg.env, **cfg.env_kwargs())
    if library is None:
        if cfg.init_library:
            library = ActionLibrary.load(cfg.init_library, env)
        else:
            library = ActionLibrary(env)
    backward = BackwardPolicy(env, library, cfg.backward, lam=cfg.lam)
    buffer = DiversityBuffer(env, capacity=cfg.capacity, cutoff=cfg.cutoff)
    trainer = make_trainer(env, library, backward, buffer, cfg)
    trigger = make_trigger(cfg.trigger)
    eps_sched = LinearSchedule(cfg.eps_start, cfg.eps_end, cfg.iterations)
    modes = ModeTracker(env)

    ss = np.random.SeedSequence(cfg.seed)
    rng_train, rng_chunk = [np.random.default_rng(s) for s in ss.spawn(2)]

    chunking = cfg.chunker != "atomic" and not cfg.freeze_library
    usage: dict[str, int] = {}
    added_at: dict[int, int] = {}
    recent_losses: list[float] = []

    def corpus_from_policy(k):
        if trainer.policy is None:
            trajs = rollout_uniform(env, library, rng_chunk, k)
        else:
            trajs = rollout(env, library, trainer.policy, rng_chunk,
                            eps_sched.value(iteration), k)
        return [t.actions for t in trajs]

    def corpus_from_buffer(k):
        if not len(buffer):
            return []
        return [backward.sample(x, rng_chunk).actions
                for x, _ in buffer.sample(k, rng_chunk)]

    iteration = 0
    try:
        with open(out / "metrics.jsonl", "w") as mf:
            for iteration in range(1, cfg.iterations + 1):
                eps = eps_sched.value(iteration)
                stats = trainer.train_step(rng_train, eps)
                modes.update(t.terminal for t in stats["fresh"])
                recent_losses.append(stats["loss"])
                if len(recent_losses) > 100:
                    recent_losses.pop(0)

                chunk_used = 0
                for t in stats["fresh"]:
                    for a in t.actions:
                        if len(library.action(a).expansion) > 1:
                            chunk_used += 1
                            name = library.action_name(a)
                            usage[name] = usage.get(name, 0) + 1

                if chunking and trigger.should_chunk(
                        iteration, float(np.mean(recent_losses))):
                    corpus = build_corpus(library, corpus_from_policy,
                                          corpus_from_buffer, n=cfg.corpus_n,
                                          p=cfg.corpus_p)
                    gen_before = library.generation
                    if cfg.chunker == "increment":
                        a = increment_step(library, corpus)
                        if a is not None:
                            added_at[a.id] = iteration
                    elif cfg.chunker == "replace":
                        replace_step(library, corpus, cfg.m)
                        added_at = {c.id: iteration for c in library.chunks}
                    else:
                        a = random_merge_step(library, rng_chunk)
                        if a is not None:
                            added_at[a.id] = iteration
                    if library.generation != gen_before:
                        library.save(out / f"library_iter{iteration}.json", added_at)

                record = {
                    "iteration": iteration,
                    "visited_states": iteration * cfg.batch,
                    "loss": stats["loss"],
                    "logZ": stats["log_z"],
                    "epsilon": eps,
                    "library_size": len(library),
                    "modes_cumulative": modes.count,
                    "chunk_actions_used": chunk_used,
                }
                mf.write(json.dumps(record, sort_keys=True) + "\n")
    except Exception as e:  # noqa: BLE001 - failure record then re-raise
        (out / "failure.json").write_text(
            json.dumps({"iteration": iteration, "cause": repr(e)}))
        raise

    library.save(out / "library.json", added_at)
    params = trainer.checkpoint_params()
    if params:
        ad.save_checkpoint(out / "checkpoint.bin", params)
    (out / "chunk_usage.json").write_text(json.dumps(usage, sort_keys=True))
    return {
        "modes": modes.count,
        "library_size": len(library),
        "out_dir": str(out),
        "trainer": trainer,
        "library": library,
        "buffer": buffer,
        "env": env,
        "backward": backward,
    }
