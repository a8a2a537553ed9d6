"""Evaluation quantities: mode counting, distribution distances, ELBO gap,
likelihood estimation, chunk-structure statistics and shortest parses."""

from __future__ import annotations

import math
from collections import deque

import numpy as np
from scipy.special import logsumexp
from scipy.stats import spearmanr

from . import autodiff as ad
from .tokenizer import bpe_merges


def l1_distance(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share support indexing")
    return float(np.abs(p - q).sum())


def jsd(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence with base-2 logs, so the range is [0, 1]."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share support indexing")
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log2(a[mask] / b[mask])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


class ModeTracker:
    """Cumulative count of distinct high-reward terminal states."""

    def __init__(self, env):
        self.env = env
        self.modes: set = set()

    def update(self, terminal_states) -> int:
        for x in terminal_states:
            if self.env.is_mode(x):
                self.modes.add(x)
        return len(self.modes)

    @property
    def count(self) -> int:
        return len(self.modes)


def _potential(env, s) -> tuple:
    if env.kind == "grid":
        return (s.x + s.y, s.exited)
    if env.kind == "sequence":
        return (len(s.symbols), s.done)
    return (s.node_count, len(s.edges), s.ended)


def reachable_states(env, library):
    """All states reachable under the library, initial state included."""
    s0 = env.initial_state()
    seen = {s0}
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        if env.is_terminal(s):
            continue
        mask = library.valid_actions(s)
        for a, ok in zip(library.actions, mask):
            if not ok:
                continue
            s2 = library.apply_action(s, a.id)
            if s2 not in seen:
                seen.add(s2)
                queue.append(s2)
    return sorted(seen, key=lambda s: (_potential(env, s), repr(s)))


def exact_terminal_distribution(env, library, policy) -> dict:
    """P_F_top(x) for every reachable terminal state, by exact flow pushing."""
    states = reachable_states(env, library)
    nonterm = [s for s in states if not env.is_terminal(s)]
    with ad.no_grad():
        emb = policy.action_embeddings(library)
        probs = {}
        chunk = 4096
        for i in range(0, len(nonterm), chunk):
            block = nonterm[i : i + chunk]
            logp, _ = policy.log_probs(block, library, emb)
            for s, row in zip(block, np.exp(logp.data)):
                probs[s] = row
    flow = {s: 0.0 for s in states}
    flow[env.initial_state()] = 1.0
    terminal_mass: dict = {}
    for s in states:  # topological: potential strictly increases
        f = flow[s]
        if env.is_terminal(s):
            terminal_mass[s] = terminal_mass.get(s, 0.0) + f
            continue
        if f == 0.0:
            continue
        row = probs[s]
        for j, a in enumerate(library.actions):
            if row[j] <= 0.0:
                continue
            s2 = library.apply_action(s, a.id)
            flow[s2] += f * row[j]
    return terminal_mass


def exact_log_partition(env, beta: float = 1.0) -> float:
    logs = [beta * math.log(r) for _, r in env.enumerate_terminal_states()]
    return float(logsumexp(logs))


def distribution_arrays(env, terminal_mass: dict, beta: float = 1.0):
    """Aligned (P_F_top, R^beta / Z) arrays over the enumerated terminals."""
    xs, rewards = zip(*env.enumerate_terminal_states())
    target = np.array([r**beta for r in rewards])
    target /= target.sum()
    model = np.array([terminal_mass.get(x, 0.0) for x in xs])
    return model, target


def estimate_terminal_logprob(x, policy, backward, library, n: int, rng) -> float:
    """Importance-sampled log P_F_top(x) with n backward parses of x."""
    if n < 1:
        raise ValueError("need at least one backward trajectory")
    parses = [backward.sample(x, rng) for _ in range(n)]
    with ad.no_grad():
        lpf = policy.traj_logprobs(parses, library).data[:, 0]
    lpb = np.array([backward.traj_logprob(t) for t in parses])
    return float(logsumexp(lpf - lpb) - math.log(n))


def elbo_estimate(trajectories, policy, backward, library, beta: float = 1.0) -> float:
    """Variational lower-bound estimate of log Z from forward rollouts."""
    lpf_parts = []
    with ad.no_grad():
        # score in slices: the batched trajectory scorer builds a
        # (n_trajectories, n_states) segment matrix, so one shot at large n
        # would exhaust memory
        for i in range(0, len(trajectories), 256):
            batch = trajectories[i:i + 256]
            lpf_parts.append(policy.traj_logprobs(batch, library).data[:, 0])
    lpf = np.concatenate(lpf_parts)
    lpb = np.array([backward.traj_logprob(t) for t in trajectories])
    logr = np.array([beta * math.log(t.reward) for t in trajectories])
    return float(np.mean(logr + lpb - lpf))


def elbo_gap(env, policy, backward, library, rng, k: int = 10000, beta: float = 1.0) -> float:
    from .policy import rollout

    log_z = exact_log_partition(env, beta)
    trajs = rollout(env, library, policy, rng, eps=0.0, n=k)
    return abs(log_z - elbo_estimate(trajs, policy, backward, library, beta))


def spearman_reward_likelihood(samples, thresholds) -> dict:
    """Per-threshold Spearman rho between log-reward and estimated log-likelihood.

    samples: list of (base_reward, beta_log_reward, est_loglik).
    Thresholds with fewer than 3 qualifying samples map to None.
    """
    out = {}
    for thr in thresholds:
        kept = [(lr, ll) for r, lr, ll in samples if r >= thr]
        if len(kept) < 3:
            out[thr] = None
            continue
        lrs, lls = zip(*kept)
        rho = spearmanr(lrs, lls).statistic
        out[thr] = float(rho)
    return out


# --- chunk structure -----------------------------------------------------------


def _chunk_strings(library) -> list[str]:
    alpha = library.env.atomic_names
    return ["".join(alpha[i] for i in c.expansion) for c in library.chunks]


def chunk_occurrence(library, objects: list[str]) -> dict[str, float]:
    """Mean non-overlapping occurrence count of each chunk across objects."""
    if library.env.kind != "sequence":
        raise ValueError("chunk statistics require a sequence environment")
    if not objects:
        raise ValueError("empty dataset")
    return {
        cs: sum(obj.count(cs) for obj in objects) / len(objects)
        for cs in _chunk_strings(library)
    }


def chunk_coverage(library, objects: list[str]) -> dict[str, float]:
    """Fraction of objects containing each chunk at least once."""
    if library.env.kind != "sequence":
        raise ValueError("chunk statistics require a sequence environment")
    if not objects:
        raise ValueError("empty dataset")
    return {
        cs: sum(1 for obj in objects if cs in obj) / len(objects)
        for cs in _chunk_strings(library)
    }


def summarize(values) -> dict[str, float]:
    v = np.array(list(values), dtype=float)
    if v.size == 0:
        return {"mean": 0.0, "median": 0.0, "sd": 0.0}
    return {
        "mean": float(v.mean()),
        "median": float(np.median(v)),
        "sd": float(v.std()),
    }


def min_parse_tokens(tokens: list[str], obj: str) -> int:
    """Fewest tokens whose concatenation is obj (terminal step excluded)."""
    inf = float("inf")
    best = [0] + [inf] * len(obj)
    for i in range(1, len(obj) + 1):
        for t in tokens:
            lt = len(t)
            if lt <= i and obj[i - lt : i] == t and best[i - lt] + 1 < best[i]:
                best[i] = best[i - lt] + 1
    if best[len(obj)] == inf:
        raise AssertionError("objects are always parseable when atomics are present")
    return int(best[len(obj)])


def shortest_parse_length(library, objects: list[str]) -> float:
    """Average minimal token count over objects under the library."""
    alpha = library.env.atomic_names
    tokens = [
        "".join(alpha[i] for i in a.expansion)
        for a in library.actions
        if not a.is_terminal_action
    ]
    return float(np.mean([min_parse_tokens(tokens, obj) for obj in objects]))


def bpe_floor(env, objects: list[str], rounds: int) -> float:
    """Reference floor: BPE fit on the objects themselves, then the same DP."""
    sym_to_id = {sym: i for i, sym in enumerate(env.alphabet)}
    seqs = [[sym_to_id[c] for c in obj] for obj in objects]
    merges = bpe_merges(seqs, rounds)
    tokens = list(env.alphabet) + [
        "".join(env.alphabet[i] for i in m) for m in merges
    ]
    return float(np.mean([min_parse_tokens(tokens, obj) for obj in objects]))


def topk_reward_diversity(env, samples, k: int) -> tuple[float, float]:
    """(mean reward, mean pairwise distance) of the top-k samples by reward.

    samples: list of (state, reward); ties broken by sampling order.
    """
    if len(samples) < k:
        raise ValueError(f"need at least {k} samples, got {len(samples)}")
    top = sorted(range(len(samples)), key=lambda i: (-samples[i][1], i))[:k]
    states = [samples[i][0] for i in top]
    mean_r = float(np.mean([samples[i][1] for i in top]))
    if k < 2:
        return mean_r, 0.0
    dists = [
        env.distance(states[i], states[j])
        for i in range(k)
        for j in range(i + 1, k)
    ]
    return mean_r, float(np.mean(dists))
