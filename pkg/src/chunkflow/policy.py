"""Policy and critic networks for a nonstationary action space.

The state encoder produces a query embedding q in R^d; a shared recurrent
action encoder embeds every library action from its atomic expansion
(length 1 for atomics). Logits are scaled dot products q . f(a) / sqrt(d),
so the output head needs no re-initialization when chunks are added: the
logits vector simply lengthens.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .envs import GraphState, GridState, SeqState
from .library import ActionLibrary

NEG_INF = -1e30


def _init(rng, *shape):
    fan_in = shape[0] if len(shape) > 1 else shape[0]
    return rng.normal(0.0, 1.0 / math.sqrt(max(fan_in, 1)), size=shape)


class LSTMCell:
    def __init__(self, params, rng, in_dim, hidden, name):
        self.hidden = hidden
        self.wx = ad.parameter(_init(rng, in_dim, 4 * hidden), f"{name}.wx")
        self.wh = ad.parameter(_init(rng, hidden, 4 * hidden), f"{name}.wh")
        self.b = ad.parameter(np.zeros(4 * hidden), f"{name}.b")
        for p in (self.wx, self.wh, self.b):
            params[p.name] = p

    def step(self, x: Var, h: Var, c: Var) -> tuple[Var, Var]:
        gates = ad.add(ad.add(ad.matmul(x, self.wx), ad.matmul(h, self.wh)), self.b)
        hd = self.hidden
        i = ad.sigmoid(ad.narrow(gates, 0, hd))
        f = ad.sigmoid(ad.narrow(gates, hd, hd))
        g = ad.tanh(ad.narrow(gates, 2 * hd, hd))
        o = ad.sigmoid(ad.narrow(gates, 3 * hd, hd))
        c2 = ad.add(ad.mul(f, c), ad.mul(i, g))
        h2 = ad.mul(o, ad.tanh(c2))
        return h2, c2


class Linear:
    def __init__(self, params, rng, in_dim, out_dim, name):
        self.w = ad.parameter(_init(rng, in_dim, out_dim), f"{name}.w")
        self.b = ad.parameter(np.zeros(out_dim), f"{name}.b")
        params[self.w.name] = self.w
        params[self.b.name] = self.b

    def __call__(self, x: Var) -> Var:
        return ad.add(ad.matmul(x, self.w), self.b)


class LayerNorm:
    def __init__(self, params, rng, dim, name):
        self.gain = ad.parameter(np.ones(dim), f"{name}.gain")
        self.bias = ad.parameter(np.zeros(dim), f"{name}.bias")
        params[self.gain.name] = self.gain
        params[self.bias.name] = self.bias

    def __call__(self, x: Var) -> Var:
        return ad.layer_norm(x, self.gain, self.bias)


class PolicyNet:
    """State encoder + recurrent action encoder with scaled dot-product scores.

    The same parametrization backs the forward policy (via masked
    log-softmax) and the critics of A2C/SAC (via raw scores).
    """

    def __init__(self, env, d: int = 128, hidden: int = 128, seed: int = 0, name: str = "pf"):
        self.env = env
        self.d = d
        self.hidden = hidden
        self.params: dict[str, Var] = {}
        rng = np.random.default_rng(seed)
        p, n = self.params, name

        n_atomic = len(env.atomic_names)
        self.action_embed = ad.parameter(_init(rng, n_atomic, hidden), f"{n}.aenc.embed")
        p[self.action_embed.name] = self.action_embed
        self.action_lstm = LSTMCell(p, rng, hidden, hidden, f"{n}.aenc.lstm")
        self.action_ln = LayerNorm(p, rng, hidden, f"{n}.aenc.ln")
        self.action_out = Linear(p, rng, hidden, d, f"{n}.aenc.out")

        if env.kind == "grid":
            in_dim = 2 * env.side
            self.fc1 = Linear(p, rng, in_dim, hidden, f"{n}.senc.fc1")
            self.fc2 = Linear(p, rng, hidden, hidden, f"{n}.senc.fc2")
            self.ln = LayerNorm(p, rng, hidden, f"{n}.senc.ln")
            self.fc3 = Linear(p, rng, hidden, d, f"{n}.senc.fc3")
        elif env.kind == "graph":
            in_dim = env.n_max * (env.n_max - 1) // 2 + env.n_max + 2
            self.fc1 = Linear(p, rng, in_dim, hidden, f"{n}.senc.fc1")
            self.fc2 = Linear(p, rng, hidden, hidden, f"{n}.senc.fc2")
            self.ln = LayerNorm(p, rng, hidden, f"{n}.senc.ln")
            self.fc3 = Linear(p, rng, hidden, d, f"{n}.senc.fc3")
        elif env.kind == "sequence":
            n_sym = len(env.alphabet)
            self.sym_embed = ad.parameter(_init(rng, n_sym, hidden), f"{n}.senc.embed")
            p[self.sym_embed.name] = self.sym_embed
            self.lstm1 = LSTMCell(p, rng, hidden, hidden, f"{n}.senc.lstm1")
            self.lstm2 = LSTMCell(p, rng, hidden, hidden, f"{n}.senc.lstm2")
            self.head1 = Linear(p, rng, hidden, hidden, f"{n}.senc.head1")
            self.ln = LayerNorm(p, rng, hidden, f"{n}.senc.ln")
            self.head2 = Linear(p, rng, hidden, d, f"{n}.senc.head2")
        else:
            raise ValueError(f"unsupported environment kind {env.kind!r}")

    # --- action encoder ------------------------------------------------------

    def action_embeddings(self, library: ActionLibrary) -> Var:
        """(|A|, d) matrix of action embeddings from atomic expansions."""
        exps = [a.expansion for a in library.actions]
        n = len(exps)
        t_max = max(len(e) for e in exps)
        h = Var(np.zeros((n, self.hidden)))
        c = Var(np.zeros((n, self.hidden)))
        for t in range(t_max):
            ids = np.array([e[t] if t < len(e) else 0 for e in exps])
            alive = np.array([[1.0] if t < len(e) else [0.0] for e in exps])
            x = ad.gather_rows(self.action_embed, ids)
            h2, c2 = self.action_lstm.step(x, h, c)
            if alive.all():
                h, c = h2, c2
            else:
                keep = 1.0 - alive
                h = ad.add(ad.mul(h2, alive), ad.mul(h, keep))
                c = ad.add(ad.mul(c2, alive), ad.mul(c, keep))
        return self.action_out(self.action_ln(h))

    # --- state encoders ------------------------------------------------------

    def state_features(self, states) -> np.ndarray:
        env = self.env
        if env.kind == "grid":
            side = env.side
            feats = np.zeros((len(states), 2 * side))
            for i, s in enumerate(states):
                feats[i, s.x] = 1.0
                feats[i, side + s.y] = 1.0
            return feats
        if env.kind == "graph":
            rows = []
            for s in states:
                nc = np.zeros(env.n_max + 1)
                nc[s.node_count] = 1.0
                connected = 1.0 if (s.node_count and env._neighbors_of_last(s)) else 0.0
                rows.append(np.concatenate([env.adjacency_upper(s), nc, [connected]]))
            return np.array(rows)
        raise ValueError("sequence states are encoded recurrently")

    def encode_states(self, states) -> Var:
        """(n, d) state embeddings for a batch of non-terminal states."""
        if self.env.kind == "sequence":
            return self._encode_prefixes(states)
        x = Var(self.state_features(states))
        h = ad.relu(self.fc1(x))
        h = ad.relu(self.fc2(h))
        return self.fc3(self.ln(h))

    def _encode_prefixes(self, states: list[SeqState]) -> Var:
        sym_to_id = {sym: i for i, sym in enumerate(self.env.alphabet)}
        lens = [len(s.symbols) for s in states]
        n, t_max = len(states), max(lens, default=0)
        h1 = Var(np.zeros((n, self.hidden)))
        c1 = Var(np.zeros((n, self.hidden)))
        h2 = Var(np.zeros((n, self.hidden)))
        c2 = Var(np.zeros((n, self.hidden)))
        for t in range(t_max):
            ids = np.array(
                [sym_to_id[s.symbols[t]] if t < lens[i] else 0 for i, s in enumerate(states)]
            )
            alive = np.array([[1.0] if t < lens[i] else [0.0] for i in range(n)])
            x = ad.gather_rows(self.sym_embed, ids)
            nh1, nc1 = self.lstm1.step(x, h1, c1)
            nh2, nc2 = self.lstm2.step(nh1, h2, c2)
            if alive.all():
                h1, c1, h2, c2 = nh1, nc1, nh2, nc2
            else:
                keep = 1.0 - alive
                h1 = ad.add(ad.mul(nh1, alive), ad.mul(h1, keep))
                c1 = ad.add(ad.mul(nc1, alive), ad.mul(c1, keep))
                h2 = ad.add(ad.mul(nh2, alive), ad.mul(h2, keep))
                c2 = ad.add(ad.mul(nc2, alive), ad.mul(c2, keep))
        h = ad.relu(self.head1(h2))
        return self.head2(self.ln(h))

    # --- scores and probabilities ---------------------------------------------

    def scores(self, states, library, action_emb: Var | None = None) -> tuple[Var, np.ndarray]:
        """Raw (n, |A|) scaled dot-product scores and the validity mask."""
        if action_emb is None:
            action_emb = self.action_embeddings(library)
        q = self.encode_states(states)
        logits = ad.mul(ad.matmul(q, ad.transpose(action_emb)), 1.0 / math.sqrt(self.d))
        mask = library.valid_mask_batch(states)
        if not mask.any(axis=1).all():
            raise AssertionError("a state with no valid action should be unreachable")
        return logits, mask

    def log_probs(self, states, library, action_emb: Var | None = None) -> tuple[Var, np.ndarray]:
        """Masked log-softmax policy over the library; invalid entries ~ -inf."""
        logits, mask = self.scores(states, library, action_emb)
        masked = ad.add(logits, np.where(mask, 0.0, NEG_INF))
        return ad.log_softmax(masked, axis=-1), mask

    # --- sampling and trajectory scoring --------------------------------------

    def sample_actions(self, states, library, rng, eps: float = 0.0,
                       action_emb_np: np.ndarray | None = None) -> list[int]:
        """One action id per state; eps-greedy mixes uniform over valid actions."""
        with ad.no_grad():
            emb = Var(action_emb_np) if action_emb_np is not None else None
            logp, mask = self.log_probs(states, library, emb)
        probs = np.exp(logp.data)
        ids = [a.id for a in library.actions]
        out = []
        for i in range(len(states)):
            valid = np.flatnonzero(mask[i])
            if eps > 0.0 and rng.random() < eps:
                j = valid[rng.integers(len(valid))]
            else:
                p = probs[i]
                p = p / p.sum()
                j = rng.choice(len(ids), p=p)
            out.append(ids[j])
        return out

    def traj_logprobs(self, trajectories, library, action_emb: Var | None = None) -> Var:
        """(n_traj, 1) Var of forward log-probabilities, one batched graph."""
        col = {a.id: j for j, a in enumerate(library.actions)}
        states, flat_cols, seg = [], [], []
        for ti, traj in enumerate(trajectories):
            for s, a in zip(traj.states[:-1], traj.actions):
                states.append(s)
                flat_cols.append(col[a])
                seg.append(ti)
        logp, mask = self.log_probs(states, library, action_emb)
        if not mask[np.arange(len(states)), flat_cols].all():
            raise ValueError("trajectory replays an action that is masked at its state")
        n_cols = len(library.actions)
        flat_idx = np.arange(len(states)) * n_cols + np.array(flat_cols)
        step_lp = ad.take_flat(logp, flat_idx)
        seg_mat = np.zeros((len(trajectories), len(states)))
        seg_mat[seg, np.arange(len(states))] = 1.0
        return ad.matmul(Var(seg_mat), ad.reshape(step_lp, (len(states), 1)))

    def traj_logprob(self, traj, library) -> float:
        with ad.no_grad():
            return float(self.traj_logprobs([traj], library).data[0, 0])


def rollout(env, library, policy, rng, eps: float, n: int, max_batch: int = 256):
    """Sample n complete trajectories in lockstep batches (no gradients)."""
    from .trajectory import Trajectory

    trajectories = []
    with ad.no_grad():
        emb_np = policy.action_embeddings(library).data
    for start in range(0, n, max_batch):
        b = min(max_batch, n - start)
        states = [env.initial_state() for _ in range(b)]
        step_states = [[s] for s in states]
        step_actions = [[] for _ in range(b)]
        alive = list(range(b))
        while alive:
            cur = [states[i] for i in alive]
            acts = policy.sample_actions(cur, library, rng, eps, action_emb_np=emb_np)
            next_alive = []
            for i, a in zip(alive, acts):
                s2 = library.apply_action(states[i], a)
                states[i] = s2
                step_states[i].append(s2)
                step_actions[i].append(a)
                if not env.is_terminal(s2):
                    next_alive.append(i)
            alive = next_alive
        for i in range(b):
            trajectories.append(
                Trajectory(
                    step_states[i],
                    step_actions[i],
                    env.reward(states[i]),
                    library.generation,
                )
            )
    return trajectories
