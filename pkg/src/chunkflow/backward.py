"""Backward trajectory policies: uniform-parent, MaxEnt and ShortParse.

ShortParse weights a parse tau of a terminal string by exp(lambda*|tau|),
normalized by the weighted tokenization count N_lambda computed with a
suffix-token dynamic program in log space. lambda = 0 recovers the
maximum-entropy backward policy (uniform over parses); lambda < 0 biases
toward minimum-token parses. Uniform-parent works on every environment and
is uniform over incoming (parent, action) edges of each state.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .envs import SeqState
from .library import ActionLibrary
from .trajectory import Trajectory

KINDS = ("uniform", "maxent", "shortparse")


class BackwardPolicy:
    def __init__(self, env, library: ActionLibrary, kind: str = "uniform", lam: float = -5.0):
        if kind not in KINDS:
            raise ValueError(f"unknown backward policy kind {kind!r}")
        if kind in ("maxent", "shortparse") and env.kind != "sequence":
            raise ValueError(f"{kind} backward policy requires a sequence environment")
        self.env = env
        self.library = library
        self.kind = kind
        self.lam = 0.0 if kind == "maxent" else lam
        self._table_cache: dict = {}
        self._token_cache: tuple[int, list] | None = None

    # --- token bookkeeping (sequence environments) --------------------------

    def _tokens(self) -> list[tuple[tuple[str, ...], int]]:
        """Non-terminal library actions as (symbol tuple, action id)."""
        gen = self.library.generation
        if self._token_cache is not None and self._token_cache[0] == gen:
            return self._token_cache[1]
        env = self.env
        tokens = [
            (tuple(env.alphabet[i] for i in a.expansion), a.id)
            for a in self.library.actions
            if not a.is_terminal_action
        ]
        self._token_cache = (gen, tokens)
        return tokens

    def n_lambda_table(self, symbols: tuple[str, ...]) -> np.ndarray:
        """log N_lambda for every prefix of symbols; entry 0 is log 1 = 0."""
        key = (symbols, self.library.generation, self.lam)
        cached = self._table_cache.get(key)
        if cached is not None:
            return cached
        tokens = self._tokens()
        n = len(symbols)
        log_n = np.full(n + 1, -np.inf)
        log_n[0] = 0.0
        for i in range(1, n + 1):
            terms = [
                log_n[i - len(t)]
                for t, _ in tokens
                if len(t) <= i and symbols[i - len(t) : i] == t
            ]
            if terms:
                log_n[i] = self.lam + logsumexp(terms)
        self._table_cache[key] = log_n
        return log_n

    def shortparse_step_logprob(self, prefix: tuple[str, ...], token: tuple[str, ...]) -> float:
        """log P_B(prefix | prefix+token) = lambda + log N(prefix) - log N(prefix+token)."""
        if token not in {t for t, _ in self._tokens()}:
            raise ValueError(f"{token!r} is not a library token")
        full = prefix + token
        log_n = self.n_lambda_table(full)
        return self.lam + log_n[len(prefix)] - log_n[len(full)]

    # --- trajectory-level interface -----------------------------------------

    def traj_logprob(self, traj: Trajectory) -> float:
        """log P_B(tau | x), the terminal undo step contributing log 1."""
        env, lib = self.env, self.library
        x = traj.terminal
        if not env.is_terminal(x):
            raise ValueError("trajectory does not end in a terminal state")
        if self.kind == "uniform":
            total = 0.0
            for s in traj.states[1:]:
                n_edges = len(lib.parent_edges(s))
                if n_edges == 0:
                    raise ValueError(f"state {s} has no parent edges")
                total -= math.log(n_edges)
            return total
        # ShortParse / MaxEnt: lambda * (#non-terminal tokens) - log N(x)
        n_tokens = sum(
            1 for a in traj.actions if not lib.action(a).is_terminal_action
        )
        log_n = self.n_lambda_table(x.symbols)
        return self.lam * n_tokens - float(log_n[len(x.symbols)])

    def sample(self, x, rng) -> Trajectory:
        env, lib = self.env, self.library
        if not env.is_terminal(x):
            raise ValueError("backward sampling starts from a terminal state")
        if self.kind == "uniform":
            return self._sample_uniform(x, rng)
        return self._sample_shortparse(x, rng)

    def _sample_uniform(self, x, rng) -> Trajectory:
        env, lib = self.env, self.library
        # undo the unique terminal step first
        edges = lib.parent_edges(x)
        assert len(edges) == 1, "terminal-marked states have a unique parent edge"
        states = [x]
        actions = []
        s, a = edges[0]
        states.append(s)
        actions.append(a.id)
        s0 = env.initial_state()
        while s != s0:
            edges = lib.parent_edges(s)
            assert edges, f"dead end while walking back from {s}"
            s, a = edges[rng.integers(len(edges))]
            states.append(s)
            actions.append(a.id)
        return Trajectory(
            states[::-1], actions[::-1], env.reward(x), lib.generation
        )

    def _sample_shortparse(self, x, rng) -> Trajectory:
        env, lib = self.env, self.library
        symbols = x.symbols
        log_n = self.n_lambda_table(symbols)
        tokens = self._tokens()
        eos = next(a for a in lib.atomics if a.is_terminal_action)
        actions = [eos.id]
        i = len(symbols)
        rev_tokens = []
        while i > 0:
            cands = [
                (t, aid) for t, aid in tokens
                if len(t) <= i and symbols[i - len(t) : i] == t
            ]
            assert cands, "atomics are library tokens, so a suffix always exists"
            logw = np.array([self.lam + log_n[i - len(t)] for t, _ in cands])
            w = np.exp(logw - logsumexp(logw))
            pick = rng.choice(len(cands), p=w / w.sum())
            t, aid = cands[pick]
            rev_tokens.append(aid)
            i -= len(t)
        action_ids = rev_tokens[::-1] + actions
        states = [SeqState(())]
        for aid in action_ids:
            states.append(lib.apply_action(states[-1], aid))
        return Trajectory(states, action_ids, env.reward(x), lib.generation)
