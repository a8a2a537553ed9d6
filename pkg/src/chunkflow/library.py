"""The evolving global action set: atomic actions plus discovered chunks.

Chunks store fully flattened atomic expansions. Terminal actions (exit /
end-of-string / end-of-graph markers) never appear inside a chunk. Atomic
ids are fixed forever; chunk ids are never reused, and every mutation bumps
the library generation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .envs import InvalidActionError


@dataclass(frozen=True)
class Action:
    id: int
    expansion: tuple[int, ...]  # atomic ids; length 1 iff atomic
    is_terminal_action: bool = False

    def __post_init__(self):
        if not self.expansion:
            raise ValueError("empty expansion")


class DuplicateChunk(Exception):
    """Signals that an identical expansion is already in the library."""


class ActionLibrary:
    def __init__(self, env):
        self.env = env
        self.atomics = [
            Action(i, (i,), is_terminal_action=(i in env.terminal_actions))
            for i in range(len(env.atomic_names))
        ]
        self.chunks: list[Action] = []
        self.generation = 0
        self._next_id = len(self.atomics)
        self._by_id = {a.id: a for a in self.atomics}
        self._expansions = {a.expansion for a in self.atomics}
        self._mask_cache: dict = {}
        self._parent_cache: dict = {}

    def __len__(self):
        return len(self.atomics) + len(self.chunks)

    @property
    def n_atomic(self) -> int:
        return len(self.atomics)

    @property
    def actions(self) -> list[Action]:
        return self.atomics + self.chunks

    def action(self, action_id: int) -> Action:
        try:
            return self._by_id[action_id]
        except KeyError:
            raise KeyError(f"unknown action id {action_id}") from None

    def expand(self, action_id: int) -> tuple[int, ...]:
        return self.action(action_id).expansion

    # alias: the declared input contract of the recurrent action encoder
    action_token_sequence = expand

    def action_name(self, action_id: int) -> str:
        a = self.action(action_id)
        if len(a.expansion) == 1:
            return self.env.atomic_names[a.expansion[0]]
        return "+".join(self.env.atomic_names[i] for i in a.expansion)

    def _validate_expansion(self, expansion) -> tuple[int, ...]:
        expansion = tuple(int(i) for i in expansion)
        if len(expansion) < 2:
            raise ValueError("chunk expansion must have length >= 2")
        n_atomic = len(self.atomics)
        for i in expansion:
            if not 0 <= i < n_atomic:
                raise ValueError(f"expansion references non-atomic id {i}")
            if i in self.env.terminal_actions:
                raise ValueError("terminal actions are not allowed inside chunks")
        return expansion

    def _invalidate_caches(self):
        self.generation += 1
        self._mask_cache.clear()
        self._parent_cache.clear()

    def add_chunk(self, expansion) -> Action:
        """Append one chunk (Increment path); raises DuplicateChunk on repeats."""
        expansion = self._validate_expansion(expansion)
        if expansion in self._expansions:
            raise DuplicateChunk(expansion)
        a = Action(self._next_id, expansion)
        self._next_id += 1
        self.chunks.append(a)
        self._by_id[a.id] = a
        self._expansions.add(expansion)
        self._invalidate_caches()
        return a

    def replace_chunks(self, new_expansions) -> None:
        """Swap the whole chunk set (Replace path); atomics untouched."""
        cleaned = []
        seen = set()
        for exp in new_expansions:
            exp = self._validate_expansion(exp)
            if exp in seen or exp in {a.expansion for a in self.atomics}:
                continue
            seen.add(exp)
            cleaned.append(exp)
        for c in self.chunks:
            del self._by_id[c.id]
            self._expansions.discard(c.expansion)
        self.chunks = []
        for exp in cleaned:
            a = Action(self._next_id, exp)
            self._next_id += 1
            self.chunks.append(a)
            self._by_id[a.id] = a
            self._expansions.add(exp)
        self._invalidate_caches()

    # --- feasibility and application ---------------------------------------

    def valid_actions(self, s) -> list[bool]:
        """Mask over self.actions: valid iff the full expansion replays cleanly."""
        key = s
        cached = self._mask_cache.get(key)
        if cached is not None:
            return cached
        env = self.env
        atomic_valid = set(env.valid_atomic_actions(s))
        mask = []
        for a in self.actions:
            if len(a.expansion) == 1:
                mask.append(a.expansion[0] in atomic_valid)
                continue
            cur = s
            ok = True
            for step in a.expansion:
                if env.is_terminal(cur) or step not in env.valid_atomic_actions(cur):
                    ok = False
                    break
                cur = env.apply_atomic(cur, step)
            mask.append(ok)
        self._mask_cache[key] = mask
        return mask

    def apply_action(self, s, action_id: int):
        env = self.env
        cur = s
        for step in self.expand(action_id):
            cur = env.apply_atomic(cur, step)
        return cur

    def unapply_action(self, s, action: Action):
        """Exact inverse of apply_action, or None when no such parent exists."""
        cur = s
        for step in reversed(action.expansion):
            cur = self.env.unapply_atomic(cur, step)
            if cur is None:
                return None
        return cur

    def parent_edges(self, s) -> list[tuple[object, Action]]:
        """All (parent state, action) edges into s under the current library."""
        cached = self._parent_cache.get(s)
        if cached is not None:
            return cached
        env = self.env
        edges = []
        if env.is_terminal(s):
            # a terminal-flagged state is reached only by its terminal atomic
            for a in self.atomics:
                if a.is_terminal_action:
                    parent = self.unapply_action(s, a)
                    if parent is not None:
                        edges.append((parent, a))
        else:
            for a in self.actions:
                if a.is_terminal_action:
                    continue
                parent = self.unapply_action(s, a)
                if parent is None:
                    continue
                idx = self.actions.index(a)
                if self.valid_actions(parent)[idx]:
                    edges.append((parent, a))
        self._parent_cache[s] = edges
        return edges

    def valid_mask_batch(self, states) -> "np.ndarray":
        """Vectorized (n_states, n_actions) feasibility mask.

        Grid and sequence masks reduce to closed-form bounds checks because
        atomic moves are monotone; graphs fall back to cached replay.
        """
        env = self.env
        acts = self.actions
        n = len(states)
        if env.kind == "grid":
            disp = np.array(
                [
                    (
                        sum(1 for i in a.expansion if i == env.RIGHT),
                        sum(1 for i in a.expansion if i == env.UP),
                    )
                    for a in acts
                ]
            )
            is_term = np.array([a.is_terminal_action for a in acts])
            xs = np.array([s.x for s in states])[:, None]
            ys = np.array([s.y for s in states])[:, None]
            mask = (xs + disp[:, 0] <= env.side - 1) & (ys + disp[:, 1] <= env.side - 1)
            mask |= is_term[None, :]
            # non-terminal atomics/chunks never contain the exit move, so the
            # bounds check alone decides feasibility
            return mask
        if env.kind == "sequence":
            lengths = np.array([len(a.expansion) for a in acts])
            is_term = np.array([a.is_terminal_action for a in acts])
            cur = np.array([len(s.symbols) for s in states])[:, None]
            mask = cur + lengths[None, :] <= env.max_len
            mask |= is_term[None, :]
            return mask
        return np.array([self.valid_actions(s) for s in states])

    # --- persistence ---------------------------------------------------------

    def snapshot(self, added_at: dict[int, int] | None = None) -> dict:
        added_at = added_at or {}
        return {
            "env_kind": self.env.kind,
            "atomic_names": list(self.env.atomic_names),
            "generation": self.generation,
            "next_id": self._next_id,
            "chunks": [
                {
                    "id": c.id,
                    "expansion": [self.env.atomic_names[i] for i in c.expansion],
                    "added_at_iteration": added_at.get(c.id, -1),
                }
                for c in self.chunks
            ],
        }

    def save(self, path, added_at=None) -> None:
        with open(path, "w") as f:
            json.dump(self.snapshot(added_at), f, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path, env) -> "ActionLibrary":
        with open(path) as f:
            snap = json.load(f)
        if snap["atomic_names"] != list(env.atomic_names):
            raise InvalidActionError(
                "library snapshot atomic alphabet does not match the environment"
            )
        lib = cls(env)
        name_to_id = {n: i for i, n in enumerate(env.atomic_names)}
        for rec in snap["chunks"]:
            exp = tuple(name_to_id[n] for n in rec["expansion"])
            a = Action(rec["id"], exp)
            lib.chunks.append(a)
            lib._by_id[a.id] = a
            lib._expansions.add(exp)
        lib._next_id = snap["next_id"]
        lib.generation = snap["generation"]
        return lib
