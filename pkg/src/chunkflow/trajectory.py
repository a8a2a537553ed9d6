"""Complete trajectories over the (possibly chunked) action library."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Trajectory:
    states: list  # s_0 .. s_n with s_n terminal-marked
    actions: list[int]  # library action ids, one per transition
    reward: float  # base reward R(x), exponent applied by trainers
    generation: int = 0  # library generation the ids refer to
    behavior_logprob: float | None = None

    @property
    def terminal(self):
        return self.states[-1]

    def __len__(self):
        return len(self.actions)


def rollout_trajectory(env, library, action_ids, base_state=None) -> Trajectory:
    """Materialize states by replaying action ids from the initial state."""
    s = env.initial_state() if base_state is None else base_state
    states = [s]
    for a in action_ids:
        s = library.apply_action(s, a)
        states.append(s)
    if not env.is_terminal(s):
        raise ValueError("action sequence does not end in a terminal state")
    return Trajectory(states, list(action_ids), env.reward(s), library.generation)
