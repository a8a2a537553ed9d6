"""How the fixed backward policies distribute probability over parses.

Once a library contains multi-symbol chunks, a terminal string has many
parses (trajectories). The weighted-count backward policy assigns a parse
tau the probability e^{lambda |tau|} / N_lambda(x):

  * lambda = 0   — maximum entropy: every parse equally likely;
  * lambda < 0   — shorter parses favoured, exponentially in token count;
  * lambda -> -inf — only minimum-token parses survive.

This demo enumerates all parses of a string and compares the closed-form
probabilities with empirical frequencies from the stepwise sampler.

Runtime: a few seconds.
"""

from collections import Counter

import numpy as np

from chunkflow.backward import BackwardPolicy
from chunkflow.envs import SeqState, SequenceEnv
from chunkflow.library import ActionLibrary


def enumerate_parses(tokens, symbols):
    if not symbols:
        yield ()
        return
    for t in tokens:
        if symbols[: len(t)] == t:
            for rest in enumerate_parses(tokens, symbols[len(t):]):
                yield (t,) + rest


class TwoSymbolStrings(SequenceEnv):
    """Minimal concrete sequence environment with a flat reward."""

    def reward(self, x):
        return 1.0


env = TwoSymbolStrings(list("ab"), max_len=8)
library = ActionLibrary(env)
library.add_chunk((0, 1))      # "ab"
library.add_chunk((0, 1, 0, 1))  # "abab"

word = tuple("abab")
x = SeqState(word, done=True)
rng = np.random.default_rng(0)

for lam in (0.0, -1.0, -5.0):
    kind = "maxent" if lam == 0.0 else "shortparse"
    bw = BackwardPolicy(env, library, kind, lam=lam)
    tokens = [t for t, _ in bw._tokens()]
    parses = list(enumerate_parses(tokens, word))
    weights = np.array([np.exp(lam * len(p)) for p in parses])
    probs = weights / weights.sum()

    counts = Counter()
    n = 20_000
    for _ in range(n):
        traj = bw.sample(x, rng)
        parse = tuple(
            tuple(env.alphabet[i] for i in library.expand(a))
            for a in traj.actions if not library.action(a).is_terminal_action
        )
        counts[parse] += 1

    print(f"lambda = {lam}")
    for p, prob in sorted(zip(parses, probs), key=lambda z: -z[1]):
        pretty = " | ".join("".join(t) for t in p)
        print(f"  {pretty:<24} closed form {prob:.4f}   "
              f"sampled {counts[p] / n:.4f}")
    print()
