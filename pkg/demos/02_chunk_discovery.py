"""Grow an action library by byte-pair chunking and watch parses shrink.

We hand the tokenizer a corpus of action sequences that favours a few
repeated patterns, then alternate between the two discovery mechanisms:

  * increment: add the single most frequent adjacent pair as one new chunk;
  * replace: rebuild the whole chunk set from the most frequent BPE merges.

After each step we re-parse a probe string with the shortest-parse dynamic
program. As chunks accumulate, the minimum number of tokens needed to spell
the same object monotonically drops.

Runtime: a second.
"""

import numpy as np

from chunkflow.envs import SequenceEnv
from chunkflow.library import ActionLibrary
from chunkflow.metrics import min_parse_tokens
from chunkflow.tokenizer import ActionCorpus, increment_step, replace_step

env = SequenceEnv(list("ACGU"), max_len=24)
library = ActionLibrary(env)
ids = {s: i for i, s in enumerate(env.alphabet)}

rng = np.random.default_rng(0)
motif = "GCAU"
corpus_strings = []
for _ in range(200):
    s = "".join(motif if rng.random() < 0.6 else
                "".join(rng.choice(list("ACGU"), size=4)) for _ in range(3))
    corpus_strings.append(s)
corpus = ActionCorpus([[ids[c] for c in s] for s in corpus_strings])


def tokens_of(lib):
    out = [a for a in env.alphabet]
    out += ["".join(env.alphabet[i] for i in c.expansion) for c in lib.chunks]
    return out


probe = motif * 3
print(f"probe object: {probe}")
print(f"{'step':<22} {'library chunks':<42} min tokens")
print(f"{'(atomic only)':<22} {'-':<42} "
      f"{min_parse_tokens(tokens_of(library), probe)}")

for step in range(1, 6):
    added = increment_step(library, corpus)
    chunks = " ".join("".join(env.alphabet[i] for i in c.expansion)
                      for c in library.chunks)
    print(f"{'increment #' + str(step):<22} {chunks:<42} "
          f"{min_parse_tokens(tokens_of(library), probe)}")

print("\nnow rebuild from scratch with an 8-merge vocabulary (replace):")
replace_step(library, corpus, m=8)
chunks = " ".join("".join(env.alphabet[i] for i in c.expansion)
                  for c in library.chunks)
print(f"{'replace (m=8)':<22} {chunks:<42} "
      f"{min_parse_tokens(tokens_of(library), probe)}")
