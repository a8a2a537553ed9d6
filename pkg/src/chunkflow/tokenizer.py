"""Chunk discovery: corpus building, BPE merges, and chunking triggers.

Three mechanisms mutate the action library:
  - increment_step: add the single most frequent adjacent pair as one chunk,
  - replace_step: rebuild the whole chunk set from up to M BPE merges over
    the atomic flattening of the corpus,
  - random_merge_step: ablation stitching two random library actions.

Ties in pair counts break deterministically: highest count first, then the
lexicographically smallest flattened atomic expansion.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .library import ActionLibrary, DuplicateChunk


@dataclass
class ActionCorpus:
    sequences: list[list[int]]
    tags: list[str] = field(default_factory=list)  # "policy" | "buffer" per sequence

    def __post_init__(self):
        if not self.tags:
            self.tags = ["policy"] * len(self.sequences)


def strip_terminals(sequences, library: ActionLibrary) -> list[list[int]]:
    terminal_ids = {a.id for a in library.atomics if a.is_terminal_action}
    return [[i for i in seq if i not in terminal_ids] for seq in sequences]


def build_corpus(library, sample_policy, sample_buffer, n: int, p: float) -> ActionCorpus:
    """Mix floor(p*n) buffer-derived sequences with fresh policy rollouts.

    sample_policy(k) and sample_buffer(k) return k action-id sequences;
    sample_buffer may be None (or report emptiness by returning []), in
    which case everything comes from the policy.
    """
    if n <= 0:
        raise ValueError("corpus size must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("buffer proportion must be in [0, 1]")
    n_buf = math.floor(p * n) if sample_buffer is not None else 0
    buf_seqs = sample_buffer(n_buf) if n_buf > 0 else []
    n_buf = len(buf_seqs)
    pol_seqs = sample_policy(n - n_buf)
    sequences = strip_terminals(pol_seqs + buf_seqs, library)
    tags = ["policy"] * len(pol_seqs) + ["buffer"] * len(buf_seqs)
    return ActionCorpus(sequences, tags)


def pair_frequencies(corpus: ActionCorpus) -> dict[tuple[int, int], int]:
    counts: Counter = Counter()
    for seq in corpus.sequences:
        counts.update(zip(seq, seq[1:]))
    return dict(counts)


def _ranked_pairs(counts: dict, expansion_of) -> list[tuple[int, int]]:
    return sorted(
        counts,
        key=lambda p: (-counts[p], expansion_of(p[0]) + expansion_of(p[1])),
    )


def increment_step(library: ActionLibrary, corpus: ActionCorpus):
    """Add the most frequent novel adjacent pair as one flattened chunk.

    Returns the new Action, or None when every candidate pair duplicates an
    existing library entry (the library is left unchanged).
    """
    counts = pair_frequencies(corpus)
    for a, b in _ranked_pairs(counts, library.expand):
        expansion = library.expand(a) + library.expand(b)
        try:
            return library.add_chunk(expansion)
        except DuplicateChunk:
            continue
    return None


def bpe_merges(sequences, m: int) -> list[tuple[int, ...]]:
    """Run standard BPE for up to m merges over atomic-id sequences.

    Returns the flattened expansions of the merge tokens in merge order.
    Each sequence element is an atomic id; tokens are tuples of atomic ids.
    """
    toks = [[(i,) for i in seq] for seq in sequences]
    merges: list[tuple[int, ...]] = []
    for _ in range(m):
        counts: Counter = Counter()
        for seq in toks:
            counts.update(zip(seq, seq[1:]))
        if not counts:
            break
        best = min(counts, key=lambda p: (-counts[p], p[0] + p[1]))
        merged = best[0] + best[1]
        merges.append(merged)
        for si, seq in enumerate(toks):
            out = []
            i = 0
            while i < len(seq):
                if i + 1 < len(seq) and seq[i] == best[0] and seq[i + 1] == best[1]:
                    out.append(merged)
                    i += 2
                else:
                    out.append(seq[i])
                    i += 1
            toks[si] = out
    return merges


def replace_step(library: ActionLibrary, corpus: ActionCorpus, m: int) -> None:
    """Rebuild the chunk set from up to m BPE merges on the atomic flattening."""
    if m < 1:
        raise ValueError("m must be >= 1")
    flat = [
        [i for tok in seq for i in library.expand(tok)] for seq in corpus.sequences
    ]
    merges = bpe_merges(flat, m)
    library.replace_chunks([t for t in merges if len(t) >= 2])


def random_merge_step(library: ActionLibrary, rng):
    """Ablation: stitch two uniform-random non-terminal actions together."""
    pool = [a for a in library.actions if not a.is_terminal_action]
    if not pool:
        raise ValueError("library has no non-terminal actions")
    first = pool[rng.integers(len(pool))]
    second = pool[rng.integers(len(pool))]
    try:
        return library.add_chunk(first.expansion + second.expansion)
    except DuplicateChunk:
        return None


class EveryK:
    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k

    def should_chunk(self, iteration: int, recent_loss: float | None = None) -> bool:
        return iteration % self.k == 0


class LossThreshold:
    """Fires when the smoothed loss dips under a threshold that then decays."""

    def __init__(self, initial: float, decay: float = 0.75):
        if not 0.0 < decay < 1.0:
            raise ValueError("decay must be in (0, 1)")
        self.threshold = initial
        self.decay = decay

    def should_chunk(self, iteration: int, recent_loss: float | None) -> bool:
        if recent_loss is None or not recent_loss < self.threshold:
            return False
        self.threshold *= self.decay
        return True


def make_trigger(spec: str):
    """Parse 'every:K' or 'loss:INITIAL[:DECAY]' trigger descriptions."""
    kind, _, rest = spec.partition(":")
    if kind == "every":
        return EveryK(int(rest))
    if kind == "loss":
        parts = rest.split(":")
        initial = float(parts[0])
        decay = float(parts[1]) if len(parts) > 1 else 0.75
        return LossThreshold(initial, decay)
    raise ValueError(f"unknown trigger spec {spec!r}")
