"""Sequential-construction MDPs: FractalGrid, BitSequence, SyntheticRNA, GraphBuild.

Every environment builds objects one atomic action at a time over a DAG of
states and exposes: the atomic action alphabet, validity rules, transitions
(and their exact inverses, used by the uniform-parent backward policy),
strictly positive terminal rewards, and full enumeration of terminal states
for small instances.
"""

from __future__ import annotations

import math
from typing import Iterator, NamedTuple

import numpy as np

REWARD_FLOOR = 1e-10


class GridState(NamedTuple):
    x: int
    y: int
    exited: bool = False


class SeqState(NamedTuple):
    symbols: tuple[str, ...]
    done: bool = False


class GraphState(NamedTuple):
    node_count: int
    edges: frozenset  # frozenset of (lo, hi) 1-based node pairs
    ended: bool = False


class InvalidActionError(ValueError):
    pass


def fractal_landscape_grid(side: int, r0: float, r1: float, r2: float) -> np.ndarray:
    """Dense side x side reward table with a self-similar peak layout.

    Requires side = 2**k + 1 with k >= 3. Cell values are r0, r0+r1 or
    r0+r1+r2; the returned table is indexed [y, x].
    """
    k = round(math.log2(side - 1))
    if side < 9 or 2**k + 1 != side:
        raise ValueError(f"side must be 2**k+1 with k>=3, got {side}")
    grid = r0 * np.ones((side, side))
    depth = int(np.log(side) / np.log(2)) - 2

    def fill_r2(x, y, current_size, current_depth):
        if current_depth == 0 or current_size < 1:
            return
        max_y = min(y, side - 1)
        max_x = min(x + current_size - 1, side - 1)

        grid[max_y - 1, x + 1] = r0 + r1 + r2
        grid[max_y - 1, x] = r0 + r1
        grid[max_y, x + 1] = r0 + r1
        grid[max_y, x] = r0 + r1

        if current_depth < depth:
            grid[max_y - 1, max_x - 1] = r0 + r1 + r2
            grid[max_y - 1, max_x] = r0 + r1
            grid[max_y, max_x - 1] = r0 + r1
            grid[max_y, max_x] = r0 + r1

            grid[y - current_size + 2, x + 1] = r0 + r1 + r2
            grid[y - current_size + 2, x] = r0 + r1
            grid[y - current_size + 1, x + 1] = r0 + r1
            grid[y - current_size + 1, x] = r0 + r1

        next_size = current_size // 2
        fill_r2(x + next_size, y - next_size, next_size, current_depth - 1)

    fill_r2(0, side - 1, side, depth)
    return grid[::-1].copy()


def bitseq_max_word_tiling(s: str, words: list[str]) -> int:
    """Maximum number of non-overlapping 8-symbol word placements in s."""
    wordset = set(words)
    if any(len(w) != 8 for w in wordset):
        raise ValueError("all words must have length 8")
    n = len(s)
    dp = [0] * (n + 1)
    for i in range(1, n + 1):
        dp[i] = dp[i - 1]
        if i >= 8 and s[i - 8 : i] in wordset:
            dp[i] = max(dp[i], dp[i - 8] + 1)
    return dp[n]


def graph_cycle_rank(g: GraphState) -> int:
    """Circuit rank |E| - |V| + #components over the nodes added so far."""
    n = g.node_count
    if n == 0:
        return 0
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    comps = n
    for a, b in g.edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            comps -= 1
    return len(g.edges) - n + comps


class FractalGrid:
    """2-D grid walked with UP/RIGHT, exitable anywhere, fractal reward table."""

    kind = "grid"
    UP, RIGHT, EXIT = 0, 1, 2

    def __init__(self, side=65, r0=0.1, r1=0.5, r2=2.0):
        self.side = side
        self.table = fractal_landscape_grid(side, r0, r1, r2)
        self.max_reward = r0 + r1 + r2
        self.atomic_names = ["UP", "RIGHT", "<EXIT>"]
        self.terminal_actions = frozenset([self.EXIT])

    def initial_state(self) -> GridState:
        return GridState(0, 0)

    def is_terminal(self, s: GridState) -> bool:
        return s.exited

    def valid_atomic_actions(self, s: GridState) -> list[int]:
        if s.exited:
            raise InvalidActionError("terminal state has no actions")
        acts = []
        if s.y < self.side - 1:
            acts.append(self.UP)
        if s.x < self.side - 1:
            acts.append(self.RIGHT)
        acts.append(self.EXIT)
        return acts

    def apply_atomic(self, s: GridState, a: int) -> GridState:
        if a not in self.valid_atomic_actions(s):
            raise InvalidActionError(f"action {a} invalid at {s}")
        if a == self.UP:
            return GridState(s.x, s.y + 1)
        if a == self.RIGHT:
            return GridState(s.x + 1, s.y)
        return GridState(s.x, s.y, True)

    def unapply_atomic(self, s: GridState, a: int):
        if a == self.EXIT:
            return GridState(s.x, s.y) if s.exited else None
        if s.exited:
            return None
        if a == self.UP:
            return GridState(s.x, s.y - 1) if s.y > 0 else None
        if a == self.RIGHT:
            return GridState(s.x - 1, s.y) if s.x > 0 else None
        return None

    def reward(self, x: GridState) -> float:
        if not x.exited:
            raise InvalidActionError("reward defined only for terminal states")
        return float(self.table[x.y, x.x])

    def is_mode(self, x: GridState) -> bool:
        return self.reward(x) == self.max_reward

    def enumerate_terminal_states(self) -> Iterator[tuple[GridState, float]]:
        for y in range(self.side):
            for x in range(self.side):
                s = GridState(x, y, True)
                yield s, self.reward(s)

    def distance(self, a: GridState, b: GridState) -> int:
        return int(a.x != b.x) + int(a.y != b.y)


class SequenceEnv:
    """Common machinery for left-to-right string construction with <EOS>."""

    kind = "sequence"

    def __init__(self, alphabet: list[str], max_len: int):
        self.alphabet = list(alphabet)
        self.max_len = max_len
        self.atomic_names = self.alphabet + ["<EOS>"]
        self.eos = len(self.alphabet)
        self.terminal_actions = frozenset([self.eos])

    def initial_state(self) -> SeqState:
        return SeqState(())

    def is_terminal(self, s: SeqState) -> bool:
        return s.done

    def valid_atomic_actions(self, s: SeqState) -> list[int]:
        if s.done:
            raise InvalidActionError("terminal state has no actions")
        if len(s.symbols) >= self.max_len:
            return [self.eos]
        return list(range(len(self.alphabet))) + [self.eos]

    def apply_atomic(self, s: SeqState, a: int) -> SeqState:
        if a not in self.valid_atomic_actions(s):
            raise InvalidActionError(f"action {a} invalid at {s}")
        if a == self.eos:
            return SeqState(s.symbols, True)
        return SeqState(s.symbols + (self.alphabet[a],))

    def unapply_atomic(self, s: SeqState, a: int):
        if a == self.eos:
            return SeqState(s.symbols) if s.done else None
        if s.done or not s.symbols or s.symbols[-1] != self.alphabet[a]:
            return None
        return SeqState(s.symbols[:-1])

    def string(self, s: SeqState) -> str:
        return "".join(s.symbols)

    def enumerate_terminal_states(self) -> Iterator[tuple[SeqState, float]]:
        total = sum(len(self.alphabet) ** k for k in range(self.max_len + 1))
        if total > 10**7:
            raise ValueError(f"enumeration budget exceeded: {total} terminal states")
        stack = [()]
        while stack:
            syms = stack.pop()
            x = SeqState(syms, True)
            yield x, self.reward(x)
            if len(syms) < self.max_len:
                for c in reversed(self.alphabet):
                    stack.append(syms + (c,))

    def distance(self, a: SeqState, b: SeqState) -> int:
        # hamming on symbols; length difference counts per missing position
        la, lb = len(a.symbols), len(b.symbols)
        d = abs(la - lb)
        d += sum(1 for u, v in zip(a.symbols, b.symbols) if u != v)
        return d


class BitSequence(SequenceEnv):
    """Binary strings rewarded by the densest non-overlapping word tiling."""

    DEFAULT_WORDS = ["00000000", "11111111", "11110000", "00001111", "00111100"]

    def __init__(self, length=16, words=None):
        if length % 8 != 0:
            raise ValueError("length must be divisible by 8")
        super().__init__(["0", "1"], length)
        self.words = list(words) if words is not None else list(self.DEFAULT_WORDS)

    def reward(self, x: SeqState) -> float:
        if not x.done:
            raise InvalidActionError("reward defined only for terminal states")
        tiles = bitseq_max_word_tiling(self.string(x), self.words)
        return max(tiles / (self.max_len / 8), REWARD_FLOOR)

    def is_mode(self, x: SeqState) -> bool:
        return self.reward(x) == 1.0


# Disjoint motif sets built from shared 3-symbol blocks, so chunks learned on
# one task remain useful on the others (stand-in for the L14_RNA1/2/3 oracles).
RNA_MOTIF_SETS = {
    1: ["GCAUUCGGACUGAA", "UUCGCACUGGGAAA", "GGACUGGCAUUCAA"],
    2: ["CUGGGAUUCGCAAA", "GCAGGAUUCCUGAA", "UUCCUGGCAGGAAA"],
    3: ["GGAUUCCUGGCAAA", "CUGUUCGGAGCAAA", "GCACUGUUCGGAAA"],
}


class SyntheticRNA(SequenceEnv):
    """Motif-distance reward over {A,C,G,U}, scaled between 1e-10 and 1."""

    def __init__(self, length=14, motifs=None, beta=0.1, task=1):
        super().__init__(["A", "C", "G", "U"], length)
        if motifs is None:
            motifs = RNA_MOTIF_SETS[task]
        if any(len(m) != length for m in motifs):
            raise ValueError("motifs must match the sequence length")
        self.motifs = list(motifs)
        self.beta = beta
        self.floor = REWARD_FLOOR

    def reward(self, x: SeqState) -> float:
        if not x.done:
            raise InvalidActionError("reward defined only for terminal states")
        s = self.string(x)
        if len(s) != self.max_len:
            return self.floor
        d = min(sum(1 for a, b in zip(s, m) if a != b) for m in self.motifs)
        return self.floor + (1.0 - self.floor) * math.exp(-self.beta * d)

    def is_mode(self, x: SeqState) -> bool:
        return self.reward(x) >= 0.85


class GraphBuild:
    """Undirected graphs built node by node with edges relative to the last node.

    Action rules: an empty graph only admits ADD-NODE; with one node the
    choice is <EOG> or ADD-NODE; with more nodes, an unconnected last node
    must be wired to a previous one, while a connected last node may end,
    add a node, or add an edge reaching at most one past its farthest
    neighbour. Reward is the circuit rank normalized by that of the
    complete graph on n_max nodes.
    """

    kind = "graph"

    def __init__(self, n_max=7):
        if n_max < 3:
            raise ValueError("n_max must be at least 3")
        self.n_max = n_max
        # action ids: 0 ADD-NODE, 1..n_max-1 ADD-EDGE-(-i), n_max <EOG>
        self.atomic_names = (
            ["ADD-NODE"]
            + [f"ADD-EDGE-(-{i})" for i in range(1, n_max)]
            + ["<EOG>"]
        )
        self.ADD_NODE = 0
        self.EOG = n_max
        self.terminal_actions = frozenset([self.EOG])
        self.max_cycle_rank = n_max * (n_max - 1) // 2 - n_max + 1

    def edge_action(self, i: int) -> int:
        """Action id for ADD-EDGE-(-i)."""
        return i

    def initial_state(self) -> GraphState:
        return GraphState(0, frozenset())

    def is_terminal(self, s: GraphState) -> bool:
        return s.ended

    def _neighbors_of_last(self, s: GraphState) -> list[int]:
        k = s.node_count
        return sorted(a if b == k else b for a, b in s.edges if k in (a, b))

    def valid_atomic_actions(self, s: GraphState) -> list[int]:
        if s.ended:
            raise InvalidActionError("terminal state has no actions")
        k = s.node_count
        if k == 0:
            return [self.ADD_NODE]
        if k == 1:
            return ([self.ADD_NODE] if k < self.n_max else []) + [self.EOG]
        nbrs = self._neighbors_of_last(s)
        if not nbrs:
            # mandatory connection of the freshly added node
            return [self.edge_action(i) for i in range(1, k)]
        acts = [self.ADD_NODE] if k < self.n_max else []
        j = nbrs[0]  # farthest (lowest-index) neighbour of the last node
        nbrset = set(nbrs)
        for i in range(1, k - j + 2):
            target = k - i
            if target >= 1 and target not in nbrset:
                acts.append(self.edge_action(i))
        acts.append(self.EOG)
        return acts

    def apply_atomic(self, s: GraphState, a: int) -> GraphState:
        if a not in self.valid_atomic_actions(s):
            raise InvalidActionError(f"action {a} invalid at {s}")
        if a == self.ADD_NODE:
            return GraphState(s.node_count + 1, s.edges)
        if a == self.EOG:
            return GraphState(s.node_count, s.edges, True)
        k = s.node_count
        target = k - a
        return GraphState(k, s.edges | {(target, k)})

    def unapply_atomic(self, s: GraphState, a: int):
        if a == self.EOG:
            return GraphState(s.node_count, s.edges) if s.ended else None
        if s.ended:
            return None
        k = s.node_count
        if a == self.ADD_NODE:
            if k == 0 or self._neighbors_of_last(s):
                return None
            return GraphState(k - 1, s.edges)
        target = k - a
        edge = (target, k)
        if target < 1 or edge not in s.edges:
            return None
        return GraphState(k, s.edges - {edge})

    def reward(self, x: GraphState) -> float:
        if not x.ended:
            raise InvalidActionError("reward defined only for terminal states")
        return max(graph_cycle_rank(x) / self.max_cycle_rank, REWARD_FLOOR)

    def is_mode(self, x: GraphState) -> bool:
        return self.reward(x) == 1.0

    def enumerate_terminal_states(self) -> Iterator[tuple[GraphState, float]]:
        if self.n_max > 5:
            raise ValueError("graph enumeration supported only for n_max <= 5")
        seen = set()
        stack = [self.initial_state()]
        visited = {self.initial_state()}
        while stack:
            s = stack.pop()
            for a in self.valid_atomic_actions(s):
                s2 = self.apply_atomic(s, a)
                if s2.ended:
                    if s2 not in seen:
                        seen.add(s2)
                        yield s2, self.reward(s2)
                elif s2 not in visited:
                    visited.add(s2)
                    stack.append(s2)

    def adjacency_upper(self, s: GraphState) -> np.ndarray:
        """Upper-triangular adjacency indicator padded to n_max nodes."""
        n = self.n_max
        out = np.zeros(n * (n - 1) // 2)
        idx = {}
        pos = 0
        for a in range(1, n):
            for b in range(a + 1, n + 1):
                idx[(a, b)] = pos
                pos += 1
        for e in s.edges:
            out[idx[e]] = 1.0
        return out

    def distance(self, a: GraphState, b: GraphState) -> int:
        da = self.adjacency_upper(a)
        db = self.adjacency_upper(b)
        return int(np.sum(da != db)) + int(a.node_count != b.node_count)


def make_env(name: str, **kwargs):
    envs = {
        "fractal": FractalGrid,
        "bitseq": BitSequence,
        "rna": SyntheticRNA,
        "graph": GraphBuild,
    }
    if name not in envs:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(envs)}")
    return envs[name](**kwargs)
