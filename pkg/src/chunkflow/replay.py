"""Prioritized replay buffer with a diversity cutoff.

Entries are (terminal state, base reward), kept sorted by descending
reward. Once full, a candidate must beat the buffer's minimum reward, and
then either be farther than the cutoff distance from everything stored or
beat its nearest neighbour's reward (replacing it). Exact duplicate states
are always rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class InsertReport:
    appended: int = 0
    diverse_inserts: int = 0
    replacements: int = 0
    rejected: int = 0


@dataclass
class DiversityBuffer:
    env: object
    capacity: int
    cutoff: int  # d_c
    entries: list = field(default_factory=list)  # [(state, reward)] sorted desc

    def __len__(self):
        return len(self.entries)

    def min_reward(self) -> float:
        return self.entries[-1][1] if self.entries else float("-inf")

    def states(self) -> list:
        return [s for s, _ in self.entries]

    def _sort_truncate(self):
        self.entries.sort(key=lambda e: -e[1])
        del self.entries[self.capacity :]

    def insert_batch(self, batch) -> InsertReport:
        """batch: iterable of (terminal state, base reward)."""
        batch = list(batch)
        report = InsertReport()
        present = {s for s, _ in self.entries}
        if len(self.entries) < self.capacity:
            for s, r in batch:
                if s in present:
                    report.rejected += 1
                    continue
                self.entries.append((s, r))
                present.add(s)
                report.appended += 1
            self._sort_truncate()
            return report
        rmin = self.min_reward()
        survivors = [(s, r) for s, r in batch if r >= rmin]
        report.rejected += len(batch) - len(survivors)
        for s, r in survivors:
            if s in present:
                report.rejected += 1
                continue
            dists = [self.env.distance(s, sb) for sb, _ in self.entries]
            j = min(range(len(dists)), key=dists.__getitem__)
            if dists[j] > self.cutoff:
                self.entries.append((s, r))
                present.add(s)
                report.diverse_inserts += 1
            elif r > self.entries[j][1]:
                present.discard(self.entries[j][0])
                self.entries[j] = (s, r)
                present.add(s)
                report.replacements += 1
            else:
                report.rejected += 1
        self._sort_truncate()
        return report

    def sample(self, n: int, rng) -> list:
        """n uniform-with-replacement draws of (state, reward)."""
        if n == 0:
            return []
        if not self.entries:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(len(self.entries), size=n)
        return [self.entries[i] for i in idx]

    def dump_jsonl(self, path, serialize_state) -> None:
        import json

        with open(path, "w") as f:
            for s, r in self.entries:
                f.write(json.dumps({"state": serialize_state(s), "reward": r}) + "\n")
