"""The full command-line workflow: train, report, inspect, parse, transfer.

Everything the CLI writes lands under one temporary directory:

  train           -> metrics.jsonl, library.json, checkpoint.bin, ...
  report          -> mean +/- sd CSV curves across seeds, chunk histogram
  inspect-library -> human-readable chunk listing
  parse           -> shortest-parse size of arbitrary objects
  transfer        -> new run seeded with the frozen learned library

Runtime: under a minute (tiny budgets; the point is the artifact flow).
"""

import tempfile
from pathlib import Path

from chunkflow.runner import main

root = Path(tempfile.mkdtemp())
COMMON = ["--env=rna", "--task=1", "--iterations=40", "--batch=16",
          "--d=8", "--hidden=8", "--chunker=increment", "--trigger=every:10",
          "--corpus_n=32", "--backward=shortparse"]

print("== train three seeds ==")
runs = []
for seed in (0, 1, 2):
    out = root / f"seed{seed}"
    main(["train"] + COMMON + [f"--seed={seed}", f"--out_dir={out}"])
    runs.append(out)

print("\n== aggregate a report across the three runs ==")
main(["report"] + [str(r) for r in runs] + ["--out", str(root / "report")])
for csv_file in sorted((root / "report").glob("*.csv")):
    print(f"  wrote {csv_file.name}")

print("\n== inspect the learned library of seed 0 ==")
main(["inspect-library", str(runs[0] / "library.json")])

print("\n== shortest-parse some objects under that library ==")
objects = root / "objects.txt"
objects.write_text("GCAUUCGGACUGAA\nAAAA\nGCGC\n")
main(["parse", str(runs[0] / "library.json"), str(objects)])

print("\n== transfer the frozen library to the second motif task ==")
main(["transfer", str(runs[0] / "library.json"),
      "--env=rna", "--task=2", "--iterations=20", "--batch=16",
      "--d=8", "--hidden=8", "--backward=shortparse",
      f"--out_dir={root / 'transferred'}"])

print(f"\nall artifacts under {root}")
