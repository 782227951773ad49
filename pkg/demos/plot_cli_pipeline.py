"""
Command-line pipeline
=====================

The same workflow from the shell: ingest a fact file, train an episodic
model, consolidate it by replay and query the result. With a fixed seed
every step prints the same bytes on every run.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

facts = Path(__file__).parent / "data" / "toy.tsv"
steps = [
    ["ingest", "--facts", facts],
    ["train", "--facts", facts, "--rank", 4, "--epochs", 200, "--batch-size", 4,
     "--corrupt", "s,p,o", "--max-corrupt", 3, "--seed", 3, "--out", "ep.ckpt"],
    ["recall", "--model", "ep.ckpt", "--time", "t2", "--top", 2],
    ["consolidate", "--model", "ep.ckpt", "--mode", "replay", "--epochs", 100, "--seed", 3,
     "--out", "sem.ckpt"],
    ["query", "--model", "sem.ckpt", "--fix", "s=jack", "--fix", "p=likes", "--free", "o", "--top", 3],
]

with tempfile.TemporaryDirectory() as work:
    for argv in steps:
        argv = [str(a) for a in argv]
        print("$ tensormemory", " ".join(argv))
        done = subprocess.run([sys.executable, "-m", "tensormemory", *argv], cwd=work,
                              capture_output=True, text=True, check=True)
        print(done.stdout, end="")
