"""Seeded synthetic teacher traces and labels shipped with the package.

``consistent``: the teacher is one-hot on the ground-truth token wherever
the two answers overlap. ``conflicting``: at roughly half the positions the
teacher favours a different token.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .numeric import rng_from_seed

__all__ = ["FIXTURES", "generate", "fixture_path", "write_fixtures"]

FIXTURES = ("consistent", "conflicting")
_SEEDS = {"consistent": 101, "conflicting": 202}
VOCAB = 8
N_SAMPLES = 6


def generate(name: str) -> tuple[str, str]:
    """Return ``(traces_jsonl, labels_jsonl)`` for fixture ``name``."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}")
    rng = rng_from_seed(_SEEDS[name])
    traces, labels = [], []
    for i in range(N_SAMPLES):
        L = int(rng.integers(3, 6))
        ids = [int(t) for t in rng.integers(0, VOCAB, L)]
        L_teacher = L + int(rng.integers(-1, 2))
        dists = []
        for pos in range(L_teacher):
            truth = ids[pos] if pos < L else int(rng.integers(0, VOCAB))
            if name == "conflicting" and rng.random() < 0.5:
                other = int((truth + rng.integers(1, VOCAB)) % VOCAB)
                dists.append([[other, 0.7], [truth, 0.3]])
            else:
                dists.append([[truth, 1.0]])
        traces.append({
            "reasoning": f"sample {i}: perceive the scene, then reason about the question",
            "dists": dists,
            "vocab": VOCAB,
            "answer_ids": [d[0][0] for d in dists],
        })
        labels.append({"ids": ids, "vocab": VOCAB})
    dump = lambda rows: "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in rows)  # noqa: E731
    return dump(traces), dump(labels)


def fixture_path(name: str, kind: str) -> Path:
    """Path of a bundled file; ``kind`` is ``"traces"`` or ``"labels"``."""
    if name not in FIXTURES or kind not in ("traces", "labels"):
        raise KeyError(f"no bundled fixture {name}/{kind}")
    return Path(str(resources.files("cogfuse") / "data" / f"{name}_{kind}.jsonl"))


def write_fixtures(directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in FIXTURES:
        traces, labels = generate(name)
        (directory / f"{name}_traces.jsonl").write_text(traces, encoding="utf-8", newline="\n")
        (directory / f"{name}_labels.jsonl").write_text(labels, encoding="utf-8", newline="\n")
