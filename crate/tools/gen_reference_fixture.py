#!/usr/bin/env python3
"""Regenerates the committed forward-pass reference fixture.

An independent plain-Python implementation of the network forward pass writes
two checkpoints plus expected logits, probabilities and values for a fixed set
of inputs. The Rust tests load these files and must agree to 1e-12, which
pins the checkpoint format and the arithmetic across implementations.

Run from the repository root:

    python3 tools/gen_reference_fixture.py
"""

import json
import math
import random
from pathlib import Path

HIDDEN = [32, 16, 16]
INPUT_WIDTH = 10
CASES = 16
SEED = 20240814


def glorot(rng, rows, cols):
    limit = math.sqrt(6.0 / (rows + cols))
    return [rng.uniform(-limit, limit) for _ in range(rows * cols)]


def make_net(rng, input_width, output_width):
    layers = []
    cols = input_width
    for rows in HIDDEN + [output_width]:
        layers.append({
            "rows": rows,
            "cols": cols,
            "w": glorot(rng, rows, cols),
            "b": [rng.uniform(-0.1, 0.1) for _ in range(rows)],
        })
        cols = rows
    return {"version": 1, "input_width": input_width, "layers": layers}


def matvec(layer, x):
    # Same accumulation order as the Rust implementation: bias first, then
    # the row entries left to right.
    out = []
    for r in range(layer["rows"]):
        acc = layer["b"][r]
        row = layer["w"][r * layer["cols"]:(r + 1) * layer["cols"]]
        for wv, xv in zip(row, x):
            acc += wv * xv
        out.append(acc)
    return out


def forward(net, x):
    for layer in net["layers"][:-1]:
        x = [math.tanh(v) for v in matvec(layer, x)]
    return matvec(net["layers"][-1], x)


def softmax(logits):
    m = max(logits)
    exps = [math.exp(v - m) for v in logits]
    s = sum(exps)
    return [e / s for e in exps]


def main():
    root = Path(__file__).resolve().parent.parent
    fixtures = root / "crates" / "core" / "tests" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)

    rng = random.Random(SEED)
    actor = make_net(rng, INPUT_WIDTH, 4)
    critic = make_net(rng, INPUT_WIDTH, 1)
    inputs = [[rng.uniform(0.0, 1.0) for _ in range(INPUT_WIDTH)] for _ in range(CASES)]

    cases = []
    for x in inputs:
        logits = forward(actor, x)
        cases.append({
            "input": x,
            "logits": logits,
            "probs": softmax(logits),
            "value": forward(critic, x)[0],
        })

    (fixtures / "reference_actor.json").write_text(json.dumps(actor) + "\n")
    (fixtures / "reference_critic.json").write_text(json.dumps(critic) + "\n")
    (fixtures / "reference_forward.json").write_text(json.dumps({"cases": cases}) + "\n")
    print(f"wrote {CASES} cases under {fixtures}")


if __name__ == "__main__":
    main()
