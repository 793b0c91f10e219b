"""Reference value of the summed multi-facet contrastive loss.

Evaluates the loss for tests/fixtures/infonce_batch8.json directly from its
definition (plain exp and log, no max shift) at 50 significant digits and
stores the result in the fixture as `expected_loss`.

Usage: python3 infonce_mpmath.py [fixture.json]
"""

import json
import sys
from pathlib import Path

from mpmath import mp, mpf, exp, log, sqrt, tanh

mp.dps = 50
FACETS = ["content", "layout", "illustration", "style"]


def project(head, x, dim, hidden):
    z = [tanh(sum(mpf(head["w1"][j * dim + k]) * x[k] for k in range(dim)) + mpf(head["b1"][j]))
         for j in range(hidden)]
    u = [sum(mpf(head["w2"][i * hidden + j]) * z[j] for j in range(hidden)) + mpf(head["b2"][i])
         for i in range(dim)]
    n = sqrt(sum(v * v for v in u))
    return [v / n for v in u]


def loss(fx):
    dim, hidden, tau = fx["dim"], fx["hidden"], mpf(fx["temperature"])
    batch = fx["batch"]
    total = mpf(0)
    for facet in FACETS:
        head = fx["heads"][facet]
        e = [project(head, [mpf(v) for v in ex["base_image_embedding"]], dim, hidden) for ex in batch]
        for i, ex in enumerate(batch):
            for caption in ex["caption_text_embeddings"][facet]:
                c = [mpf(v) for v in caption]
                logits = [sum(a * b for a, b in zip(c, ej)) / tau for ej in e]
                total += -log(exp(logits[i]) / sum(exp(l) for l in logits))
    return total


def main():
    path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "fixtures" / "infonce_batch8.json"
    fx = json.loads(path.read_text())
    value = loss(fx)
    fx["expected_loss"] = float(value)
    fx["expected_loss_digits"] = mp.nstr(value, 40)
    path.write_text(json.dumps(fx))
    print(fx["expected_loss_digits"])


if __name__ == "__main__":
    main()
