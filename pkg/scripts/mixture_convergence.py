"""Domain-fraction error of the stage mixer versus the whole-sequence binomial bound.

For each token budget, samples many seeds against fake pools and prints the
largest observed |fraction - target| next to 4 sd of the binomial model.
"""

import argparse

import numpy as np

from longctx import mixer
from longctx.packer import PackedSequence


def fake_pools(spec, cur):
    tokens = np.zeros(cur.seq_len, dtype=np.int32)
    seq = lambda k: PackedSequence(tokens, (0, cur.seq_len), (k[0],), (f"{k[0]}@{k[1]}",), (0,))
    return {k: [seq(k)] * 8 for k in mixer.leaf_targets(spec, cur)}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--preset", default="stage1")
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--budgets", default="1,4,16,64", help="budgets in units of 2**20 tokens")
    args = p.parse_args()
    spec, cur = mixer.load_preset(args.preset)
    pools = fake_pools(spec, cur)
    targets = spec.target_fractions()
    print(f"{'tokens':>12} {'domain':>14} {'target':>7} {'max err':>8} {'bound':>8}")
    for b in (int(x) * 2**20 for x in args.budgets.split(",")):
        errs = {k: 0.0 for k in targets}
        for seed in range(args.seeds):
            spec.seed = seed
            stats = mixer.MixStats()
            for _ in mixer.sample_stream(spec, cur, pools, b, stats=stats):
                pass
            f = stats.fractions()
            for k, w in targets.items():
                errs[k] = max(errs[k], abs(f.get(k, 0.0) - w))
        for k, w in targets.items():
            print(f"{b:>12} {k:>14} {w:>7.4f} {errs[k]:>8.4f} {mixer.convergence_bound(w, cur.seq_len, b):>8.4f}")


if __name__ == "__main__":
    main()
