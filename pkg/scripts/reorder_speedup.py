"""Modeled step-time gain from sorting minibatches, as a function of the share of single-document packs."""

import argparse

import numpy as np

from longctx.packer import PackedSequence
from longctx.scheduler import throughput_report


def pack(L, n_segments, tokens):
    step = L // n_segments
    b = tuple(range(0, step * n_segments, step)) + (L,)
    return PackedSequence(tokens, b, ("x",) * n_segments, ("o",) * n_segments, (0,) * n_segments)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--length", type=int, default=65536)
    p.add_argument("--devices", type=int, default=8)
    p.add_argument("--accum", type=int, default=4)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    tokens = np.zeros(args.length, dtype=np.int32)
    n = args.devices * args.accum * args.steps
    print(f"{'long share':>10} {'speedup':>8}")
    for share in (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
        long_ = rng.random(n) < share
        data = [pack(args.length, 1 if is_long else int(rng.integers(8, 128)), tokens) for is_long in long_]
        rep = throughput_report(data, args.devices, args.accum)
        print(f"{share:>10.1f} {rep.speedup:>8.2%}")


if __name__ == "__main__":
    main()
