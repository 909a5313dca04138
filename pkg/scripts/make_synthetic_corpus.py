"""Write a synthetic NDJSON corpus (books, code repositories, ShortMix-like documents)."""

import argparse
import time

from longctx.synthetic import write_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out")
    p.add_argument("--mb", type=float, default=100.0, help="target size in MiB")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="shrink every document length by this factor")
    args = p.parse_args()
    t0 = time.perf_counter()
    n = write_corpus(args.out, int(args.mb * 2**20), args.seed, args.scale)
    print(f"wrote {n} records to {args.out} in {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
