"""Fixed points in asymptotic average on the catalog carpets."""

import argparse
import time

from mfspec.geometry import carpet_catalog
from mfspec.localized import fixed_point_set_dimension


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--carpets", default="s0_3x3,s1,s2,times_m(3),brooks15")
    ap.add_argument("--ks", default="1,2,4")
    ap.add_argument("--depth", type=int, default=6)
    args = ap.parse_args()
    print("carpet,k,k_effective,value,upper,full_dimension,cells,seconds")
    for name in args.carpets.split(","):
        ifs = carpet_catalog(name)
        for k in (int(t) for t in args.ks.split(",")):
            t0 = time.perf_counter()
            r = fixed_point_set_dimension(ifs, k=k, depth=args.depth)
            print(f"{name},{k},{r['k_effective']},{r['value']:.12f},{r['upper']:.12f},"
                  f"{r['full_dimension']:.12f},{r['cells']},{time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
