"""Ball-count estimate ``log #B_n / n`` against the Bowen root, for a range of n."""

import argparse

import numpy as np

from mfspec.gibbs_metric import WeakGibbsMetric, bowen_root, cover_count
from mfspec.potentials import LocallyConstant
from mfspec.sft import Sft


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=28)
    args = ap.parse_args()
    full2 = Sft.full(2)
    golden = Sft.from_matrix([[1, 1], [1, 0]])
    cases = {
        "full2 standard": WeakGibbsMetric.standard(full2),
        "full2 log2/log4": WeakGibbsMetric(LocallyConstant.per_symbol(full2, [-np.log(2), -np.log(4)])),
        "golden standard": WeakGibbsMetric.standard(golden),
    }
    print("n," + ",".join(cases))
    roots = {k: bowen_root(m) for k, m in cases.items()}
    for n in range(4, args.n_max + 1, 4):
        row = [np.log(cover_count(m, n)) / n for m in cases.values()]
        print(f"{n}," + ",".join(f"{v:.6f}" for v in row))
    print("bowen," + ",".join(f"{v:.6f}" for v in roots.values()))


if __name__ == "__main__":
    main()
