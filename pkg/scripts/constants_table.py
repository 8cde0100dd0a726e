#!/usr/bin/env python3
"""Print the analytic constants for a few standard weight laws."""

import rapwalk as rw

LAWS = [
    ("two-point Beta(1,1)", rw.TwoPointBeta(2, 1)),
    ("two-point Beta(1,2)", rw.TwoPointBeta(3, 1)),
    ("two-point Beta(2,2)", rw.TwoPointBeta(4, 2)),
    ("deterministic (1/2,1/2)", rw.Deterministic((0.5, 0.5, 0.0))),
    ("Dirichlet(1,1,1)", rw.DirichletWindow((1.0, 1.0, 1.0))),
]


def main():
    cols = ("V", "b", "sigma_D2", "sigma_a2", "beta", "kappa")
    print(f"{'law':26s} " + " ".join(f"{c:>10s}" for c in cols))
    for name, law in LAWS:
        c = rw.constants_for(law)
        vals = c.to_dict()
        print(f"{name:26s} " + " ".join(f"{vals[k]:10.6f}" for k in cols))


if __name__ == "__main__":
    main()
