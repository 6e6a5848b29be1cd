#!/usr/bin/env python3
"""Equality benchmark on flat spaces: closed-form errors per (m, alpha, R)."""

import argparse
import time

import numpy as np

from belab.abp import BallDomain, lemma1_values, normalize_f, solve_neumann_radial
from belab.geometry import RotSymSpace
from belab.profiles import const, euclidean


def run(m, alpha, R, n_grid):
    space = RotSymSpace(m, alpha, euclidean(), const(1.0), 1000.0)
    K = BallDomain(R)
    lam, f = normalize_f(space, K, const(1.0))
    exact = (m / ((m + alpha) * R)) ** (m + alpha - 1)
    sol = solve_neumann_radial(space, K, f, n_grid=n_grid)
    s = np.linspace(0.0, R, 257)
    u_err = float(np.max(np.abs(sol.value(s) - s**2 / (2 * R))))
    gap = float(np.max(np.abs(lemma1_values(space, sol, sol.grid))))
    return abs(lam - exact) / exact, u_err, gap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", type=float, nargs="+", default=[0.5, 1.0, 3.0])
    ap.add_argument("--n-grid", type=int, default=1001)
    args = ap.parse_args()
    t0 = time.perf_counter()
    print(f"{'m':>2} {'alpha':>5} {'R':>5} {'lambda rel err':>15} {'u sup err':>10} {'lemma1 gap':>10}")
    for m in (2, 3, 4):
        for alpha in (0.5, 1.0, 2.0):
            for R in args.radii:
                lam_err, u_err, gap = run(m, alpha, R, args.n_grid)
                print(f"{m:>2} {alpha:>5g} {R:>5g} {lam_err:>15.2e} {u_err:>10.2e} {gap:>10.2e}")
    print(f"elapsed {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
