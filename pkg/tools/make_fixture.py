"""Regenerate the bundled offline fixture (synthetic, Treasury CSV layout).

The curves come from a dynamic Nelson-Siegel process with persistent
factors plus per-term noise, rounded to two decimals like the published
par-yield table. The values are simulated, not historical Treasury quotes.

    python tools/make_fixture.py src/yieldcast/fixtures/treasury_fixture.csv
"""

import sys

import numpy as np

from yieldcast.basis import NelsonSiegelBasis
from yieldcast.data import DEFAULT_TERMS, YieldSeries, write_treasury_csv

N_DAYS = 320
SEED = 20060215


def simulate(n_days=N_DAYS, seed=SEED):
    rng = np.random.default_rng(seed)
    dates = np.busday_offset("2006-02-15", np.arange(n_days), roll="forward")
    phi = NelsonSiegelBasis(0.0609).design(DEFAULT_TERMS)
    beta = np.array([5.0, -0.4, -0.5])
    mean = np.array([4.8, -0.8, 0.2])
    z = np.array([0.995, 0.99, 0.98])
    shock = np.array([0.035, 0.04, 0.08])
    rows = []
    for _ in range(n_days):
        beta = mean + z * (beta - mean) + shock * rng.standard_normal(3)
        curve = phi @ beta + 0.015 * rng.standard_normal(len(DEFAULT_TERMS))
        rows.append(np.round(np.clip(curve, 0.01, 20.0), 2))
    return YieldSeries([d.astype(object) for d in dates], np.array(rows))


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "treasury_fixture.csv"
    with open(out, "w", newline="") as fh:
        fh.write(write_treasury_csv(simulate()))
