"""Regenerate the frozen final-state CDFs used by the acceptance suite.

Run from the repository root:

    python3 scripts/generate_regression_data.py

Overwrites tests/data/*.csv. The configs here are the fixed benchmark
configs asserted in tests/test_acceptance.py; regenerate only when the
integrator or kernel construction intentionally changes, and review the
diff before committing.
"""

from pathlib import Path

from evodyn.dynamics import bnn, simulate_edm
from evodyn.games import kernel_continuous_war, kernel_cosine, theta_logistic
from evodyn.measures import cdf, gaussian_on_grid
from evodyn.strategy_space import make_uniform_grid, make_uniform_reference

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"

N = 200
LOWER, UPPER = 0.0, 2.0
DT = 0.01


def write_final_cdf(trajectory, path):
    state = trajectory.states[-1]
    vals = cdf(state)
    with open(path, "w", newline="") as fh:
        fh.write("s,cdf\n")
        for s, v in zip(state.grid.points, vals):
            fh.write(f"{s:.17g},{v:.17g}\n")
    print(f"wrote {path} (t={trajectory.times[-1]:g}, "
          f"final nash gap {trajectory.nash_gap[-1]:.6g})")


def main():
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    grid = make_uniform_grid(N, LOWER, UPPER)
    lam = make_uniform_reference(grid)
    x0 = gaussian_on_grid(grid, 1.0, 0.1)

    cts = kernel_continuous_war(1.0, theta_logistic(100.0), grid)
    tr = simulate_edm(cts, bnn(), lam, x0, 50.0, DT, sample_every=100)
    write_final_cdf(tr, DATA_DIR / "continuous_war_bnn_gaussian_t50.csv")

    cos = kernel_cosine(grid)
    tr = simulate_edm(cos, bnn(), lam, x0, 100.0, DT, sample_every=100)
    write_final_cdf(tr, DATA_DIR / "cosine_bnn_gaussian_t100.csv")


if __name__ == "__main__":
    main()
