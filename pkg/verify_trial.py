import sys

from isci.scenarios import trial_scenario
from isci.simulation import run_scenario

# Published ISCI power / mean bound for the two scenarios, order E1, E2, S1, S2
PUBLISHED = {
    (1, 1e-10): ([0.812, 0.812, 0.810, 0.810], [-0.277, -0.277, 0.169, 0.196]),
    (1, 0.38): ([0.801, 0.802, 0.800, 0.800], [-0.288, -0.288, 0.250, 0.249]),
    (2, 1e-10): ([1.000, 1.000, 1.000, 1.000], [0.210, 0.210, 0.207, 0.207]),
    (2, 0.38): ([1.000, 1.000, 1.000, 1.000], [0.151, 0.151, 0.287, 0.287]),
}


def verify(n_sims=100000):
    for (number, q_safety), (power, mean) in PUBLISHED.items():
        print(f"\n--- Scenario {number}, q_S = {q_safety:g} ---")
        result = run_scenario(trial_scenario(number, q_safety=q_safety, n_sims=n_sims))
        isci = result.methods["isci"]
        csci = result.methods["csci"]
        print(f"{'':4}{'power':>16}{'mean bound':>22}{'% finite':>10}{'CSCI power':>12}{'CSCI mean':>11}")
        for j, label in enumerate(result.labels):
            print(
                f"{label:4}"
                f"{isci.power[j]:8.3f} ({power[j]:.3f})"
                f"{isci.mean_bound_finite[j]:12.3f} ({mean[j]:+.3f})"
                f"{100 * isci.pct_finite[j]:10.1f}"
                f"{csci.power[j]:12.3f}"
                f"{csci.mean_bound_finite[j]:11.3f}"
            )
        if result.flags:
            print("Flags:", *result.flags, sep="\n  ")


if __name__ == "__main__":
    verify(int(sys.argv[1]) if len(sys.argv) > 1 else 100000)
