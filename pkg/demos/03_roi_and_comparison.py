"""The two return-of-investment formulas and the comparison rule the
mediator uses to recommend an option.

Run: python3 demos/03_roi_and_comparison.py
"""

from parley.demo import data_path
from parley.finance import (
    RatesProfile,
    SimulationResult,
    compare_results,
    roi_cdb,
    roi_savings,
)

rates = RatesProfile.load(data_path("corpus", "rates.json"))
print(f"profile: savings rate {rates.savings.rate:.6f} + base {rates.savings.base_rate}, "
      f"interbank {rates.interbank_rate}, paid fraction {rates.paid_fraction}, mode {rates.mode}\n")

scenarios = [(50, 180), (10_000, 730), (10_000, 1825), (500_000, 5475)]
print(f"{'amount':>10} {'days':>6} {'savings':>14} {'cdb':>16} verdict")
for amount, days in scenarios:
    savings = roi_savings(amount, rates.savings)
    cdb = roi_cdb(amount, rates.cdb_params(days), mode=rates.mode)
    comparison = compare_results(
        [SimulationResult("Savings Account", savings), SimulationResult("CDB", cdb)],
        epsilon=rates.epsilon,
    )
    verdict = (
        "no significant difference"
        if comparison.kind == "no_significant_difference"
        else f"better: {comparison.best.option}"
    )
    print(f"{amount:>10,} {days:>6} {savings:>14,.2f} {cdb:>16,.2f} {verdict}")

print("\nidentity checks:")
from parley.finance import CdbParams, SavingsParams

print("  zero-rate savings:", roi_savings(1000, SavingsParams(0, 0)))
print("  unit paid fraction neutralizes the exponent:",
      roi_cdb(1000, CdbParams(0.1, 1.0, 3650, 0)))
