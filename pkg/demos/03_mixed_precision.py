"""Float32 filtering: PC-SRIF survives where the information filter fails.

Runs the long ill-conditioned scenario three ways:

  * SRIF at binary64          -- the reference
  * PC-SRIF at binary32       -- preconditioned normal equations in float32
  * IF oracle at binary32     -- unpartitioned normal-equation filter, kept
                                 only to demonstrate the failure mode

The IF oracle shadows every update with a binary64 QR solve and logs an
instability event whenever its float32 answer strays or its Cholesky
breaks down. PC-SRIF finishes with zero events and an ATE matching the
binary64 reference to a fraction of a percent.
"""

from srifkit.diag import compute_metrics
from srifkit.sim import conditioning_scenario, gen_dataset
from srifkit.vins import FilterConfig, run_filter

ds = gen_dataset(conditioning_scenario(seed=0))
truth = ds.truth


def ate(res):
    return compute_metrics(res.times, res.positions, res.quats,
                           truth.times, truth.positions, truth.quats
                           ).ate_translation


print(f"# {ds.spec.duration:.0f} s scenario, three runs ...")
ref = run_filter(ds, FilterConfig(estimator="srif", precision="binary64"))
pc32 = run_filter(ds, FilterConfig(estimator="pcsrif", precision="binary32"))
if32 = run_filter(ds, FilterConfig(estimator="if-oracle",
                                   precision="binary32"))

print(f"{'run':<22} {'ATE [m]':>9} {'instability events':>20}")
for name, res in (("srif / binary64", ref), ("pcsrif / binary32", pc32),
                  ("if-oracle / binary32", if32)):
    print(f"{name:<22} {ate(res):>9.4f} {len(res.events):>20}")

first = if32.events[0]
print(f"\nfirst IF instability at t={first.t:.1f} s ({first.kind}); "
      f"PC-SRIF never lost positive-definiteness")
print(f"float32 vs float64 ATE difference: "
      f"{abs(ate(pc32) - ate(ref)) / ate(ref) * 100:.2f}%")
