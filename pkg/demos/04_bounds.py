"""Analytic bounds: optimality-gap exponent, AoI caps, and tail thresholds.

Evaluates the exponential bound on the projection gap, the perfect-channel
AoI cap, and the erasure-channel tail threshold for the benchmark
scheduling scenario, then compares the cap against a simulation.

Run: python demos/04_bounds.py
"""

from aoi_mfg import (
    bisection_lambda,
    bound_report,
    population_for,
    run_scheduling_experiment,
    scheduling_scenario,
)

cfg = scheduling_scenario(N=100, alpha=0.25, p=0.2, T=5000)
policy = bisection_lambda(population_for(cfg), cfg.p, cfg.capacity)
report = bound_report(cfg, policy)

print(f"Scenario: N={cfg.N}, alpha={cfg.alpha}, p={cfg.p}")
print(f"KL exponent D(alpha || q) = {report.kl_exponent:.5f} (q = {report.q:.4f})")
print(f"Gap bound U exp(-D N) = {report.gap_bound:.2f}  (U = {report.U:.1f})")
print(f"Perfect-channel AoI cap: {report.p0_aoi_cap}")
if report.tail is not None:
    t = report.tail
    print(f"Tail threshold: AoI exceeds {t.aoi_threshold} with probability "
          f"<= {t.delta} once N >= {max(t.n_min_clt, t.n_min_gauss):.0f}")

zero_p = scheduling_scenario(N=100, alpha=0.25, p=0.0, T=5000)
zp_policy = bisection_lambda(population_for(zero_p), 0.0, zero_p.capacity)
m = run_scheduling_experiment(zero_p, zp_policy, "matb", seed=0)
zp_report = bound_report(zero_p, zp_policy)
print(f"\np=0 check: simulated max AoI {m.max_aoi} vs cap {zp_report.p0_aoi_cap}")
