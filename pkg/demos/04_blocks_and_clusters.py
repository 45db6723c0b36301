"""Block decomposition and cluster diagnostics of exceedance patterns.

Tiles the test axis into alternating large blocks and short buffers,
counts exceedances per block across replicated dependent panels, and
shows that above the admissible level the no-cluster event dominates.
"""

import math

from exceedlab import exceedance as xc
from exceedlab import panelgen as pg
from exceedlab import studentize as stu
from exceedlab.numerics import dependence_summary, phi_bound, threshold_regime

print("=" * 70)
print("1. The block layout")
print("=" * 70)
scheme = xc.block_scheme(120, 2, ell=55)
for kind, start, end in scheme.blocks:
    print(f"  {kind:9s} [{start:3d}, {end:3d}]  (length {end - start + 1})")
print(f"  complete large blocks: m = {scheme.m}")

level = 4.0
derived = xc.block_scheme(10_000, 2, s=level)
print(f"\n  from a level s = {level}: ell = ceil(exp(s^2/4)) = {derived.ell}")

print("\n" + "=" * 70)
print("2. Cluster statistics across replicated dependent panels")
print("=" * 70)
rho = (0.1, 0.08, 0.06, 0.04, 0.02)
spec = pg.PanelSpec(
    p=4000, n=150, model=pg.DependenceModel.gaussian_kdep(rho),
    law=pg.InnovationLaw.normal(), seed=404,
)
gamma = dependence_summary(spec.model.rho_max).gamma
reps = 400
print(f"  panel {spec.p} x {spec.n}, kappa = 5, gamma = {gamma}, "
      f"{reps} replicates per level\n")
print(f"  {'t':>5s} {'mean exc.':>9s} {'P(>=1)':>7s} {'P(F fails)':>10s} "
      f"{'phi shape':>9s}")
for t in (3.4, 3.8, 4.2):
    s = stu.t_level_to_r_level(t, spec.n)
    scheme = xc.block_scheme(spec.p, 5, s=s)
    total = 0
    any_hit = 0
    f_fail = 0
    for rep in range(reps):
        rows = stu.studentize_panel(pg.generate(spec.with_replicate(rep)))
        cs = xc.cluster_stats(xc.extract(rows.r, s), scheme)
        total += cs.total
        any_hit += 1 if cs.total else 0
        f_fail += 0 if cs.event_f else 1
    phi = phi_bound(t, spec.p, gamma).phi_nominal
    print(f"  {t:5.2f} {total / reps:9.3f} {any_hit / reps:7.3f} "
          f"{f_fail / reps:10.3f} {phi:9.3f}")

floor = threshold_regime(spec.p, 0.05, gamma).t_min
print(f"\n  admissible floor at eta = 0.05: t_min = {floor:.3f}")
print("  Above the floor the event F (no buffer hits, at most one exceedance")
print("  per large block, empty fragment) holds on all but a phi-shaped")
print("  fraction of replicates: exceedances arrive isolated, not clustered.")
