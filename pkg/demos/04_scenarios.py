"""
Hold and track scenarios
========================

Runs both scenarios end to end and prints the error summary.  The traces
land in ``out/<scenario>/trace.csv``; see the README for the column map.
"""
from dataclasses import replace

from planarcontact.config import ScenarioConfig
from planarcontact.harness import run

for kind in ("hold", "track"):
    cfg = replace(ScenarioConfig(), scenario=kind)
    s = run(cfg, out_dir=f"out/{kind}").summary
    print(f"{kind}: impact at {s.impact_time:.3f} s")
    for name, m in (("analytic", s.analytic), ("pf", s.pf)):
        print(f"  {name:8s} force {m.steady_force_mean:.3f} N (max {m.steady_force_max:.3f}),"
              f" point {1e3 * m.steady_point_mean:.2f} mm (max {1e3 * m.steady_point_max:.2f}),"
              f" impact peak {m.peak_transient_force:.2f} N")
