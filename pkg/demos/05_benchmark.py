"""
Estimator cost
==============

Per-tick wall-clock cost of the two isolators on the same residual.  The
filter solves one small QP per particle, the analytic method one
least-squares problem, which is why the filter runs at the slower rate.
"""
import time

import numpy as np

from planarcontact import model as rb
from planarcontact.isolation_analytic import isolate
from planarcontact.isolation_pf import ParticleFilter, PFParams

arm = rb.RobotModel.uniform()
q = np.array([1.01837, -0.67532, -0.44888, -0.26514])
gamma = rb.point_jacobian(arm, q, rb.perimeter_point(arm, 3, 0.18)).T @ np.array([2.9, 7.5])

pf = ParticleFilter(arm, PFParams(), seed=0)
pf_t, an_t = [], []
for _ in range(500):
    t0 = time.perf_counter()
    pf.step(gamma, q)
    pf_t.append(time.perf_counter() - t0)
    t0 = time.perf_counter()
    isolate(gamma, arm, q)
    an_t.append(time.perf_counter() - t0)

tp, ta = np.median(pf_t), np.median(an_t)
print(f"particle filter ({pf.params.n_particles} particles): {1e3 * tp:.2f} ms per tick (budget 10 ms at 100 Hz)")
print(f"analytic isolator:                {1e3 * ta:.3f} ms per tick (budget 1 ms at 1 kHz)")
print(f"ratio: {tp / ta:.1f}x")
