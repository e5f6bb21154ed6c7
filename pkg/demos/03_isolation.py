"""
Locating a contact from joint torques
=====================================

A force presses on link 4.  The analytic isolator intersects the line of
action with the link; the particle filter searches the link boundary.
"""
import numpy as np

from planarcontact import model as rb
from planarcontact.isolation_analytic import isolate
from planarcontact.isolation_pf import ParticleFilter, PFParams

arm = rb.RobotModel.uniform()
q = np.array([1.01837, -0.67532, -0.44888, -0.26514])

pt = rb.perimeter_point(arm, 3, 0.18)
p, n = rb.world_point(arm, q, pt)
F = np.array([2.9, 7.5])
gamma = rb.point_jacobian(arm, q, pt).T @ F
print("true point", p.round(4), "force", F)

est = isolate(gamma, arm, q)
print("analytic  ", est.point_world.round(4), "force", est.force.round(4))

pf = ParticleFilter(arm, PFParams(), seed=0)
for k in range(30):
    out = pf.step(gamma, q)
    if k in (0, 4, 9, 29):
        err = np.linalg.norm(out.estimate.point_world - p)
        print(f"pf step {k + 1:2d}: error {1e3 * err:6.2f} mm, arc variance {out.summary.var_s:.2e} m^2")

# a contact on link 1 only excites one joint, so location is unobservable
gamma1 = rb.point_jacobian(arm, q, rb.perimeter_point(arm, 0, 0.25)).T @ np.array([0.0, -5.0])
print("link 1:", isolate(gamma1, arm, q).reason)
