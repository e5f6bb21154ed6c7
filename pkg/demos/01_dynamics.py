"""
Dynamics of the planar arm
==========================

Mass matrix, Coriolis matrix and gravity for the default four-link arm,
checked against finite differences of the energies.
"""
import numpy as np

from planarcontact import model as rb

arm = rb.RobotModel.uniform()
q = np.array([0.9, -0.5, -0.4, -0.6])
qd = np.array([0.3, -0.2, 0.5, 0.1])

M = rb.mass_matrix(arm, q)
print("M =\n", M.round(4))

# gravity is the gradient of the potential energy
h = 1e-6
grad = [(rb.potential_energy(arm, q + h * e) - rb.potential_energy(arm, q - h * e)) / (2 * h)
        for e in np.eye(4)]
print("g          ", rb.gravity_vector(arm, q).round(6))
print("dV/dq (fd) ", np.round(grad, 6))

# the Christoffel form makes Mdot - 2C skew symmetric
Mdot = np.tensordot(rb.mass_matrix_derivatives(arm, q), qd, axes=(0, 0))
S = Mdot - 2 * rb.coriolis_matrix(arm, q, qd)
print("max |S + S^T| =", np.abs(S + S.T).max())
