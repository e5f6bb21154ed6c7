"""
Momentum observer
=================

The arm swings freely, then lands on a disc.  The residual stays at
round-off in free space and follows the true contact torque afterwards.
"""
import numpy as np

from planarcontact import model as rb
from planarcontact.observer import ObserverState, detect, observer_update
from planarcontact.sim import Obstacle, SimState, step

arm = rb.RobotModel.uniform()
disc = Obstacle([1.2, -0.145], 0.1)
dt = 1e-3

state = SimState(rb.JointState(np.zeros(4), np.zeros(4)))
obs = ObserverState.start(arm, state.joints.q, state.joints.qdot, gains=100.0)

for k in range(1500):
    # a soft joint PD lets the arm sag under gravity onto the disc; the
    # damping stays well inside the explicit-step limit of the lightest mode
    tau_m = -200 * state.joints.q - 5 * state.joints.qdot
    obs = observer_update(obs, arm, state.joints.q, state.joints.qdot, tau_m, dt)
    state = step(arm, state, tau_m, disc, dt)
    if k % 150 == 0:
        c = state.true_contact
        tau_c = c.tau if c is not None else np.zeros(4)
        d = detect(obs.gamma, 0.1)
        print(f"t={state.t:5.3f}  gamma={np.round(obs.gamma, 3)}  tau_c={np.round(tau_c, 3)}"
              f"  link>={d.last_excited_joint}")
