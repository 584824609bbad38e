"""Observer-augmented NMPC for quadrotor trajectory tracking under lumped disturbances.

Subpackages and modules: :mod:`.core_math` (quaternion and signed-power
helpers), :mod:`.plant` (rigid-body simulator), :mod:`.reference`
(flatness-based references), :mod:`.disturbance`, :mod:`.observers`
(fixed-time and high-gain observers), :mod:`.mpc` (RTI MPC), :mod:`.qp`,
:mod:`.inner_loop` (INDI), :mod:`.baselines` and :mod:`.harness`.
"""

__version__ = "0.1.0"
