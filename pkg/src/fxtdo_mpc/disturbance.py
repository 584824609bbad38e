"""Ground-truth force and torque disturbances injected into the plant.

Every profile is switched on at ``start`` (seconds of simulation time) and
returns exact zeros before it. Force outputs are scaled by ``scale``; torque
outputs are not.
"""

from dataclasses import dataclass, replace

import numpy as np

PERIOD = 15.0


@dataclass(frozen=True)
class DisturbanceProfile:
    kind: str = "sinusoid"  # sinusoid | constant | none
    start: float = 0.0
    scale: float = 1.0
    force: tuple = (1.0, -0.5, 0.0)
    torque: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("sinusoid", "constant", "none"):
            raise ValueError(f"unsupported disturbance kind {self.kind!r}")

    def __call__(self, t):
        dt = t - self.start
        if self.kind == "none" or dt < 0:
            return np.zeros(3), np.zeros(3)
        if self.kind == "sinusoid":
            f, tau = sinusoid_disturbance(dt)
        else:
            f, tau = np.array(self.force, dtype=float), np.array(self.torque, dtype=float)
        return self.scale * f, tau

    def force_at(self, t):
        return self(t)[0]


def sinusoid_disturbance(dt):
    """Force and torque of the periodic test disturbance, ``dt`` after switch-on."""
    if dt < 0:
        return np.zeros(3), np.zeros(3)
    s = np.sin(2 * np.pi * dt / PERIOD)
    c = np.cos(2 * np.pi * dt / PERIOD)
    return (np.array([1.0 + 0.5 * s, -0.5 * c, 0.0]),
            np.array([0.2 * s, 0.2 * c, 0.0]))


def sinusoid_profile(start=0.0):
    return DisturbanceProfile("sinusoid", start=start)


def constant_disturbance(f0, start=0.0):
    return DisturbanceProfile("constant", start=start, force=tuple(np.asarray(f0, dtype=float)))


def no_disturbance():
    return DisturbanceProfile("none")


def scale_profile(base, k):
    """Scale the force part of ``base`` by ``k`` in [0, 1]."""
    if not 0.0 <= k <= 1.0:
        raise ValueError("scale factor must lie in [0, 1]")
    return replace(base, scale=base.scale * k)


def derivative_bound(profile):
    """Supremum of the force rate (N/s) after switch-on."""
    if profile.kind == "sinusoid":
        return profile.scale * 0.5 * 2 * np.pi / PERIOD
    if profile.kind in ("constant", "none"):
        return 0.0
    raise ValueError(f"no derivative bound for kind {profile.kind!r}")


def force_bound(profile):
    """Supremum of the force magnitude (N) after switch-on."""
    if profile.kind == "sinusoid":
        # |f|^2 = (1 + s/2)^2 + c^2/4 peaks at s = 1
        return profile.scale * 1.5
    if profile.kind == "constant":
        return profile.scale * float(np.linalg.norm(profile.force))
    return 0.0
