"""Closed-form test solution of the momentum/continuity system.

The velocity is a divergence-free trigonometric field modulated by
cos(t); the pressure is shifted so its mean over the unit square is
zero.  The forcing is assembled from hand-differentiated derivatives,
so every evaluator here is exact and vectorized.
"""

import numpy as np

__all__ = ["ManufacturedSolution"]

_P_SHIFT = (np.cos(1.0) - 1.0) * np.sin(1.0)


class ManufacturedSolution:
    """Exact (velocity, pressure) pair and the induced forcing term."""

    def __init__(self, nu):
        if nu <= 0:
            raise ValueError("viscosity must be positive")
        self.nu = float(nu)

    @staticmethod
    def _phases(x, y):
        return np.pi * x - 0.7, np.pi * y + 0.2

    def velocity(self, t, x, y):
        a, b = self._phases(x, y)
        ct = np.cos(t)
        return ct * np.sin(a) * np.sin(b), ct * np.cos(a) * np.cos(b)

    def velocity_dt(self, t, x, y):
        a, b = self._phases(x, y)
        st = -np.sin(t)
        return st * np.sin(a) * np.sin(b), st * np.cos(a) * np.cos(b)

    def velocity_gradient(self, t, x, y):
        """Returns (d1u1, d2u1, d1u2, d2u2)."""
        a, b = self._phases(x, y)
        ct = np.cos(t)
        d1u1 = np.pi * ct * np.cos(a) * np.sin(b)
        d2u1 = np.pi * ct * np.sin(a) * np.cos(b)
        d1u2 = -np.pi * ct * np.sin(a) * np.cos(b)
        d2u2 = -np.pi * ct * np.cos(a) * np.sin(b)
        return d1u1, d2u1, d1u2, d2u2

    def velocity_laplacian(self, t, x, y):
        u1, u2 = self.velocity(t, x, y)
        factor = -2.0 * np.pi ** 2
        return factor * u1, factor * u2

    def pressure(self, t, x, y):
        return np.cos(t) * (np.sin(x) * np.cos(y) + _P_SHIFT)

    def pressure_gradient(self, t, x, y):
        ct = np.cos(t)
        return ct * np.cos(x) * np.cos(y), -ct * np.sin(x) * np.sin(y)

    def forcing(self, t, x, y):
        """Momentum residual of the exact pair: du/dt - nu*Lap(u)
        + (u.grad)u + grad p."""
        u1, u2 = self.velocity(t, x, y)
        ut1, ut2 = self.velocity_dt(t, x, y)
        l1, l2 = self.velocity_laplacian(t, x, y)
        d1u1, d2u1, d1u2, d2u2 = self.velocity_gradient(t, x, y)
        p1, p2 = self.pressure_gradient(t, x, y)
        f1 = ut1 - self.nu * l1 + u1 * d1u1 + u2 * d2u1 + p1
        f2 = ut2 - self.nu * l2 + u1 * d1u2 + u2 * d2u2 + p2
        return f1, f2

    # wrappers with the call signatures the fem interpolation helpers expect

    def velocity_at(self, t):
        return lambda x, y: self.velocity(t, x, y)

    def pressure_at(self, t):
        return lambda x, y: self.pressure(t, x, y)

    def forcing_fn(self):
        return lambda t, x, y: self.forcing(t, x, y)
