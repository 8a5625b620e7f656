"""Error measurement and convergence-rate extraction.

All norms are quadrature evaluations against the closed-form exact
solution, using the same rule as the assembly (exactness >= 3l).  The
composite error quantities mirror the velocity-error bounds of the
stabilized schemes: a final-time L2 term plus dt-weighted sums of the
viscous, stabilization, and (for the grad-div scheme) divergence
contributions.  Pressure terms that are not computable exactly are
replaced by their standard surrogates: the weighted pressure-gradient
error for the grad-div scheme, and interpolant-based fluctuation
energies for the LPS schemes.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fem

__all__ = [
    "ErrorRecord",
    "RunReport",
    "Recorder",
    "error_norms",
    "composite_error_gd",
    "composite_error_lps",
    "pressure_primitive_error",
    "convergence_rates",
]


@dataclass(frozen=True)
class ErrorRecord:
    t: float
    u_l2: float
    u_h1semi: float
    div_l2: float
    p_l2: float
    p_h1semi: float
    p_fluct_sq: float
    u_fluct_sq: float
    picard_iterations: int


@dataclass
class RunReport:
    """Per-level record collection plus derived summary quantities."""

    level: int
    h: float
    nu: float
    dt: float
    config: object
    records: list = field(default_factory=list)
    p_primitive: float = None

    @property
    def num_steps(self):
        return len(self.records)

    def sum_sq(self, attr):
        return float(sum(getattr(r, attr) ** 2 for r in self.records))

    def sum_of(self, attr):
        return float(sum(getattr(r, attr) for r in self.records))

    @property
    def final_u_l2(self):
        return self.records[-1].u_l2 if self.records else 0.0

    @property
    def picard_iters_max(self):
        return max((r.picard_iterations for r in self.records), default=0)

    def composite(self):
        """Squared composite error of the method this run used."""
        if self.config.method == "GD":
            tau_p = self.h ** 2
            mu = self.config.mu.value_at(self.h)
            return composite_error_gd(self, tau_p, mu, self.nu, self.dt)
        return composite_error_lps(self, self.nu, self.dt)


def _velocity_at_quads(tables, coeffs):
    n = tables.space.num_dofs
    ux = fem.evaluate_field(tables, coeffs[:n])
    uy = fem.evaluate_field(tables, coeffs[n:])
    gx = fem.evaluate_gradient(tables, coeffs[:n])
    gy = fem.evaluate_gradient(tables, coeffs[n:])
    return ux, uy, gx, gy


def error_norms(state, exact, space, tables=None):
    """(L2 velocity, H1-seminorm velocity, L2 div u_h, L2 pressure) errors."""
    if tables is None:
        tables = fem.basis_tables(space, fem.quadrature_for(3 * space.degree))
    sw = tables.scaled_weights
    x = tables.phys_points[..., 0]
    y = tables.phys_points[..., 1]
    t = state.t

    ux, uy, gx, gy = _velocity_at_quads(tables, state.velocity)
    ex1, ex2 = exact.velocity(t, x, y)
    u_l2 = math.sqrt(float((sw * ((ux - ex1) ** 2 + (uy - ex2) ** 2)).sum()))

    d1u1, d2u1, d1u2, d2u2 = exact.velocity_gradient(t, x, y)
    h1 = ((gx[..., 0] - d1u1) ** 2 + (gx[..., 1] - d2u1) ** 2
          + (gy[..., 0] - d1u2) ** 2 + (gy[..., 1] - d2u2) ** 2)
    u_h1semi = math.sqrt(float((sw * h1).sum()))

    div_l2 = math.sqrt(float((sw * (gx[..., 0] + gy[..., 1]) ** 2).sum()))

    ph = fem.evaluate_field(tables, state.pressure)
    p_l2 = math.sqrt(float((sw * (ph - exact.pressure(t, x, y)) ** 2).sum()))
    return u_l2, u_h1semi, div_l2, p_l2


def pressure_gradient_error(state, exact, tables):
    """H1 seminorm of the pressure error (for the grad-div surrogate)."""
    sw = tables.scaled_weights
    x = tables.phys_points[..., 0]
    y = tables.phys_points[..., 1]
    gp = fem.evaluate_gradient(tables, state.pressure)
    e1, e2 = exact.pressure_gradient(state.t, x, y)
    return math.sqrt(float((sw * ((gp[..., 0] - e1) ** 2 + (gp[..., 1] - e2) ** 2)).sum()))


def composite_error_gd(report, tau_p, mu, nu, dt):
    """Squared composite error of the grad-div scheme.

    Final-time L2 velocity error squared, plus dt-weighted sums of the
    nu-scaled H1 error, the tau_p-scaled pressure-gradient error (the
    computable stand-in for the fluctuation term), and the mu-scaled
    divergence.
    """
    return (report.final_u_l2 ** 2
            + dt * nu * report.sum_sq("u_h1semi")
            + dt * tau_p * report.sum_sq("p_h1semi")
            + dt * mu * report.sum_sq("div_l2"))


def composite_error_lps(report, nu, dt):
    """Squared composite error of the fluctuation-stabilized schemes.

    The pressure and velocity stabilization terms are the recorded
    interpolant-based fluctuation energies (already tau-weighted).
    """
    return (report.final_u_l2 ** 2
            + dt * nu * report.sum_sq("u_h1semi")
            + dt * report.sum_of("p_fluct_sq")
            + dt * report.sum_of("u_fluct_sq"))


def pressure_primitive_error(trajectory, exact, space, dt, tables=None):
    """L2 norm of dt * sum_j (p^j - p_h^j) over the trajectory.

    `trajectory` excludes the initial state (no discrete pressure there).
    """
    if tables is None:
        tables = fem.basis_tables(space, fem.quadrature_for(3 * space.degree))
    acc = np.zeros_like(tables.scaled_weights)
    x = tables.phys_points[..., 0]
    y = tables.phys_points[..., 1]
    for state in trajectory:
        ph = fem.evaluate_field(tables, state.pressure)
        acc += exact.pressure(state.t, x, y) - ph
    acc *= dt
    return math.sqrt(float((tables.scaled_weights * acc ** 2).sum()))


def report_summary(report):
    """The per-run quantities of the CSV schema (norm-like square roots)."""
    dt = report.dt
    if report.config.method == "GD":
        tau_p = report.h ** 2
        p_fluct = dt * tau_p * report.sum_sq("p_h1semi")
        u_fluct = 0.0
    else:
        p_fluct = dt * report.sum_of("p_fluct_sq")
        u_fluct = dt * report.sum_of("u_fluct_sq")
    return {
        "err_u_L2_final": report.final_u_l2,
        "err_u_H1_sum": math.sqrt(dt * report.sum_sq("u_h1semi")),
        "err_div_sum": math.sqrt(dt * report.sum_sq("div_l2")),
        "err_p_fluct_sum": math.sqrt(p_fluct),
        "err_u_fluct_sum": math.sqrt(u_fluct),
        "composite": math.sqrt(report.composite()),
        "p_primitive": report.p_primitive,
        "picard_iters_max": report.picard_iters_max,
    }


def convergence_rates(levels, values):
    """log2 rates between consecutive levels; None where undefined."""
    rates = []
    for (l0, e0), (l1, e1) in zip(zip(levels, values), zip(levels[1:], values[1:])):
        if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / ((l1 - l0) * math.log(2.0)))
    return rates


class Recorder:
    """Accumulates per-step error records during a simulation run."""

    def __init__(self, space, blocks, exact, report):
        self.space = space
        self.blocks = blocks
        self.exact = exact
        self.report = report
        self.tables = blocks.tables
        self._prim_acc = np.zeros_like(self.tables.scaled_weights)
        self._is_gd = blocks.config.method == "GD"

    def record(self, state, picard_iterations):
        t = state.t
        u_l2, u_h1, div_l2, p_l2 = error_norms(state, self.exact, self.space, self.tables)
        p_h1 = pressure_gradient_error(state, self.exact, self.tables)

        if self._is_gd:
            p_fluct_sq = 0.0
            u_fluct_sq = 0.0
        else:
            ip = fem.interpolate(self.space, self.exact.pressure_at(t))
            ep = ip - state.pressure
            p_fluct_sq = float(ep @ (self.blocks.pressure_lps @ ep))
            iu = fem.interpolate_vector(self.space, self.exact.velocity_at(t))
            eu = iu - state.velocity
            u_fluct_sq = float(eu @ (self.blocks.velocity_stab @ eu))

        x = self.tables.phys_points[..., 0]
        y = self.tables.phys_points[..., 1]
        ph = fem.evaluate_field(self.tables, state.pressure)
        self._prim_acc += self.exact.pressure(t, x, y) - ph

        self.report.records.append(ErrorRecord(
            t=t, u_l2=u_l2, u_h1semi=u_h1, div_l2=div_l2, p_l2=p_l2,
            p_h1semi=p_h1, p_fluct_sq=p_fluct_sq, u_fluct_sq=u_fluct_sq,
            picard_iterations=picard_iterations))

    def finish(self):
        acc = self.report.dt * self._prim_acc
        self.report.p_primitive = math.sqrt(
            float((self.tables.scaled_weights * acc ** 2).sum()))
        return self.report
