"""Constrained Newton minimization of the chart distortion energy.

Each iteration solves the KKT system

    [ H  C' ] [ d      ]   [ -g  ]
    [ C  0  ] [ lambda ] = [ -Cx ]

with the projected (positive definite) Hessian, so the step is the
exact constrained Newton direction and iterates stay on the constraint
manifold.  A backtracking line search starts below the first
triangle-collapse step, keeping every iterate flip-free, and enforces
an Armijo decrease, so the energy is monotone.

Convergence is measured by the constraint-projected gradient: the
residual of g against the row space of C, in the infinity norm,
relative to the mean triangle area (the natural scale of the
area-weighted energy gradient).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import bmat, csr_matrix, identity
from scipy.sparse.linalg import splu


@dataclass
class SolverConfig:
    max_iterations: int = 100
    gradient_tolerance: float = 1e-6  # times the mean triangle area
    armijo_slope: float = 1e-4
    step_shrink: float = 0.5
    min_step: float = 1e-12


@dataclass
class IterationStat:
    iteration: int
    energy: float
    mean_distortion: float
    projected_gradient: float
    step: float
    constraint_residual: float


@dataclass
class SolverReport:
    converged: bool
    reason: str
    iterations: int
    energy: float
    mean_distortion: float
    projected_gradient: float
    constraint_residual: float
    n_flipped: int
    seconds: float
    history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "converged": self.converged,
            "reason": self.reason,
            "iterations": self.iterations,
            "energy": self.energy,
            "mean_distortion": self.mean_distortion,
            "projected_gradient": self.projected_gradient,
            "constraint_residual": self.constraint_residual,
            "n_flipped": self.n_flipped,
            "seconds": self.seconds,
            "energy_history": [s.energy for s in self.history],
        }


class _Projector:
    """Least-squares multipliers for the projected gradient."""

    def __init__(self, c):
        self.c = c
        if c.shape[0]:
            gram = (c @ c.T).tocsc()
            self.solve = splu(gram).solve
        else:
            self.solve = None

    def __call__(self, g):
        if self.solve is None:
            return g
        mu = self.solve(self.c @ g)
        return g - self.c.T @ mu


def minimize(energy, constraints, x0, config=None):
    """Run constrained Newton from a feasible flip-free start."""
    cfg = config or SolverConfig()
    c = constraints.matrix
    x = np.asarray(x0, dtype=np.float64).copy()
    if energy.n_flipped(x):
        raise ValueError("initial layout contains flipped triangles")

    t0 = time.perf_counter()
    project = _Projector(c)
    tol = cfg.gradient_tolerance * energy.total_area / len(energy.areas)
    m = c.shape[0]
    history = []
    e = energy.value(x)
    reason, converged = "max_iterations", False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        g = energy.gradient(x)
        pgvec = project(g)
        pg = float(np.abs(pgvec).max())
        if pg <= tol:
            converged, reason = True, "gradient"
            break
        h = energy.hessian(x, project=True)
        if m:
            kkt = bmat([[h, c.T], [c, None]], format="csc")
            rhs = np.concatenate([-g, -(c @ x)])
        else:
            kkt = h.tocsc()
            rhs = -g
        sol = splu(kkt).solve(rhs)
        # re-project the step: the indefinite KKT solve leaves a small
        # row-space component whose dot with the O(1) raw gradient would
        # swamp the true slope near stationarity
        d = project(sol[: len(x)])

        slope = float(pgvec @ d)
        if slope >= 0:
            d = -pgvec
            slope = -float(pgvec @ pgvec)
        if slope >= 0:
            reason = "no_descent"
            break
        noise = 64.0 * np.finfo(np.float64).eps * max(abs(e), 1.0)
        # Newton decrement below the energy's float resolution: no
        # measurable descent is left, the iterate is converged
        if -slope <= 2.0 * noise:
            converged, reason = True, "resolution"
            break
        alpha = min(1.0, energy.max_step(x, d))
        accepted = False
        while alpha >= cfg.min_step:
            e_new = energy.value(x + alpha * d)
            if e_new <= e + cfg.armijo_slope * alpha * slope:
                accepted = True
                break
            # below the energy's floating-point resolution the Armijo
            # decrease is unmeasurable; plain non-increase keeps the
            # trajectory monotone while the gradient finishes contracting
            if e_new <= e and cfg.armijo_slope * alpha * -slope < noise:
                accepted = True
                break
            alpha *= cfg.step_shrink
        if not accepted:
            reason = "stalled"
            break
        x = x + alpha * d
        e = e_new
        history.append(
            IterationStat(
                iteration=it,
                energy=e,
                mean_distortion=e / energy.total_area,
                projected_gradient=pg,
                step=alpha,
                constraint_residual=constraints.residual(x),
            )
        )

    g = energy.gradient(x)
    report = SolverReport(
        converged=converged,
        reason=reason,
        iterations=len(history),
        energy=e,
        mean_distortion=e / energy.total_area,
        projected_gradient=float(np.abs(project(g)).max()),
        constraint_residual=constraints.residual(x),
        n_flipped=energy.n_flipped(x),
        seconds=time.perf_counter() - t0,
        history=history,
    )
    return x, report


def parameterize(chart_set, config=None):
    """End-to-end: initial layout, constraints, Newton solve.

    Returns (x, report, layout, constraints).
    """
    from .constraints import build_constraints
    from .energy import DirichletEnergy
    from .tutte import initial_layout

    layout = initial_layout(chart_set)
    cons = build_constraints(chart_set)
    start_residual = cons.residual(layout.x)
    scale = max(1.0, layout.period)
    if start_residual > 1e-8 * scale:
        raise AssertionError(
            f"initial layout violates constraints by {start_residual:.3g}"
        )
    energy = DirichletEnergy.from_charts(chart_set)
    x, report = minimize(energy, cons, layout.x, config)
    return x, report, layout, cons
