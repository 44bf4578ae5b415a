"""Time integration of the invasion system.

One step advances the three fields by an implicit-explicit (IMEX)
splitting, always in the same order:

1. protease: implicit diffusion and linear decay, explicit production
   from the step-start cell and matrix densities;
2. matrix: exact pointwise exponential decay with the protease frozen
   at its step-start value;
3. cells: implicit diffusion with the drift and growth terms explicit,
   evaluated at step-start fields.

The same splitting runs in two algebraically equivalent formulations.
The primitive one integrates the cell density ``u`` directly, with the
donor-cell drift flux.  The weighted one integrates
``w = u * exp(-int_0^v chi)``, whose equation trades the drift
divergence for a first-order transport term plus reaction terms; it
exists to cross-check the primitive discretization.

Each step also accumulates ``int_0^t m`` and ``int_0^t grad m`` per
cell by the trapezoid rule, which later feeds the exact-decay identity
checks on the matrix gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    PRIMITIVE,
    WEIGHTED,
    ModelParams,
    ScalarField,
    SimState,
    ValidationError,
    taxis_weight,
)
from .operators import (
    _axis_slice,
    gradient_faces,
    haptotaxis_divergence,
    helmholtz_solve,
)

__all__ = [
    "StepperConfig",
    "BlowupError",
    "step_v_exact",
    "stable_dt",
    "imex_step",
    "to_weighted_form",
    "from_weighted_form",
]

DENOM_FLOOR = 1e-14


class BlowupError(RuntimeError):
    """A step produced non-finite values; carries the last good time."""

    def __init__(self, t: float, fields: list[str]):
        super().__init__(f"non-finite values in {', '.join(fields)} while "
                         f"stepping from t={t:.6g}")
        self.t = t
        self.fields = fields


@dataclass(frozen=True)
class StepperConfig:
    """Step-size policy and sampling cadence for a run."""

    t_end: float
    dt_max: float
    record_every: float
    cfl: float = 0.5

    def __post_init__(self):
        for name in ("t_end", "dt_max", "record_every"):
            x = getattr(self, name)
            if not (math.isfinite(x) and x > 0):
                raise ValidationError(f"{name} must be positive and finite, got {x!r}")
        if not 0 < self.cfl <= 1:
            raise ValidationError(f"cfl must be in (0, 1], got {self.cfl!r}")


def step_v_exact(v: ScalarField, m: ScalarField, dt: float) -> ScalarField:
    """Advance the matrix by its exact decay ``v * exp(-m*dt)``.

    Pointwise per cell; exact whenever the protease is constant over
    the step, and monotone nonincreasing for any ``m >= 0``.
    """
    if dt < 0:
        raise ValidationError(f"dt must be >= 0, got {dt}")
    return v.with_values(v.values * np.exp(-m.values * dt))


def _primitive_cells(state: SimState, params: ModelParams) -> np.ndarray:
    if state.formulation == PRIMITIVE:
        return state.cells.values
    return state.cells.values / taxis_weight(state.ecm, params.taxis).values


def stable_dt(state: SimState, params: ModelParams, cfg: StepperConfig) -> float:
    """Largest safe explicit step, capped by ``cfg.dt_max``.

    Three physics guards, each scaled by the CFL safety factor: the
    drift velocity ``chi(v)*grad v`` against the cell size, the
    logistic rate ``mu*(1+u+v)``, and the protease relaxation rate
    (decay plus current level plus the production sensitivity
    ``L_g * max u``).  Denominators are floored at 1e-14 so quiescent
    states fall back to ``dt_max``.
    """
    grid = state.grid
    u = _primitive_cells(state, params)
    v = state.ecm.values
    m = state.protease.values

    candidates = []
    chi = params.taxis
    for d in range(grid.dims):
        lo = _axis_slice(grid.dims, d, slice(None, -1))
        hi = _axis_slice(grid.dims, d, slice(1, None))
        dv = np.diff(v, axis=d) / grid.spacing[d]
        vel = chi(0.5 * (v[lo] + v[hi])) * dv
        speed = float(np.max(np.abs(vel))) if vel.size else 0.0
        candidates.append(cfg.cfl * grid.spacing[d] / max(speed, DENOM_FLOOR))

    if params.growth_rate > 0:
        rate = params.growth_rate * float(np.max(1.0 + u + v))
        candidates.append(cfg.cfl / max(rate, DENOM_FLOOR))

    production_stiffness = params.production.lipschitz_value * float(np.max(u))
    rate = params.protease_decay + float(np.max(m)) + production_stiffness
    candidates.append(cfg.cfl / max(rate, DENOM_FLOOR))

    return min(cfg.dt_max, min(candidates))


def _cell_gradient(f: ScalarField) -> list[np.ndarray]:
    """Face gradients averaged back to centers, one array per axis."""
    dims = f.grid.dims
    out = []
    for d, comp in enumerate(gradient_faces(f).components):
        lo = comp[_axis_slice(dims, d, slice(None, -1))]
        hi = comp[_axis_slice(dims, d, slice(1, None))]
        out.append(0.5 * (lo + hi))
    return out


def _ensure_finite(t: float, **fields: np.ndarray) -> None:
    bad = [name for name, arr in fields.items() if not np.all(np.isfinite(arr))]
    if bad:
        raise BlowupError(t, bad)


def imex_step(state: SimState, params: ModelParams, dt: float,
              flux_scheme: str = "upwind") -> SimState:
    """One IMEX step of size ``dt``; returns the state at ``t + dt``.

    ``flux_scheme`` selects the drift discretization for primitive-form
    runs ("upwind" or "centered"); weighted-form runs ignore it.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ValidationError(f"dt must be positive and finite, got {dt!r}")
    if flux_scheme not in ("upwind", "centered"):
        raise ValidationError(
            f"flux_scheme must be 'upwind' or 'centered', got {flux_scheme!r}")
    _ensure_finite(state.t, cells=state.cells.values, ecm=state.ecm.values,
                   protease=state.protease.values)
    v, m = state.ecm, state.protease
    chi, g = params.taxis, params.production
    mu = params.growth_rate

    m_new = helmholtz_solve(
        params.protease_diffusion, 1.0 / dt + params.protease_decay,
        m.with_values(m.values / dt + _primitive_cells(state, params) * g(v.values)))
    v_new = step_v_exact(v, m, dt)

    if state.formulation == PRIMITIVE:
        u = state.cells
        drift = haptotaxis_divergence(u, v, chi, scheme=flux_scheme)
        explicit = -drift.values + mu * u.values * (1.0 - u.values - v.values)
        cells_new = helmholtz_solve(1.0, 1.0 / dt,
                                    u.with_values(u.values / dt + explicit))
    else:
        w = state.cells
        z = taxis_weight(v, chi).values
        grad_v = gradient_faces(v)
        grad_w = gradient_faces(w)
        dot = np.zeros(state.grid.shape)
        for d in range(state.grid.dims):
            prod = grad_v.components[d] * grad_w.components[d]
            lo = prod[_axis_slice(state.grid.dims, d, slice(None, -1))]
            hi = prod[_axis_slice(state.grid.dims, d, slice(1, None))]
            dot += 0.5 * (lo + hi)
        chi_v = chi(v.values)
        explicit = (chi_v * dot
                    + mu * w.values * (1.0 - w.values / z - v.values)
                    + chi_v * w.values * v.values * m.values)
        cells_new = helmholtz_solve(1.0, 1.0 / dt,
                                    w.with_values(w.values / dt + explicit))

    _ensure_finite(state.t, cells=cells_new.values, ecm=v_new.values,
                   protease=m_new.values)

    int_m = state.int_protease.values + 0.5 * dt * (m.values + m_new.values)
    grads_old = _cell_gradient(m)
    grads_new = _cell_gradient(m_new)
    int_grad = tuple(
        acc.with_values(acc.values + 0.5 * dt * (go + gn))
        for acc, go, gn in zip(state.int_protease_grad, grads_old, grads_new))

    return SimState(state.t + dt, cells_new, v_new, m_new, state.formulation,
                    state.int_protease.with_values(int_m), int_grad)


def to_weighted_form(state: SimState, params: ModelParams) -> SimState:
    """Switch to the weighted density ``w = u * exp(-int_0^v chi)``."""
    if state.formulation != PRIMITIVE:
        raise ValidationError("state is already in weighted form")
    z = taxis_weight(state.ecm, params.taxis)
    return replace(state, cells=state.cells.with_values(state.cells.values * z.values),
                   formulation=WEIGHTED)


def from_weighted_form(state: SimState, params: ModelParams) -> SimState:
    """Recover the primitive cell density from a weighted-form state."""
    if state.formulation != WEIGHTED:
        raise ValidationError("state is not in weighted form")
    z = taxis_weight(state.ecm, params.taxis)
    return replace(state, cells=state.cells.with_values(state.cells.values / z.values),
                   formulation=PRIMITIVE)
