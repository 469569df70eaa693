"""Finite-volume IMPES solver for 1D incompressible two-phase Darcy flow.

Pressure is solved implicitly from div(v) = 0 with two-point fluxes
(harmonic permeability, mobilities upwinded by the previous flow
direction), then the saturation is advanced explicitly with an upwind
scheme under a CFL bound. Gravity and capillary pressure are neglected.

The domain is stored in km to match the reporting convention of the
snapshots; all Darcy computations convert to SI internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

METERS_PER_KM = 1000.0
SECONDS_PER_YEAR = 365.0 * 86400.0

SATURATION_TOL = 1e-12
MAX_PRINCIPLE_TOL = 1e-10


class FlowError(Exception):
    pass


class ZeroFluxError(FlowError):
    """All face fluxes vanish; the stable time step is unbounded."""


class CflViolationError(FlowError):
    """An explicit update left [0, 1] beyond the maximum-principle band."""


class SingularSystemError(FlowError):
    pass


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell grid on (x_min, x_max), coordinates in km."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.n_cells < 2:
            raise ValueError("need at least 2 cells")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def dx_m(self) -> float:
        return self.dx * METERS_PER_KM

    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class RockField:
    """Per-cell porosity [-] and absolute permeability [m^2]."""

    porosity: np.ndarray
    permeability: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.porosity, dtype=float)
        k = np.asarray(self.permeability, dtype=float)
        if phi.shape != k.shape or phi.ndim != 1:
            raise ValueError("porosity and permeability must be matching 1d arrays")
        if np.any(phi <= 0.0) or np.any(phi > 1.0):
            raise ValueError("porosity must lie in (0, 1]")
        if np.any(k <= 0.0):
            raise ValueError("permeability must be positive")
        object.__setattr__(self, "porosity", phi)
        object.__setattr__(self, "permeability", k)

    @classmethod
    def homogeneous(cls, n_cells: int, porosity: float, permeability: float) -> "RockField":
        return cls(np.full(n_cells, porosity), np.full(n_cells, permeability))


@dataclass(frozen=True)
class FluidParams:
    """Viscosities [Pa s] and the power-law relative permeability exponent."""

    mu_w: float
    mu_nw: float
    beta: float

    def __post_init__(self):
        if self.mu_w <= 0.0 or self.mu_nw <= 0.0:
            raise ValueError("viscosities must be positive")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class BoundaryConditions:
    p_left: float
    p_right: float
    s_inflow: float
    s_initial: float

    def __post_init__(self):
        if self.p_left == self.p_right:
            raise ValueError("boundary pressures must differ")
        for name in ("s_inflow", "s_initial"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class Snapshot:
    """One saturation profile tagged with its parameter point z = (t, y)."""

    z: tuple
    values: np.ndarray
    mass: float


def _check_saturation(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < -SATURATION_TOL) or np.any(s > 1.0 + SATURATION_TOL):
        raise ValueError("saturation outside [0, 1]")
    return np.clip(s, 0.0, 1.0)


def total_mobility(s, fluids: FluidParams):
    """lambda_w + lambda_nw = s^beta / mu_w + (1-s)^beta / mu_nw."""
    s = _check_saturation(s)
    return s**fluids.beta / fluids.mu_w + (1.0 - s) ** fluids.beta / fluids.mu_nw


def fractional_flow(s, fluids: FluidParams):
    """Wetting fraction of the total flux, f_w = lambda_w / lambda_t."""
    s = _check_saturation(s)
    lam_w = s**fluids.beta / fluids.mu_w
    lam_nw = (1.0 - s) ** fluids.beta / fluids.mu_nw
    return lam_w / (lam_w + lam_nw)


def fractional_flow_derivative(s, fluids: FluidParams):
    s = _check_saturation(s)
    beta = fluids.beta
    lam_w = s**beta / fluids.mu_w
    lam_nw = (1.0 - s) ** beta / fluids.mu_nw
    dlam_w = beta * s ** (beta - 1.0) / fluids.mu_w
    dlam_nw = beta * (1.0 - s) ** (beta - 1.0) / fluids.mu_nw
    return (dlam_w * lam_nw + lam_w * dlam_nw) / (lam_w + lam_nw) ** 2


@lru_cache(maxsize=64)
def _max_flux_derivative(fluids: FluidParams) -> float:
    grid = np.linspace(0.0, 1.0, 1001)
    lf = float(np.max(np.abs(fractional_flow_derivative(grid, fluids))))
    if not np.isfinite(lf):
        raise FlowError("fractional-flow derivative unbounded on [0, 1]")
    return lf


def _default_directions(bc: BoundaryConditions, n_faces: int) -> np.ndarray:
    return np.full(n_faces, 1.0 if bc.p_left > bc.p_right else -1.0)


def face_directions(p: np.ndarray, bc: BoundaryConditions) -> np.ndarray:
    """Flow orientation per face from the pressure drop of a previous solve."""
    p_ext = np.concatenate([[bc.p_left], p, [bc.p_right]])
    drop = p_ext[:-1] - p_ext[1:]
    return np.where(drop >= 0.0, 1.0, -1.0)


def _face_mobility(s, bc: BoundaryConditions, fluids: FluidParams, dirs) -> np.ndarray:
    """Total mobility per face, upwinded along dirs; boundary ghost cells
    carry the inflow saturation."""
    s_ghost = np.concatenate([[bc.s_inflow], s, [bc.s_inflow]])
    up = np.where(dirs >= 0.0, s_ghost[:-1], s_ghost[1:])
    return total_mobility(up, fluids)


def _transmissibilities(s, rock, fluids, bc, grid, dirs) -> np.ndarray:
    """Face transmissibilities [m/(Pa s)]: harmonic permeability times the
    upwinded mobility over the cell (half-cell at the boundary) distance."""
    k = rock.permeability
    k_face = np.empty(grid.n_cells + 1)
    k_face[1:-1] = 2.0 * k[:-1] * k[1:] / (k[:-1] + k[1:])
    k_face[0] = 2.0 * k[0]
    k_face[-1] = 2.0 * k[-1]
    lam = _face_mobility(s, bc, fluids, dirs)
    trans = k_face * lam / grid.dx_m
    if np.any(trans <= 0.0) or not np.all(np.isfinite(trans)):
        raise SingularSystemError("nonpositive face transmissibility")
    return trans


def solve_pressure(s, rock, fluids, bc, grid, dirs=None) -> np.ndarray:
    """Cell pressures from div(v) = 0 with Dirichlet pressures at both ends.

    dirs fixes the upwind side of the face mobilities; by default the
    orientation implied by the boundary pressures is used (the first IMPES
    step), afterwards callers pass the previous solve's directions.
    """
    s = np.asarray(s, dtype=float)
    n = grid.n_cells
    if s.shape != (n,):
        raise ValueError("saturation field does not match the grid")
    if dirs is None:
        dirs = _default_directions(bc, n + 1)
    trans = _transmissibilities(s, rock, fluids, bc, grid, dirs)

    ab = np.zeros((3, n))
    ab[0, 1:] = trans[1:-1]  # superdiagonal
    ab[1, :] = -(trans[:-1] + trans[1:])  # diagonal
    ab[2, :-1] = trans[1:-1]  # subdiagonal
    rhs = np.zeros(n)
    rhs[0] = -trans[0] * bc.p_left
    rhs[-1] = -trans[-1] * bc.p_right
    return solve_banded((1, 1), ab, rhs)


def total_velocity(p, s, rock, fluids, bc, grid, dirs=None) -> np.ndarray:
    """Total Darcy flux [m/s] through each of the n_cells + 1 faces."""
    if dirs is None:
        dirs = _default_directions(bc, grid.n_cells + 1)
    trans = _transmissibilities(s, rock, fluids, bc, grid, dirs)
    p_ext = np.concatenate([[bc.p_left], p, [bc.p_right]])
    return trans * (p_ext[:-1] - p_ext[1:])


def cfl_timestep(v, rock, fluids: FluidParams, grid: Grid1D, safety: float = 0.9) -> float:
    """Stable explicit step: safety * min over cells of phi dx / (|v| L_f)
    with L_f the max fractional-flow derivative on [0, 1]."""
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety must lie in (0, 1]")
    v = np.asarray(v, dtype=float)
    speed = np.maximum(np.abs(v[:-1]), np.abs(v[1:]))
    if np.all(speed == 0.0):
        raise ZeroFluxError("all face fluxes vanish")
    lf = _max_flux_derivative(fluids)
    with np.errstate(divide="ignore"):
        per_cell = rock.porosity * grid.dx_m / (speed * lf)
    return safety * float(np.min(per_cell))


def _upwind_fluxes(s, v, bc: BoundaryConditions, fluids: FluidParams) -> np.ndarray:
    """Wetting-phase face fluxes v * f_w(s_upwind); inflow faces take the
    boundary saturation."""
    s_ghost = np.concatenate([[bc.s_inflow], s, [bc.s_inflow]])
    up = np.where(v >= 0.0, s_ghost[:-1], s_ghost[1:])
    return v * fractional_flow(up, fluids)


def advance_saturation(s, v, dt, rock, fluids, bc, grid) -> np.ndarray:
    """One explicit upwind step; raises CflViolationError if the update
    leaves [0, 1] beyond the 1e-10 maximum-principle band."""
    s = np.asarray(s, dtype=float)
    flux = _upwind_fluxes(s, v, bc, fluids)
    return _apply_fluxes(s, flux, dt, rock, grid)


def _apply_fluxes(s, flux, dt, rock, grid) -> np.ndarray:
    out = s - dt / (rock.porosity * grid.dx_m) * np.diff(flux)
    if np.any(out < -MAX_PRINCIPLE_TOL) or np.any(out > 1.0 + MAX_PRINCIPLE_TOL):
        worst = float(max(np.max(out) - 1.0, -np.min(out)))
        raise CflViolationError(f"saturation left [0,1] by {worst:.3e}")
    return np.clip(out, 0.0, 1.0)


@dataclass
class BalanceAudit:
    """Cumulative boundary wetting fluxes [m] and pore mass [m] per snapshot."""

    cumulative_influx: list[float]
    cumulative_outflux: list[float]
    pore_mass: list[float]


def run_simulation(
    grid: Grid1D,
    rock: RockField,
    fluids: FluidParams,
    bc: BoundaryConditions,
    snapshot_times_yr,
    y_params: tuple = (),
    safety: float = 0.9,
    return_audit: bool = False,
):
    """IMPES loop producing one Snapshot per requested time (years).

    Steps are truncated to land exactly on each snapshot instant. The
    parameter point of a snapshot is (t_yr, *y_params). With
    return_audit=True a BalanceAudit is attached for conservation checks.
    """
    times = [float(t) for t in snapshot_times_yr]
    if times != sorted(times):
        raise ValueError("snapshot times must be ascending")
    if times and times[0] < 0.0:
        raise ValueError("snapshot times must be nonnegative")

    s = np.full(grid.n_cells, bc.s_initial, dtype=float)
    dirs = _default_directions(bc, grid.n_cells + 1)
    t = 0.0
    cum_in = 0.0
    cum_out = 0.0
    phi_dx = rock.porosity * grid.dx_m
    snapshots: list[Snapshot] = []
    audit = BalanceAudit([], [], [])

    def record(t_yr: float):
        snapshots.append(
            Snapshot(
                z=(t_yr, *y_params),
                values=s.copy(),
                mass=float(s.sum() * grid.dx),
            )
        )
        audit.cumulative_influx.append(cum_in)
        audit.cumulative_outflux.append(cum_out)
        audit.pore_mass.append(float(np.sum(phi_dx * s)))

    for t_yr in times:
        target = t_yr * SECONDS_PER_YEAR
        while target - t > 1e-9 * max(target, 1.0):
            try:
                p = solve_pressure(s, rock, fluids, bc, grid, dirs)
                v = total_velocity(p, s, rock, fluids, bc, grid, dirs)
                dirs = face_directions(p, bc)
                try:
                    dt = min(cfl_timestep(v, rock, fluids, grid, safety), target - t)
                except ZeroFluxError:
                    dt = target - t
                flux = _upwind_fluxes(s, v, bc, fluids)
                s = _apply_fluxes(s, flux, dt, rock, grid)
            except FlowError as err:
                raise FlowError(
                    f"simulation failed at t = {t / SECONDS_PER_YEAR:.6g} yr "
                    f"(target snapshot {t_yr} yr): {err}"
                ) from err
            cum_in += flux[0] * dt
            cum_out += flux[-1] * dt
            t += dt
        t = target
        record(t_yr)

    if return_audit:
        return snapshots, audit
    return snapshots
