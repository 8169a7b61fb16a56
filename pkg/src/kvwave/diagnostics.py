"""Discrete energies, dissipation identity, norms and decay-rate fits.

The discrete energy at step n pairs the layers n and n+1: the kinetic part is
a forward difference in time, the potential part couples the face jumps of
both layers.  For either scheme the step-to-step energy difference equals an
explicitly computable, nonpositive dissipation increment supported on the
interior faces of the damped zone; the per-step residual of that identity is
the primary correctness diagnostic of a run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import FluxCoefficients, Mesh, Parameters

__all__ = [
    "EnergyRecord",
    "EnergyTrace",
    "DecayFit",
    "kinetic_energy",
    "potential_energy_explicit",
    "potential_energy_implicit",
    "total_energy",
    "dissipation_increment",
    "energy_identity_residual",
    "discrete_l2_norm",
    "discrete_h1_seminorm",
    "layer_energies",
    "fit_exponential",
    "fit_polynomial",
]


@dataclass(frozen=True)
class EnergyRecord:
    """Energy bookkeeping for one step.

    dissipation is the increment predicted by the dissipation identity and
    residual is (E^n - E^{n-1}) - dissipation; both are zero by convention on
    the first record of a run, where no previous layer exists.
    """

    variant: str
    step: int
    t: float
    e_kinetic: float
    e_potential: float
    e_total: float
    dissipation: float
    residual: float

    def __post_init__(self) -> None:
        if self.variant not in ("explicit", "implicit"):
            raise ValueError(f"unknown scheme variant {self.variant!r}")
        if self.e_kinetic < 0.0:
            raise ValueError("kinetic energy cannot be negative")
        if self.variant == "implicit" and self.e_potential < 0.0:
            raise ValueError("implicit potential energy cannot be negative")
        if not np.isfinite(self.e_total):
            raise ValueError("total energy must be finite")


@dataclass(frozen=True)
class EnergyTrace:
    """Column-wise energy history of a run, one row per recorded step."""

    variant: str
    step: np.ndarray
    t: np.ndarray
    e_kinetic: np.ndarray
    e_potential: np.ndarray
    e_total: np.ndarray
    dissipation: np.ndarray
    residual: np.ndarray

    def __len__(self) -> int:
        return len(self.step)

    def record(self, i: int) -> EnergyRecord:
        return EnergyRecord(
            variant=self.variant,
            step=int(self.step[i]),
            t=float(self.t[i]),
            e_kinetic=float(self.e_kinetic[i]),
            e_potential=float(self.e_potential[i]),
            e_total=float(self.e_total[i]),
            dissipation=float(self.dissipation[i]),
            residual=float(self.residual[i]),
        )


@dataclass(frozen=True)
class DecayFit:
    """Least-squares decay-rate estimate over a time window.

    For the exponential model, -ln E is regressed against t and `rate` is the
    slope; for the polynomial model, against ln t.
    """

    model: str
    rate: float
    intercept: float
    t_lo: float
    t_hi: float
    residual: float
    n_samples: int


def _face_jumps(values: np.ndarray) -> np.ndarray:
    """Jumps across all faces with zero ghost values at both boundaries."""
    return np.diff(values, prepend=0.0, append=0.0)


def kinetic_energy(u_curr: np.ndarray, u_next: np.ndarray, mesh: Mesh, dt: float) -> float:
    """Half the width-weighted sum of squared forward time differences."""
    rate = (u_next - u_curr) / dt
    return 0.5 * float(mesh.cell_widths @ (rate * rate))


def potential_energy_explicit(
    u_curr: np.ndarray, u_next: np.ndarray, ell: FluxCoefficients
) -> float:
    """Cross product of consecutive-layer face jumps; not sign-definite."""
    return 0.5 * float(ell.ell @ (_face_jumps(u_next) * _face_jumps(u_curr)))


def potential_energy_implicit(
    u_curr: np.ndarray, u_next: np.ndarray, ell: FluxCoefficients
) -> float:
    """Quarter sum of squared face jumps of both layers; always nonnegative."""
    jn, jc = _face_jumps(u_next), _face_jumps(u_curr)
    return 0.25 * float(ell.ell @ (jn * jn)) + 0.25 * float(ell.ell @ (jc * jc))


def total_energy(
    u_curr: np.ndarray,
    u_next: np.ndarray,
    mesh: Mesh,
    ell: FluxCoefficients,
    dt: float,
    variant: str,
) -> tuple[float, float, float]:
    """(kinetic, potential, total) for the layer pair, per scheme variant."""
    e_k = kinetic_energy(u_curr, u_next, mesh, dt)
    if variant == "explicit":
        e_p = potential_energy_explicit(u_curr, u_next, ell)
    elif variant == "implicit":
        e_p = potential_energy_implicit(u_curr, u_next, ell)
    else:
        raise ValueError(f"unknown scheme variant {variant!r}")
    return e_k, e_p, e_k + e_p


def dissipation_increment(
    u_prev: np.ndarray,
    u_next: np.ndarray,
    mesh: Mesh,
    params: Parameters,
    dt: float,
) -> float:
    """Predicted energy drop over one step; nonpositive, zero when undamped.

    Sums the squared centered-in-time rate of the face jumps over the faces
    strictly inside the damped zone.
    """
    if params.delta == 0.0:
        return 0.0
    faces = mesh.damping_interior_faces
    jump_rate = (_face_jumps(u_next)[faces] - _face_jumps(u_prev)[faces]) / (2.0 * dt * mesh.h)
    return -params.delta * dt * mesh.h * float(jump_rate @ jump_rate)


def energy_identity_residual(prev_record: EnergyRecord, curr_record: EnergyRecord) -> float:
    """(E^n - E^{n-1}) - D^n for two consecutive records of one variant."""
    if prev_record.variant != curr_record.variant:
        raise ValueError("records come from different scheme variants")
    if curr_record.step != prev_record.step + 1:
        raise ValueError("records are not consecutive steps")
    return (curr_record.e_total - prev_record.e_total) - curr_record.dissipation


def discrete_l2_norm(values: np.ndarray, mesh: Mesh) -> float:
    """Width-weighted Euclidean norm of cell values."""
    return float(np.sqrt(mesh.cell_widths @ (values * values)))


def discrete_h1_seminorm(values: np.ndarray, ell: FluxCoefficients) -> float:
    """Flux-weighted norm of the face jumps, zero ghosts at the boundary."""
    jumps = _face_jumps(values)
    return float(np.sqrt(ell.ell @ (jumps * jumps)))


def layer_energies(
    layers: np.ndarray,
    mesh: Mesh,
    ell: FluxCoefficients,
    params: Parameters,
    dt: float,
    variant: str,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized energies for a block of consecutive layers.

    layers has shape (m, n_cells) holding layers k .. k+m-1 of a run.  Returns
    (e_kinetic, e_potential, e_total, dissipation, residual); the energy
    arrays have length m-1 (entry j belongs to step k+j), the dissipation and
    residual arrays have length m-2 (entry j belongs to step k+j+1).
    """
    if layers.ndim != 2 or layers.shape[0] < 2:
        raise ValueError("need at least two consecutive layers")
    widths = mesh.cell_widths
    coeffs = ell.ell

    rates = (layers[1:] - layers[:-1]) / dt
    e_k = 0.5 * ((rates * rates) @ widths)
    jumps = np.diff(layers, axis=1, prepend=0.0, append=0.0)
    if variant == "explicit":
        e_p = 0.5 * ((jumps[1:] * jumps[:-1]) @ coeffs)
    elif variant == "implicit":
        sq = (jumps * jumps) @ coeffs
        e_p = 0.25 * (sq[1:] + sq[:-1])
    else:
        raise ValueError(f"unknown scheme variant {variant!r}")
    e_total = e_k + e_p

    if layers.shape[0] > 2:
        faces = mesh.damping_interior_faces
        diff = jumps[2:, faces] - jumps[:-2, faces]
        dissipation = (-params.delta / (4.0 * dt * mesh.h)) * (diff * diff).sum(axis=1)
        residual = (e_total[1:] - e_total[:-1]) - dissipation
    else:
        dissipation = np.empty(0)
        residual = np.empty(0)
    return e_k, e_p, e_total, dissipation, residual


def _window_samples(
    trace: EnergyTrace, window: tuple[float, float], model: str
) -> tuple[np.ndarray, np.ndarray]:
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_lo < t_hi:
        raise ValueError("fit window must satisfy t_lo < t_hi")
    if model == "polynomial" and t_lo <= 0.0:
        raise ValueError("polynomial fit window must start at t > 0")
    mask = (trace.t >= t_lo) & (trace.t <= t_hi)
    t = trace.t[mask]
    e = trace.e_total[mask]
    if len(t) < 10:
        raise ValueError(f"fit window holds {len(t)} samples, need at least 10")
    if np.any(e <= 0.0):
        raise ValueError("nonpositive energy inside the fit window")
    return t, e


def _least_squares_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float((dx @ (y - ym)) / (dx @ dx))
    intercept = float(ym - slope * xm)
    misfit = y - (intercept + slope * x)
    return slope, intercept, float(np.sqrt(np.mean(misfit * misfit)))


def fit_exponential(trace: EnergyTrace, window: tuple[float, float]) -> DecayFit:
    """Slope of -ln E against t over the window (decay rate of e^{-rate t})."""
    t, e = _window_samples(trace, window, "exponential")
    rate, intercept, residual = _least_squares_line(t, -np.log(e))
    return DecayFit("exponential", rate, intercept, float(window[0]), float(window[1]),
                    residual, len(t))


def fit_polynomial(trace: EnergyTrace, window: tuple[float, float]) -> DecayFit:
    """Slope of -ln E against ln t over the window (decay rate of t^{-rate})."""
    t, e = _window_samples(trace, window, "polynomial")
    rate, intercept, residual = _least_squares_line(np.log(t), -np.log(e))
    return DecayFit("polynomial", rate, intercept, float(window[0]), float(window[1]),
                    residual, len(t))
