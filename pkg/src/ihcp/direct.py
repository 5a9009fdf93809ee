"""Theta-family (generalised Euler) time integration of the heat equation.

One step reads::

    T[m+1] = A T[m] + U ((1 - beta) qg[m] + beta qg[m+1])
    U = (C/dt + beta K)^-1,   A = U (C/dt - (1 - beta) K)

``beta = 1`` is backward Euler, ``beta = 0`` forward Euler.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidArgumentError, SingularityError
from .fem import ThermalSystem

__all__ = [
    "IntegratorConfig",
    "Propagator",
    "FluxSchedule",
    "build_propagator",
    "step",
    "simulate",
]


@dataclass(frozen=True)
class IntegratorConfig:
    beta: float = 1.0
    dt: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidArgumentError("beta must lie in [0, 1]")
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")


@dataclass(frozen=True, eq=False)
class Propagator:
    """Dense step matrices for one ``(beta, dt)`` pair."""

    A: np.ndarray
    U: np.ndarray
    beta: float
    dt: float


def build_propagator(system: ThermalSystem,
                     config: IntegratorConfig) -> Propagator:
    """Factor ``C/dt + beta K`` once and form ``A`` and ``U``.

    Raises
    ------
    SingularityError
        If the left-hand matrix is not positive definite.
    """
    C, K = system.capacity, system.conductance
    lhs = C / config.dt + config.beta * K
    try:
        factor = linalg.cho_factor(lhs)
    except linalg.LinAlgError as exc:
        raise SingularityError(
            "C/dt + beta*K is not positive definite") from exc
    U = linalg.cho_solve(factor, np.eye(len(C)))
    A = linalg.cho_solve(factor, C / config.dt - (1.0 - config.beta) * K)
    for a in (A, U):
        a.setflags(write=False)
    return Propagator(A=A, U=U, beta=config.beta, dt=config.dt)


def step(propagator: Propagator, T_m, qg_m, qg_m1) -> np.ndarray:
    """Advance the nodal temperatures by one time step."""
    T_m = np.asarray(T_m, dtype=float)
    qg_m = np.asarray(qg_m, dtype=float)
    qg_m1 = np.asarray(qg_m1, dtype=float)
    n = propagator.A.shape[0]
    if T_m.shape != (n,) or qg_m.shape != (n,) or qg_m1.shape != (n,):
        raise InvalidArgumentError(
            f"expected vectors of length {n}, got {T_m.shape}, "
            f"{qg_m.shape}, {qg_m1.shape}")
    b = propagator.beta
    return propagator.A @ T_m + propagator.U @ ((1.0 - b) * qg_m + b * qg_m1)


@dataclass(frozen=True, eq=False)
class FluxSchedule:
    """Piecewise-constant flux values, shape ``(M + 1, N)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise InvalidArgumentError("flux schedule must be (M+1, N)")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("flux schedule has non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def num_steps(self) -> int:
        return self.values.shape[0] - 1


def simulate(system: ThermalSystem, config: IntegratorConfig,
             schedule: FluxSchedule, T0, M: int,
             propagator: Propagator | None = None) -> np.ndarray:
    """Forward solve; returns the ``(M + 1, N_g)`` temperature history.

    ``T0`` may be a scalar (uniform field) or a nodal vector.
    """
    if not isinstance(schedule, FluxSchedule):
        schedule = FluxSchedule(schedule)
    if schedule.num_steps < M:
        raise InvalidArgumentError(
            f"schedule covers {schedule.num_steps} steps, need {M}")
    if schedule.values.shape[1] != system.num_flux_regions:
        raise InvalidArgumentError("schedule width != number of flux regions")
    prop = propagator or build_propagator(system, config)
    n = system.num_dofs
    hist = np.empty((M + 1, n))
    hist[0] = np.broadcast_to(np.asarray(T0, dtype=float), (n,))
    loads = schedule.values[: M + 1] @ system.unit_flux.T \
        + system.convection_load
    for m in range(M):
        hist[m + 1] = step(prop, hist[m], loads[m], loads[m + 1])
    return hist
