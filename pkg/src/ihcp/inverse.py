"""Sequential Tikhonov-regularised estimation of boundary heat fluxes.

At each measurement step the flux change is obtained from the regularised
normal equation::

    Tbar   = A T[m] + U qg(q[m])             (flux frozen at q[m])
    dq     = G_alpha (Y[m+1] - L_s Tbar)
    G_alpha = (Xs^T Xs + alpha I)^-1 Xs^T,   X = U dqg/dq,  Xs = L_s X
    q[m+1] = q[m] + dq,   T[m+1] = Tbar + X dq
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .direct import IntegratorConfig, Propagator, build_propagator
from .errors import DivergenceError, InvalidArgumentError, SingularityError
from .fem import SensorSelector, ThermalSystem

__all__ = [
    "DIVERGENCE_THRESHOLD",
    "SensitivityMatrix",
    "GainMatrix",
    "InverseState",
    "InverseResult",
    "InverseModel",
    "sensitivity",
    "gain",
    "inverse_step",
    "run_inverse",
]

DIVERGENCE_THRESHOLD = 1e12


@dataclass(frozen=True, eq=False)
class SensitivityMatrix:
    X: np.ndarray
    Xs: np.ndarray


def sensitivity(system: ThermalSystem, propagator: Propagator,
                selector: SensorSelector) -> SensitivityMatrix:
    """Temperature response to a unit flux change, full field and sensors."""
    X = propagator.U @ system.unit_flux
    return SensitivityMatrix(X=X, Xs=selector.extract(X.T).T.copy())


@dataclass(frozen=True, eq=False)
class GainMatrix:
    G: np.ndarray
    alpha: float

    @property
    def norm(self) -> float:
        """Spectral norm (largest singular value)."""
        return float(np.linalg.norm(self.G, 2))


def gain(Xs, alpha: float) -> GainMatrix:
    """Regularised gain ``(Xs^T Xs + alpha I)^-1 Xs^T``.

    Raises
    ------
    SingularityError
        If ``alpha == 0`` and ``Xs^T Xs`` is numerically singular.
    """
    if alpha < 0:
        raise InvalidArgumentError("alpha must be non-negative")
    Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
    normal = Xs.T @ Xs + alpha * np.eye(Xs.shape[1])
    if alpha == 0:
        cond = np.linalg.cond(normal)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularityError(
                "Xs^T Xs is singular; use alpha > 0 or add sensors")
    try:
        G = linalg.cho_solve(linalg.cho_factor(normal), Xs.T)
    except linalg.LinAlgError as exc:
        raise SingularityError(
            "normal matrix is not positive definite; use alpha > 0") from exc
    return GainMatrix(G=G, alpha=float(alpha))


@dataclass(frozen=True, eq=False)
class InverseState:
    step: int
    temperature: np.ndarray
    flux: np.ndarray


def _check_finite(state_vecs, step, model=None, G=None):
    for v in state_vecs:
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > DIVERGENCE_THRESHOLD:
            radius = None
            if model is not None and G is not None:
                from .stability import rho_EA
                radius = rho_EA(model.X, G, model.selector, model.A)
            msg = f"inverse solution diverged at step {step}"
            if radius is not None:
                msg += f" (spectral radius of E_alpha A = {radius:.4g})"
            raise DivergenceError(msg, step=step, spectral_radius=radius)


def inverse_step(state: InverseState, Y_next, system: ThermalSystem,
                 propagator: Propagator, X, G, selector: SensorSelector
                 ) -> InverseState:
    """One sequential update from ``state`` using measurement ``Y_next``."""
    Y_next = np.atleast_1d(np.asarray(Y_next, dtype=float))
    if Y_next.shape != (selector.num_sensors,):
        raise InvalidArgumentError(
            f"measurement vector must have {selector.num_sensors} entries")
    X = getattr(X, "X", X)
    G = getattr(G, "G", G)
    Tbar = propagator.A @ state.temperature \
        + propagator.U @ system.load(state.flux)
    dq = G @ (Y_next - selector.extract(Tbar))
    q = state.flux + dq
    T = Tbar + X @ dq
    _check_finite((T, q), state.step + 1)
    return InverseState(step=state.step + 1, temperature=T, flux=q)


@dataclass(frozen=True, eq=False)
class InverseResult:
    """Flux ``(M + 1, N)`` and temperature ``(M + 1, N_g)`` histories."""

    flux: np.ndarray
    temperature: np.ndarray
    alpha: float
    beta: float


class InverseModel:
    """Matrices of the sequential inverse problem for one ``(beta, dt)``.

    Bundles the propagator, the sensitivity matrix and the sensor selector
    so that repeated runs over different ``alpha`` reuse them.
    """

    def __init__(self, system: ThermalSystem, selector: SensorSelector,
                 beta: float, dt: float):
        self.system = system
        self.selector = selector
        self.propagator = build_propagator(system, IntegratorConfig(beta, dt))
        sens = sensitivity(system, self.propagator, selector)
        self.X = sens.X
        self.Xs = sens.Xs
        self._U_conv = self.propagator.U @ system.convection_load
        self._gains: dict = {}

    @property
    def beta(self) -> float:
        return self.propagator.beta

    @property
    def dt(self) -> float:
        return self.propagator.dt

    @property
    def A(self) -> np.ndarray:
        return self.propagator.A

    @property
    def U(self) -> np.ndarray:
        return self.propagator.U

    def gain(self, alpha: float) -> GainMatrix:
        g = self._gains.get(alpha)
        if g is None:
            g = gain(self.Xs, alpha)
            if len(self._gains) < 4096:
                self._gains[alpha] = g
        return g

    def run(self, measurements, alpha: float, T0=None, q0=None,
            homogeneous: bool = False) -> InverseResult:
        """Apply the sequential update to every measurement row.

        Parameters
        ----------
        measurements : array_like, shape (M, I)
            Row ``m - 1`` holds ``Y[m]``.
        alpha : float
            Regularisation parameter.
        T0 : float or array_like, optional
            Initial field; defaults to the material's initial temperature
            (zero when ``homogeneous``).
        q0 : array_like, optional
            Initial flux estimate, zero by default.
        homogeneous : bool
            Drop the ambient convection load.  Used for pure-noise runs,
            where the state represents an error rather than a temperature.
        """
        Y = np.asarray(getattr(measurements, "values", measurements),
                       dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        I = self.selector.num_sensors
        if Y.ndim != 2 or Y.shape[1] != I:
            raise InvalidArgumentError(f"measurements must be (M, {I})")
        M = Y.shape[0]
        if M < 1:
            raise InvalidArgumentError("need at least one measurement")
        n, N = self.system.num_dofs, self.system.num_flux_regions
        if T0 is None:
            T0 = 0.0 if homogeneous else self.system.material.initial_temp
        G = self.gain(alpha).G
        A, X = self.A, self.X
        Uf = np.zeros(n) if homogeneous else self._U_conv
        sens = list(self.selector.nodes)
        T_hist = np.empty((M + 1, n))
        q_hist = np.empty((M + 1, N))
        T_hist[0] = np.broadcast_to(np.asarray(T0, dtype=float), (n,))
        q_hist[0] = 0.0 if q0 is None else np.broadcast_to(q0, (N,))
        T, q = T_hist[0], q_hist[0]
        for m in range(M):
            Tbar = A @ T + X @ q + Uf
            dq = G @ (Y[m] - Tbar[sens])
            q = q + dq
            T = Tbar + X @ dq
            if not (np.abs(T).max() <= DIVERGENCE_THRESHOLD
                    and np.abs(q).max() <= DIVERGENCE_THRESHOLD):
                _check_finite((T, q), m + 1, self, G)
            T_hist[m + 1] = T
            q_hist[m + 1] = q
        return InverseResult(flux=q_hist, temperature=T_hist,
                             alpha=float(alpha), beta=self.beta)


def run_inverse(measurements, system: ThermalSystem,
                selector: SensorSelector, alpha: float, beta: float,
                dt: float, T0=None, q0=None) -> InverseResult:
    """Convenience wrapper: build an :class:`InverseModel` and run it."""
    model = InverseModel(system, selector, beta, dt)
    return model.run(measurements, alpha, T0=T0, q0=q0)
