"""Selection of the Tikhonov parameter alpha.

Two estimators live here:

* the fast bias/variance estimator.  The total flux error is split as
  ``T2(alpha) = D2(alpha) + V2(alpha)``.  The bias term comes from the
  steady offset a maximal flux change ``dq_max`` induces at the sensors,
  mapped back to flux through the statically condensed conductance.  The
  variance term is a closed-form response to alternating sensor noise,
  rescaled by a noise-calibrated ratio ``xi(alpha)``.  Neither term reads
  measurement data;
* the Morozov discrepancy principle, which runs the full inverse solution
  for every alpha on a grid and matches the mean squared temperature
  residual to the noise variance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import isotonic_regression

from .errors import (CondensationError, DegenerateSensingError,
                     DivergenceError, InvalidArgumentError, SingularityError,
                     StabilityError)
from .fem import SensorSelector, ThermalSystem
from .inverse import InverseModel, gain

log = logging.getLogger(__name__)

__all__ = [
    "NoiseModel",
    "Condensation",
    "BiasModel",
    "VarianceModel",
    "XiCurve",
    "ErrorBudget",
    "RidgeEstimator",
    "AlphaSelection",
    "MorozovResult",
    "offset_temperature",
    "condense",
    "build_bias_model",
    "bias_error",
    "amplification_steps",
    "variance_delta",
    "build_variance_model",
    "xi_ratio",
    "build_xi_curve",
    "total_error",
    "select_alpha_fast",
    "morozov_select",
    "estimate_dq_max",
]

PINV_RCOND = 1e-12


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Per-sensor measurement noise.

    ``kind="gaussian"`` draws iid ``N(0, sigma_i^2)`` samples;
    ``kind="alternating"`` is the deterministic ``(-1)^m sigma`` sequence.
    """

    sigma: tuple
    seed: int = 0
    kind: str = "gaussian"

    def __post_init__(self):
        sig = tuple(float(s) for s in np.atleast_1d(self.sigma))
        if any(not s >= 0 for s in sig):
            raise InvalidArgumentError("sigma must be non-negative")
        if self.kind not in ("gaussian", "alternating"):
            raise InvalidArgumentError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "sigma", sig)

    @property
    def sigma_vector(self) -> np.ndarray:
        return np.array(self.sigma)

    def sample(self, num_steps: int, num_sensors: int | None = None,
               rng: np.random.Generator | None = None) -> np.ndarray:
        """Noise rows for steps ``1..num_steps``, shape ``(num_steps, I)``."""
        sig = self.sigma_vector
        if num_sensors is not None and len(sig) == 1:
            sig = np.repeat(sig, num_sensors)
        if self.kind == "alternating":
            signs = (-1.0) ** np.arange(1, num_steps + 1)
            return signs[:, None] * sig[None, :]
        rng = rng or np.random.default_rng(self.seed)
        return rng.standard_normal((num_steps, len(sig))) * sig[None, :]


def _sigma_for(sigma, num_sensors):
    sig = np.atleast_1d(np.asarray(sigma, dtype=float))
    if len(sig) == 1 and num_sensors > 1:
        sig = np.repeat(sig, num_sensors)
    if len(sig) != num_sensors:
        raise InvalidArgumentError("sigma length != number of sensors")
    return sig


# --------------------------------------------------------------------------
# bias error
# --------------------------------------------------------------------------

def _offset_operator(Xs):
    Xs = np.atleast_2d(Xs)
    return np.linalg.pinv(Xs @ Xs.T, rcond=PINV_RCOND) @ Xs


def offset_temperature(alpha: float, Xs, dq_max) -> np.ndarray:
    """Sensor temperature offset ``alpha (Xs Xs^T)^+ Xs dq_max``."""
    if alpha < 0:
        raise InvalidArgumentError("alpha must be non-negative")
    return alpha * (_offset_operator(Xs) @ np.atleast_1d(dq_max))


@dataclass(frozen=True, eq=False)
class Condensation:
    """Static condensation of ``K`` onto the sensed DOFs.

    ``K_hat = 2 (K_ss + K_sv Psi)``, ``Psi = -K_vv^-1 K_vs`` and the
    condensed unit fluxes ``q_hat = Q_s + Psi^T Q_v`` (one column per flux
    region).
    """

    K_hat: np.ndarray
    psi: np.ndarray
    q_hat: np.ndarray | None


def condense(K, selector: SensorSelector, unit_flux=None) -> Condensation:
    K = np.asarray(K, dtype=float)
    s = np.array(selector.nodes)
    v = np.setdiff1d(np.arange(K.shape[0]), s)
    Kss = K[np.ix_(s, s)]
    if len(v) == 0:
        psi = np.zeros((0, len(s)))
        K_hat = 2.0 * Kss
    else:
        Kvv = K[np.ix_(v, v)]
        Kvs = K[np.ix_(v, s)]
        try:
            psi = -linalg.cho_solve(linalg.cho_factor(Kvv), Kvs)
        except linalg.LinAlgError as exc:
            raise CondensationError(
                "K_vv is singular; use h > 0 or ground the virtual DOFs"
            ) from exc
        K_hat = 2.0 * (Kss + K[np.ix_(s, v)] @ psi)
    q_hat = None
    if unit_flux is not None:
        Q = np.asarray(unit_flux, dtype=float)
        q_hat = Q[s] + (psi.T @ Q[v] if len(v) else 0.0)
    return Condensation(K_hat=K_hat, psi=psi, q_hat=q_hat)


@dataclass(frozen=True, eq=False)
class BiasModel:
    dq_max: np.ndarray
    K_hat: np.ndarray
    psi: np.ndarray
    q_hat: np.ndarray
    offset_operator: np.ndarray

    def offset(self, alpha: float) -> np.ndarray:
        return alpha * (self.offset_operator @ self.dq_max)


def build_bias_model(system: ThermalSystem, selector: SensorSelector, Xs,
                     dq_max) -> BiasModel:
    dq = np.atleast_1d(np.asarray(dq_max, dtype=float))
    if dq.shape != (system.num_flux_regions,):
        raise InvalidArgumentError("dq_max must have one entry per region")
    cond = condense(system.conductance, selector, system.unit_flux)
    return BiasModel(dq_max=dq, K_hat=cond.K_hat, psi=cond.psi,
                     q_hat=cond.q_hat, offset_operator=_offset_operator(Xs))


def bias_error(alpha: float, bias_model: BiasModel) -> float:
    """Lower-bound bias estimate ``(dT^T K_hat dT)^2 / |q_dT|^2``."""
    dT = bias_model.offset(alpha)
    if alpha == 0 or not np.any(dT):
        return 0.0
    q_dT = bias_model.q_hat.T @ dT
    denom = float(q_dT @ q_dT)
    if denom == 0.0:
        raise DegenerateSensingError(
            "sensor offset is orthogonal to every condensed unit flux")
    num = float(dT @ bias_model.K_hat @ dT)
    return num * num / denom


# --------------------------------------------------------------------------
# variance error
# --------------------------------------------------------------------------

def amplification_steps(A, cap: int | None = None) -> int:
    """Smallest ``m >= 1`` with ``||A^(m+1)||_2 < 1``.

    ``cap`` defaults to ten decay times of the slowest mode of ``A``.
    """
    A = np.asarray(A)
    if cap is None:
        r = np.max(np.abs(np.linalg.eigvals(A)))
        if r >= 1.0:
            raise StabilityError("spectral radius of A is >= 1")
        cap = 1 if r == 0 else max(1, math.ceil(-10.0 / math.log(r)))
    P = A @ A
    for m in range(1, cap + 1):
        if np.linalg.norm(P, 2) < 1.0:
            return m
        P = P @ A
    log.warning("||A^(m+1)|| did not drop below 1 within %d steps", cap)
    return cap


def _propagation_operator(A, X, L_s, M_a):
    """``L_s W X`` where ``W`` is the parity-dependent matrix sum.

    The alternating-noise sum over past steps collapses to::

        even M_a:  W = [(I + A^(M_a+1)) (I+A)^-1 A^2 - I] (I-A)^-1
        odd  M_a:  W = (I - A^(M_a+1)) (I+A)^-1 A^2 (I-A)^-1
    """
    n = A.shape[0]
    eye = np.eye(n)
    if np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
        raise StabilityError("variance model needs rho(A) < 1")
    Y1 = np.linalg.solve(eye - A, X)
    Y3 = np.linalg.solve(eye + A, A @ (A @ Y1))
    P = Y3.copy()
    for _ in range(M_a + 1):
        P = A @ P
    if M_a % 2 == 0:
        W_X = Y3 + P - Y1
    else:
        W_X = Y3 - P
    return L_s @ W_X


def variance_delta(alpha, sigma, A, X, G, L_s, M_a: int) -> np.ndarray:
    """Flux-change error driven by alternating noise ``(-1)^m sigma``.

    Returns the value at step ``M_a + 1`` in the phase where the newest
    noise sample is ``+sigma``; the sign flips every step.
    """
    X = getattr(X, "X", X)
    G = getattr(G, "G", G)
    L_s = getattr(L_s, "matrix", L_s)
    sig = _sigma_for(sigma, L_s.shape[0])
    B = _propagation_operator(np.asarray(A), X, L_s, M_a)
    g = G @ sig
    return G @ (sig - B @ g)


@dataclass(frozen=True, eq=False)
class VarianceModel:
    """Alpha-independent pieces of the closed-form variance error."""

    sigma: np.ndarray
    M_a: int
    Xs: np.ndarray
    propagation: np.ndarray

    def delta(self, alpha: float) -> np.ndarray:
        G = gain(self.Xs, alpha).G
        g = G @ self.sigma
        return G @ (self.sigma - self.propagation @ g)


def build_variance_model(model: InverseModel, sigma,
                         M_a: int | None = None) -> VarianceModel:
    sig = _sigma_for(sigma, model.selector.num_sensors)
    if M_a is None:
        M_a = amplification_steps(model.A)
    B = _propagation_operator(model.A, model.X, model.selector.matrix, M_a)
    return VarianceModel(sigma=sig, M_a=int(M_a), Xs=model.Xs, propagation=B)


def xi_ratio(alpha: float, model: InverseModel, noise,
             discard: int = 0) -> float:
    """Flux-to-flux-change ratio from a run on pure noise data.

    ``noise`` is an ``(M_s, I)`` array of zero-mean sensor noise.  Returns
    ``sqrt(sum |q|^2 / sum |dq|^2)`` over steps ``discard+1..M_s``.  The
    run starts from a zero state with ``q[0] = 0``, so the first change is
    the whole first flux; ``discard > 0`` drops that start-up transient.
    """
    noise = np.asarray(noise, dtype=float)
    if noise.ndim == 1:
        noise = noise[:, None]
    if not 0 <= discard <= noise.shape[0] - 2:
        raise InvalidArgumentError("xi needs at least two retained steps")
    res = model.run(noise, alpha, homogeneous=True)
    q = res.flux[1 + discard:]
    dq = np.diff(res.flux, axis=0)[discard:]
    den = float(np.sum(dq * dq))
    if den == 0.0:
        raise DegenerateSensingError("noise produced no flux change")
    return math.sqrt(float(np.sum(q * q)) / den)


@dataclass(frozen=True, eq=False)
class XiCurve:
    """Monotone piecewise-linear fit of ``xi`` samples.

    ``alphas[0]`` is zero; interpolation is linear in ``alpha`` on the
    first interval and linear in ``log(alpha)`` beyond.  Values past the
    last grid point are held constant.
    """

    alphas: np.ndarray
    samples: np.ndarray
    fitted: np.ndarray

    def __call__(self, alpha: float) -> float:
        a = self.alphas
        if alpha <= 0:
            return float(self.fitted[0])
        if alpha >= a[-1]:
            return float(self.fitted[-1])
        if alpha <= a[1]:
            w = alpha / a[1]
            return float((1 - w) * self.fitted[0] + w * self.fitted[1])
        la = np.log(a[1:])
        return float(np.interp(math.log(alpha), la, self.fitted[1:]))


def default_alpha_grid(Xs, num: int = 25, decades=(-6.0, 6.0)) -> np.ndarray:
    """Zero followed by ``num`` log-spaced values scaled to ``|Xs|^2``."""
    scale = float(np.linalg.norm(np.atleast_2d(Xs), 2)) ** 2
    return np.concatenate(
        [[0.0], scale * np.logspace(decades[0], decades[1], num)])


def build_xi_curve(model: InverseModel, noise_model: NoiseModel,
                   num_steps: int, alphas=None) -> XiCurve:
    """Sample ``xi`` over an alpha grid with one shared noise realisation."""
    if alphas is None:
        alphas = default_alpha_grid(model.Xs)
    alphas = np.asarray(alphas, dtype=float)
    if alphas[0] != 0.0:
        alphas = np.concatenate([[0.0], alphas])
    noise = noise_model.sample(num_steps, model.selector.num_sensors)
    samples = np.full(len(alphas), np.nan)
    for i, a in enumerate(alphas):
        try:
            samples[i] = xi_ratio(a, model, noise)
        except (SingularityError, DivergenceError, DegenerateSensingError):
            # alpha where the noise run is undefined or unstable
            pass
    ok = np.isfinite(samples)
    if not ok.any():
        raise DegenerateSensingError("xi undefined at every grid alpha")
    fitted = np.empty(len(alphas))
    fitted[ok] = isotonic_regression(samples[ok], increasing=True).x
    # undefined samples take the fitted value of the nearest defined alpha
    idx = np.arange(len(alphas))
    near = np.array([idx[ok][np.argmin(np.abs(idx[ok] - i))] for i in idx])
    fitted = np.maximum.accumulate(fitted[near])
    return XiCurve(alphas=alphas, samples=samples, fitted=fitted)


# --------------------------------------------------------------------------
# total error and selectors
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ErrorBudget:
    alphas: np.ndarray
    bias: np.ndarray
    variance: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.bias + self.variance

    def rows(self):
        return np.column_stack([self.alphas, self.bias, self.variance,
                                self.total])


def total_error(alpha: float, bias_model: BiasModel,
                variance_model: VarianceModel, xi) -> float:
    """``D2 + V2`` with ``V2 = |xi(alpha) * variance_delta|^2``."""
    try:
        d = variance_model.delta(alpha)
    except SingularityError:
        return math.inf
    x = xi(alpha) if callable(xi) else float(xi)
    return bias_error(alpha, bias_model) + x * x * float(d @ d)


class RidgeEstimator:
    """Measurement-free total-error model for one ``(beta, dt)``.

    Parameters
    ----------
    model : InverseModel
        Matrices at the current ``beta``.
    dq_max : array_like
        Maximal flux change per step, one entry per flux region.
    sigma : float or array_like
        Sensor noise standard deviations.
    xi : XiCurve or callable or float
        Variance scaling; see :func:`build_xi_curve`.
    """

    def __init__(self, model: InverseModel, dq_max, sigma, xi,
                 M_a: int | None = None):
        self.model = model
        self.bias_model = build_bias_model(model.system, model.selector,
                                           model.Xs, dq_max)
        self.variance_model = build_variance_model(model, sigma, M_a)
        self.xi = xi

    def bias(self, alpha: float) -> float:
        return bias_error(alpha, self.bias_model)

    def variance(self, alpha: float) -> float:
        """Variance term; infinite where the gain does not exist."""
        try:
            d = self.variance_model.delta(alpha)
        except SingularityError:
            return math.inf
        x = self.xi(alpha) if callable(self.xi) else float(self.xi)
        return x * x * float(d @ d)

    def total(self, alpha: float) -> float:
        return self.bias(alpha) + self.variance(alpha)

    def budget(self, alphas) -> ErrorBudget:
        alphas = np.asarray(alphas, dtype=float)
        return ErrorBudget(alphas=alphas,
                           bias=np.array([self.bias(a) for a in alphas]),
                           variance=np.array([self.variance(a)
                                              for a in alphas]))


@dataclass
class AlphaSelection:
    alpha: float
    total_error: float
    evaluations: int


def select_alpha_fast(delta_alpha: float, estimator, mode: str = "linear",
                      growth: float = 1.25,
                      max_evaluations: int = 10_000_000) -> AlphaSelection:
    """Walk alpha up from zero while the estimated total error decreases.

    ``estimator`` is anything with a ``total(alpha)`` method.  ``mode``
    ``"linear"`` adds ``delta_alpha`` each step; ``"geometric"`` takes
    ``max(alpha + delta_alpha, growth * alpha)``.  Returns the last alpha
    whose total error did not exceed its predecessor's.
    """
    if not delta_alpha > 0:
        raise InvalidArgumentError("delta_alpha must be positive")
    if mode not in ("linear", "geometric"):
        raise InvalidArgumentError(f"unknown alpha step mode {mode!r}")
    alpha_prev, t_prev = 0.0, estimator.total(0.0)
    alpha, t_cur = alpha_prev, t_prev
    n = 1
    while t_prev >= t_cur:
        if n >= max_evaluations:
            log.warning("alpha search hit max_evaluations=%d",
                        max_evaluations)
            return AlphaSelection(alpha, t_cur, n)
        alpha_prev, t_prev = alpha, t_cur
        if mode == "linear":
            alpha = (n) * delta_alpha
        else:
            alpha = max(alpha + delta_alpha, growth * alpha)
        t_cur = estimator.total(alpha)
        n += 1
    return AlphaSelection(alpha_prev, t_prev, n)


@dataclass
class MorozovResult:
    alpha: float
    alphas: np.ndarray
    residuals: np.ndarray
    target: float
    crossed: bool
    warning: str | None = None


def morozov_select(measurements, alpha_grid, sigma, model: InverseModel,
                   T0=None) -> MorozovResult:
    """Discrepancy-principle alpha from full inverse runs over a grid.

    The residual is ``mean_m |Y[m] - L_s T_alpha[m]|^2`` and the target is
    ``sum(sigma^2)``.  Grid values whose run diverges get a NaN residual
    and are skipped.  The grid value nearest the first upward crossing is
    returned; if no crossing exists the smallest alpha is returned when all
    residuals are below the target, else the nearest-residual alpha.
    """
    alphas = np.sort(np.asarray(alpha_grid, dtype=float))
    if alphas.size == 0:
        raise InvalidArgumentError("alpha grid is empty")
    Y = np.asarray(getattr(measurements, "values", measurements), float)
    if Y.ndim == 1:
        Y = Y[:, None]
    target = float(np.sum(_sigma_for(sigma, Y.shape[1]) ** 2))
    sens = list(model.selector.nodes)
    res = np.full(len(alphas), np.nan)
    for i, a in enumerate(alphas):
        try:
            run = model.run(Y, a, T0=T0)
        except (DivergenceError, SingularityError):
            # inadmissible alpha; left as NaN and skipped below
            continue
        r = Y - run.temperature[1:, sens]
        res[i] = float(np.mean(np.sum(r * r, axis=1)))
    ok = np.nonzero(np.isfinite(res))[0]
    if ok.size == 0:
        raise DivergenceError("inverse run diverged for every grid alpha")
    if ok.size < len(alphas):
        log.info("morozov: %d grid alphas diverged and were skipped",
                 len(alphas) - ok.size)
    a_ok, r_ok = alphas[ok], res[ok]
    above = np.nonzero(r_ok >= target)[0]
    if above.size and above[0] > 0:
        i = above[0]
        j = i if (r_ok[i] - target) < (target - r_ok[i - 1]) else i - 1
        return MorozovResult(float(a_ok[j]), alphas, res, target, True)
    if above.size == 0:
        msg = "residual below sigma^2 for every alpha; smallest alpha used"
        log.warning(msg)
        return MorozovResult(float(a_ok[0]), alphas, res, target, False,
                             msg)
    if r_ok[0] == target:
        return MorozovResult(float(a_ok[0]), alphas, res, target, True)
    j = int(np.argmin(np.abs(r_ok - target)))
    msg = "residual above sigma^2 for every alpha; nearest residual used"
    log.warning(msg)
    return MorozovResult(float(a_ok[j]), alphas, res, target, False, msg)


def estimate_dq_max(flux_history) -> np.ndarray:
    """Largest absolute per-step flux change of a history ``(M+1, N)``.

    Used for ``dq_max`` when it is not known a priori.
    """
    q = np.asarray(flux_history, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    return np.max(np.abs(np.diff(q, axis=0)), axis=0)
