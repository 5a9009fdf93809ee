"""Amplification matrices of the inverse recursion and the beta search.

Substituting the gain update into the temperature estimate gives::

    T[m+1] = E A T[m] + E U qg[m] + X G Y[m+1],    E = I - X G L_s

so an initial temperature error is propagated by powers of ``E A`` and an
initial load error by ``E U``.  Boundedness needs ``rho(E A) < 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IHCPError
from .fem import SensorSelector, ThermalSystem
from .inverse import InverseModel

__all__ = [
    "AmplificationPair",
    "BetaSelection",
    "amplification",
    "rho_EA",
    "spectral_radius",
    "select_beta",
    "beta_sweep",
]


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    try:
        eig = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise IHCPError("eigenvalue computation failed") from exc
    return float(np.max(np.abs(eig)))


@dataclass(frozen=True, eq=False)
class AmplificationPair:
    E: np.ndarray
    EA: np.ndarray
    EU: np.ndarray
    rho_EA: float
    rho_EU: float
    norm_EA: float
    norm_EU: float

    @property
    def dominant(self) -> str:
        """``"EA"`` when the temperature branch has the larger norm."""
        return "EA" if self.norm_EA >= self.norm_EU else "EU"


def rho_EA(X, G, L_s, A) -> float:
    """Spectral radius of ``(I - X G L_s) A`` without forming ``E U``."""
    X = getattr(X, "X", X)
    G = getattr(G, "G", G)
    L_s = getattr(L_s, "matrix", L_s)
    return spectral_radius(A - X @ (G @ (L_s @ A)))


def amplification(X, G, L_s, A, U) -> AmplificationPair:
    X = getattr(X, "X", X)
    G = getattr(G, "G", G)
    L_s = getattr(L_s, "matrix", L_s)
    E = np.eye(A.shape[0]) - X @ G @ L_s
    EA = E @ A
    EU = E @ U
    return AmplificationPair(
        E=E, EA=EA, EU=EU,
        rho_EA=spectral_radius(EA), rho_EU=spectral_radius(EU),
        norm_EA=float(np.linalg.norm(EA, 2)),
        norm_EU=float(np.linalg.norm(EU, 2)),
    )


@dataclass
class BetaSelection:
    """Outcome of the beta search.

    ``trace`` rows are ``(beta, gain_norm, rho_EA, rho_EU)`` for every
    candidate visited, in visiting order.  ``exit_reason`` is one of
    ``"gain-increased"``, ``"unstable"``, ``"lower-bound"``,
    ``"degenerate-sensitivity"`` or ``"start-unstable"``.
    """

    beta: float
    exit_reason: str
    trace: list = field(default_factory=list)
    gain_norm: float = float("nan")
    rho_EA: float = float("nan")


# sensors whose sensitivity falls below this fraction of the full-field
# sensitivity no longer see the flux within one step
DEGENERATE_SENSITIVITY = 1e-10


def _degenerate(model) -> bool:
    Xs = np.atleast_2d(model.Xs)
    ref = np.linalg.norm(model.X, axis=0)
    return bool(np.any(np.linalg.norm(Xs, axis=0)
                       <= DEGENERATE_SENSITIVITY * ref))


def _model(system, selector, dt, beta, cache):
    model = cache.get(beta)
    if model is None:
        model = InverseModel(system, selector, beta, dt)
        cache[beta] = model
    return model


def _evaluate(system, selector, dt, beta, alpha, cache, full=True):
    model = _model(system, selector, dt, beta, cache)
    G = model.gain(alpha)
    if not full:
        return G.norm, rho_EA(model.X, G, selector.matrix, model.A), math.nan
    amp = amplification(model.X, G, selector.matrix, model.A, model.U)
    return G.norm, amp.rho_EA, amp.rho_EU


def select_beta(alpha: float, delta_beta: float, system: ThermalSystem,
                selector: SensorSelector, dt: float, beta_start: float = 1.0,
                models: dict | None = None,
                diagnostics: bool = False) -> BetaSelection:
    """Lower ``beta`` while the gain norm does not grow and ``rho(EA) < 1``.

    Walks ``beta_start, beta_start - delta_beta, ...`` and stops at the first
    candidate whose gain norm exceeds its predecessor's or whose ``E A`` has
    spectral radius >= 1; the previous candidate is returned.  A candidate
    whose sensor sensitivity vanishes (a column of ``Xs`` is numerically
    zero, as happens at ``beta = 0`` with a lumped capacity and sensors off
    the heated boundary) also stops the search.  Candidates
    are generated from an integer counter so the grid does not drift.
    ``rho_EU`` in the trace is only computed when ``diagnostics`` is set
    (it does not enter the decision) and is NaN otherwise.
    """
    if not delta_beta > 0:
        raise ValueError("delta_beta must be positive")
    cache = {} if models is None else models
    beta0 = round(float(beta_start), 12)
    g_old, rho_ea, rho_eu = _evaluate(system, selector, dt, beta0, alpha,
                                      cache, diagnostics)
    trace = [(beta0, g_old, rho_ea, rho_eu)]
    if not rho_ea < 1.0:
        return BetaSelection(beta0, "start-unstable", trace, g_old, rho_ea)
    k = 0
    best = (beta0, g_old, rho_ea)
    while True:
        beta = round(beta0 - (k + 1) * delta_beta, 12)
        if beta < 0.0:
            reason = "lower-bound"
            break
        if _degenerate(_model(system, selector, dt, beta, cache)):
            trace.append((beta, float("nan"), float("nan"), float("nan")))
            reason = "degenerate-sensitivity"
            break
        g, rho_ea, rho_eu = _evaluate(system, selector, dt, beta, alpha,
                                      cache, diagnostics)
        trace.append((beta, g, rho_ea, rho_eu))
        if not g <= g_old:
            reason = "gain-increased"
            break
        if not rho_ea < 1.0:
            reason = "unstable"
            break
        best = (beta, g, rho_ea)
        g_old = g
        k += 1
    return BetaSelection(best[0], reason, trace, best[1], best[2])


def beta_sweep(alpha: float, betas, system: ThermalSystem,
               selector: SensorSelector, dt: float) -> np.ndarray:
    """Rows ``(beta, gain_norm, rho_EA, rho_EU)`` over a beta grid."""
    cache: dict = {}
    rows = [(b, *_evaluate(system, selector, dt, float(b), alpha, cache))
            for b in betas]
    return np.array(rows)
