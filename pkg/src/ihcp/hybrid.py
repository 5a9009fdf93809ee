"""Alternating selection of the regularisation parameter and the theta
parameter of the time integrator.

Each outer iteration picks alpha with the fast estimator (starting from
zero), then lowers beta as far as the gain norm keeps shrinking and the
inverse recursion stays stable, then rebuilds the matrices for the new
beta.  Iteration stops at ``n_iter``, or when beta comes back as 1 or
unchanged.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .fem import SensorSelector, ThermalSystem
from .inverse import InverseModel
from .ridge import (NoiseModel, RidgeEstimator, build_xi_curve,
                    select_alpha_fast)
from .stability import rho_EA, select_beta

__all__ = ["HybridResult", "TraceEntry", "hybrid_select"]


@dataclass
class TraceEntry:
    iteration: int
    alpha: float
    beta: float
    total_error: float
    gain_norm: float
    rho_EA: float


@dataclass
class HybridResult:
    alpha: float
    beta: float
    iterations: int
    exit_reason: str
    trace: list = field(default_factory=list)
    beta_exit_reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "exit_reason": self.exit_reason,
            "trace": [asdict(t) for t in self.trace],
            "beta_exit_reasons": list(self.beta_exit_reasons),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def hybrid_select(system: ThermalSystem, selector: SensorSelector, dt: float,
                  dq_max, sigma, delta_alpha: float, delta_beta: float = 0.02,
                  xi_steps: int | None = None, n_iter: int = 2,
                  noise: NoiseModel | None = None, rebuild_xi: bool = True,
                  alpha_mode: str = "linear", xi_alphas=None,
                  xi_time: float = 2.0) -> HybridResult:
    """Select ``(alpha, beta)`` without touching measurement data.

    Parameters
    ----------
    dq_max : array_like
        Maximal per-step flux change, one entry per flux region.
    sigma : float or array_like
        Sensor noise level(s).
    delta_alpha, delta_beta : float
        Search increments.
    xi_steps : int, optional
        Length of the pure-noise run for ``xi``; defaults to
        ``round(xi_time / dt)``.
    noise : NoiseModel, optional
        Noise used to calibrate ``xi``; Gaussian with seed 0 by default.
    rebuild_xi : bool
        Recalibrate ``xi`` after every beta update.  ``False`` keeps the
        curve built at ``beta = 1``.
    """
    if xi_steps is None:
        xi_steps = max(2, int(round(xi_time / dt)))
    if noise is None:
        noise = NoiseModel(sigma=sigma, seed=0)
    models: dict = {}

    def model_at(b):
        b = round(b, 12)
        if b not in models:
            models[b] = InverseModel(system, selector, b, dt)
        return models[b]

    alpha, beta = 0.0, 1.0
    model = model_at(beta)
    xi = build_xi_curve(model, noise, xi_steps, xi_alphas)
    trace: list = []
    beta_reasons: list = []
    reason = "iteration cap"
    for k in range(1, n_iter + 1):
        est = RidgeEstimator(model, dq_max, sigma, xi)
        sel = select_alpha_fast(delta_alpha, est, mode=alpha_mode)
        alpha = sel.alpha
        G = model.gain(alpha)
        trace.append(TraceEntry(k, alpha, beta, sel.total_error, G.norm,
                                rho_EA(model.X, G, selector, model.A)))
        if k == n_iter:
            reason = "iteration cap"
            break
        beta0 = beta
        bsel = select_beta(alpha, delta_beta, system, selector, dt,
                           beta_start=beta, models=models)
        beta = bsel.beta
        beta_reasons.append(bsel.exit_reason)
        if beta == 1.0:
            reason = "beta returned to 1"
            break
        if beta == beta0:
            reason = "beta unchanged"
            break
        model = model_at(beta)
        if rebuild_xi:
            xi = build_xi_curve(model, noise, xi_steps, xi_alphas)
    return HybridResult(alpha=alpha, beta=beta, iterations=len(trace),
                        exit_reason=reason, trace=trace,
                        beta_exit_reasons=beta_reasons)
