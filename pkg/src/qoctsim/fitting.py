"""Damped (Levenberg–Marquardt) least-squares fitting.

All curve fits in the package go through :func:`damped_least_squares`:
a model callable maps a parameter vector to a prediction array, the fitter
minimizes the (optionally weighted) sum of squared residuals against the
data.  Jacobians are built by forward finite differences; parameters can be
frozen with ``fixed_mask`` or box-constrained with ``bounds``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError


@dataclass
class FitResult:
    """Optimum of a least-squares problem with 1-sigma uncertainties.

    ``sigmas`` come from the covariance of the linearized problem at the
    optimum, scaled by the reduced chi-square; frozen parameters carry
    sigma 0.  ``condition`` is the condition number of J^T J at the optimum
    (large values flag poorly determined parameter combinations).
    """

    names: list[str]
    values: np.ndarray
    sigmas: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    condition: float
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.sigmas[self.names.index(name)])

    def as_dict(self) -> dict:
        return {
            "parameters": [
                {"name": n, "value": float(v), "sigma": float(s)}
                for n, v, s in zip(self.names, self.values, self.sigmas)
            ],
            "covariance": self.covariance.tolist(),
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "condition": float(self.condition),
            **self.extras,
        }


def finite_difference_jacobian(model, params, step_scale=1e-7, free=None):
    """Forward-difference Jacobian of ``model`` at ``params``.

    Step per parameter is ``step_scale * max(|p|, 1)``.  Columns for frozen
    parameters (``free[i] == False``) are zero.
    """
    params = np.asarray(params, dtype=float)
    y0 = np.asarray(model(params), dtype=float)
    jac = np.zeros((y0.size, params.size))
    if free is None:
        free = np.ones(params.size, dtype=bool)
    for i in range(params.size):
        if not free[i]:
            continue
        h = step_scale * max(abs(params[i]), 1.0)
        p = params.copy()
        p[i] += h
        jac[:, i] = (np.asarray(model(p), dtype=float) - y0) / h
    return jac


def damped_least_squares(
    model,
    params0,
    data,
    bounds=None,
    fixed_mask=None,
    *,
    weights=None,
    names=None,
    max_iter=200,
    gtol=1e-10,
    xtol=1e-12,
    step_scale=1e-7,
    raise_on_failure=True,
):
    """Levenberg–Marquardt minimization of ||model(p) - data||^2.

    Parameters
    ----------
    model : callable
        Maps a parameter vector to a prediction array of ``data``'s shape.
    params0 : array-like
        Initial parameter vector (finite).
    data : array-like
        Target values.
    bounds : list of (lo, hi) or None
        Box constraints; ``None`` entries (or infinities) are unbounded.
        Trial steps are clipped to the box.
    fixed_mask : array-like of bool or None
        True entries are held at their initial value bit-exactly.
    weights : array-like or None
        Per-point multiplicative weights on the residuals.
    names : list of str or None
        Parameter names for reporting; defaults to p0, p1, ...

    Returns
    -------
    FitResult

    Raises
    ------
    NonConvergenceError
        If the iteration budget is exhausted before the gradient or step
        criterion is met and ``raise_on_failure`` is true.
    """
    params = np.array(params0, dtype=float)
    if not np.all(np.isfinite(params)):
        raise ValueError("initial parameters must be finite")
    y = np.asarray(data, dtype=float).ravel()
    w = None if weights is None else np.asarray(weights, dtype=float).ravel()

    n = params.size
    free = np.ones(n, dtype=bool)
    if fixed_mask is not None:
        free &= ~np.asarray(fixed_mask, dtype=bool)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    if bounds is not None:
        for i, b in enumerate(bounds):
            if b is None:
                continue
            if b[0] is not None:
                lo[i] = b[0]
            if b[1] is not None:
                hi[i] = b[1]
        params = np.clip(params, lo, hi)
    if names is None:
        names = [f"p{i}" for i in range(n)]

    def residual(p):
        r = np.asarray(model(p), dtype=float).ravel() - y
        return r if w is None else r * w

    r = residual(params)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    nu = 4.0
    converged = False
    iterations = 0
    jtj = np.zeros((n, n))

    for iterations in range(1, max_iter + 1):
        jac = finite_difference_jacobian(model, params, step_scale, free)
        if w is not None:
            jac = jac * w[:, None]
        jf = jac[:, free]
        g = jf.T @ r
        if np.max(np.abs(g), initial=0.0) < gtol:
            converged = True
            break
        jtj_f = jf.T @ jf
        diag = np.diag(jtj_f).copy()
        diag[diag <= 0] = 1.0

        accepted = False
        for _ in range(50):
            try:
                delta = np.linalg.solve(jtj_f + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= nu
                continue
            trial = params.copy()
            trial[free] = trial[free] + delta
            trial = np.clip(trial, lo, hi)
            if np.max(np.abs(trial - params)) < xtol * (np.max(np.abs(params)) + xtol):
                converged = True
                accepted = True
                break
            r_trial = residual(trial)
            cost_trial = 0.5 * float(r_trial @ r_trial)
            if cost_trial <= cost:
                params, r, cost = trial, r_trial, cost_trial
                lam = max(lam / nu, 1e-14)
                accepted = True
                break
            lam *= nu
        if converged or not accepted:
            break

    if not converged and iterations >= max_iter and raise_on_failure:
        raise NonConvergenceError(
            f"damped least squares failed to converge in {max_iter} iterations "
            f"(residual norm {np.sqrt(2 * cost):.3g})"
        )

    # covariance of the free block, scaled by reduced chi-square
    jac = finite_difference_jacobian(model, params, step_scale, free)
    if w is not None:
        jac = jac * w[:, None]
    jf = jac[:, free]
    jtj = jf.T @ jf
    dof = max(y.size - int(free.sum()), 1)
    s2 = 2.0 * cost / dof
    cov = np.zeros((n, n))
    try:
        cov_f = np.linalg.inv(jtj) * s2
        cond = float(np.linalg.cond(jtj))
    except np.linalg.LinAlgError:
        cov_f = np.full((int(free.sum()),) * 2, np.nan)
        cond = np.inf
    idx = np.flatnonzero(free)
    for a, ia in enumerate(idx):
        for b, ib in enumerate(idx):
            cov[ia, ib] = cov_f[a, b]
    sigmas = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    return FitResult(
        names=list(names),
        values=params,
        sigmas=sigmas,
        covariance=cov,
        residual_norm=float(np.sqrt(2.0 * cost)),
        iterations=iterations,
        converged=converged,
        condition=cond,
    )
