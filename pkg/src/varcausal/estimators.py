"""Least-squares and regularized fitting of VAR coefficients from paths.

The regression lift stacks lag windows into a design matrix with
most-recent-first columns, so row ``t`` of the design is
``(x_{t-1}, ..., x_{t-p})`` aligned with target ``x_t``.  No intercept is
fitted: the processes are mean-zero by construction.

Objectives (per target column, ``T`` usable rows):

    ols:        (1/2T) ||y - X b||^2
    ridge:      (1/2T) ||y - X b||^2 + (lam/2) ||b||^2
    lasso:      (1/2T) ||y - X b||^2 + lam ||b||_1
    elasticNet: (1/2T) ||y - X b||^2 + lam (mix ||b||_1 + (1-mix)/2 ||b||^2)

Ridge solves augmented normal equations in closed form; lasso and elastic
net run cyclic coordinate descent with soft thresholding, stopping on a
duality-gap tolerance.  ``lam = 0`` reduces every estimator to OLS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadInputError
from .process import SamplePath, VarModel
from .seeding import as_rng

OLS = "ols"
RIDGE = "ridge"
LASSO = "lasso"
ELASTIC_NET = "elasticNet"
ESTIMATORS = (OLS, RIDGE, LASSO, ELASTIC_NET)

#: Default search grids: 20 log-spaced strengths, elastic-net mixing weights.
DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 1, 20))
DEFAULT_MIX_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))

DUALITY_GAP_TOL = 1e-8
COEF_CHANGE_TOL = 1e-10
MAX_SWEEPS = 100_000

#: Floor applied to residual variance so fitted models remain valid even on
#: noiseless data.
NOISE_VARIANCE_FLOOR = 1e-30


@dataclass(frozen=True)
class LaggedDesign:
    """Stacked regression view of a path: ``y[t] ~ x[t] @ beta``."""

    x: np.ndarray
    y: np.ndarray
    p: int
    d: int

    @property
    def t_rows(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class FitResult:
    """A fitted model plus how it was obtained."""

    model: VarModel
    estimator: str
    lam: float
    mix: float
    cv_score: float | None
    rank_deficient: bool
    converged: bool
    duality_gap: float = 0.0
    coef_matrix: np.ndarray = field(default=None, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "coeffs": [[float(v) for v in b.ravel()] for b in self.model.coeffs],
            "noise_variance": self.model.noise_variance,
            "lambda": self.lam,
            "mu_mix": self.mix,
            "cv_score": self.cv_score,
            "rank_flag": self.rank_deficient,
        }


def build_design(path: SamplePath, p: int) -> LaggedDesign:
    """Lagged design with ``n - p`` rows; raises if the path is too short."""
    if p < 1:
        raise BadInputError("p must be positive")
    x = path.values
    n, d = x.shape
    if n <= p:
        raise BadInputError(f"path of length {n} too short for order {p}")
    cols = [x[p - 1 - l : n - 1 - l] for l in range(p)]
    return LaggedDesign(x=np.concatenate(cols, axis=1), y=x[p:].copy(), p=p, d=d)


def _result_from_beta(
    design: LaggedDesign,
    beta: np.ndarray,
    estimator: str,
    lam: float,
    mix: float,
    cv_score: float | None,
    rank_deficient: bool,
    converged: bool,
    gap: float,
) -> FitResult:
    p, d = design.p, design.d
    coeffs = tuple(beta[l * d : (l + 1) * d, :].T.copy() for l in range(p))
    resid = design.y - design.x @ beta
    noise = max(float((resid**2).mean()), NOISE_VARIANCE_FLOOR)
    model = VarModel(d=d, p=p, coeffs=coeffs, noise_variance=noise)
    return FitResult(
        model=model,
        estimator=estimator,
        lam=float(lam),
        mix=float(mix),
        cv_score=cv_score,
        rank_deficient=rank_deficient,
        converged=converged,
        duality_gap=gap,
        coef_matrix=beta,
    )


def fit_ols(design: LaggedDesign) -> FitResult:
    """Least squares via orthogonal decomposition; minimum-norm if rank-deficient."""
    beta, _, rank, _ = np.linalg.lstsq(design.x, design.y, rcond=None)
    deficient = rank < design.x.shape[1]
    return _result_from_beta(design, beta, OLS, 0.0, 0.0, None, deficient, True, 0.0)


def _ridge_beta(design: LaggedDesign, lam: float) -> np.ndarray:
    x, y = design.x, design.y
    k = x.shape[1]
    lhs = x.T @ x + design.t_rows * lam * np.eye(k)
    return np.linalg.solve(lhs, x.T @ y)


def _cd_column(
    x: np.ndarray,
    y: np.ndarray,
    lam: float,
    mix: float,
    t_rows: int,
) -> tuple[np.ndarray, bool, float]:
    """Cyclic coordinate descent for one target column."""
    k = x.shape[1]
    col_sq = (x**2).sum(axis=0) / t_rows
    beta = np.zeros(k)
    resid = y.copy()
    thresh = lam * mix
    denom = col_sq + lam * (1.0 - mix)
    y_scale = max(1.0, float(y @ y) / t_rows)

    gap = math.inf
    for _ in range(MAX_SWEEPS):
        max_change = 0.0
        for j in range(k):
            old = beta[j]
            if col_sq[j] == 0.0:
                continue
            c = (x[:, j] @ resid) / t_rows + col_sq[j] * old
            new = math.copysign(max(abs(c) - thresh, 0.0), c) / denom[j]
            if new != old:
                resid += x[:, j] * (old - new)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        gap = _duality_gap(x, y, beta, resid, lam, mix, t_rows)
        if gap <= DUALITY_GAP_TOL * y_scale or max_change < COEF_CHANGE_TOL:
            return beta, True, gap
    return beta, False, gap


def _duality_gap(
    x: np.ndarray,
    y: np.ndarray,
    beta: np.ndarray,
    resid: np.ndarray,
    lam: float,
    mix: float,
    t_rows: int,
) -> float:
    """Duality gap of the elastic-net objective, on the per-row (1/T) scale.

    Computed through the augmented-lasso form: the squared-l2 part of the
    penalty joins the residual, leaving a plain l1 problem whose dual point
    is a scaled residual.
    """
    alpha = t_rows * lam * mix
    l2 = t_rows * lam * (1.0 - mix)
    r_sq = float(resid @ resid) + l2 * float(beta @ beta)
    corr = x.T @ resid - l2 * beta
    dual_norm = float(np.abs(corr).max()) if corr.size else 0.0
    primal = 0.5 * r_sq + alpha * float(np.abs(beta).sum())
    if alpha == 0.0:
        return (primal - float(resid @ y) + 0.5 * r_sq) / t_rows
    scale = min(1.0, alpha / dual_norm) if dual_norm > alpha else 1.0
    dual = scale * float(resid @ y) - 0.5 * scale**2 * r_sq
    return (primal - dual) / t_rows


def fit_regularized(
    design: LaggedDesign,
    estimator: str,
    lam: float,
    mix: float = 0.5,
) -> FitResult:
    """Fit at a fixed regularization strength.

    ``mix`` is the l1 weight for the elastic net (1 = lasso, 0 = ridge) and
    is ignored by the other estimators.
    """
    if estimator not in ESTIMATORS:
        raise BadInputError(f"unknown estimator {estimator!r}")
    if lam < 0:
        raise BadInputError("lam must be non-negative")
    if not 0.0 <= mix <= 1.0:
        raise BadInputError("mix must lie in [0, 1]")
    if estimator == OLS or lam == 0.0:
        res = fit_ols(design)
        if estimator != OLS:
            res = FitResult(
                model=res.model,
                estimator=estimator,
                lam=0.0,
                mix=mix if estimator == ELASTIC_NET else (1.0 if estimator == LASSO else 0.0),
                cv_score=None,
                rank_deficient=res.rank_deficient,
                converged=True,
                duality_gap=0.0,
                coef_matrix=res.coef_matrix,
            )
        return res
    if estimator == RIDGE or (estimator == ELASTIC_NET and mix == 0.0):
        beta = _ridge_beta(design, lam)
        eff_mix = 0.0
        return _result_from_beta(design, beta, estimator, lam, eff_mix, None, False, True, 0.0)

    eff_mix = 1.0 if estimator == LASSO else mix
    betas = []
    converged = True
    worst_gap = 0.0
    for col in range(design.d):
        b, ok, gap = _cd_column(design.x, design.y[:, col], lam, eff_mix, design.t_rows)
        betas.append(b)
        converged = converged and ok
        worst_gap = max(worst_gap, gap)
    beta = np.stack(betas, axis=1)
    return _result_from_beta(
        design, beta, estimator, lam, eff_mix, None, False, converged, worst_gap
    )


def _fold_slices(t_rows: int, folds: int, shuffle: bool, seed) -> list[np.ndarray]:
    idx = np.arange(t_rows)
    if shuffle:
        as_rng(seed).shuffle(idx)
    return [f for f in np.array_split(idx, folds) if len(f)]


def fit_cv(
    path: SamplePath,
    p: int,
    estimator: str,
    lam_grid=DEFAULT_LAMBDA_GRID,
    mix_grid=DEFAULT_MIX_GRID,
    folds: int = 5,
    seed: int = 0,
    shuffle: bool = False,
) -> FitResult:
    """Grid search with k-fold cross-validation, then refit on all rows.

    Folds are contiguous row blocks by default, preserving temporal adjacency
    within folds (set ``shuffle`` for randomized folds).  Mean validation MSE
    is minimized over the grid; ties break toward the larger strength.  The
    mixing grid applies to the elastic net only.
    """
    if estimator not in ESTIMATORS:
        raise BadInputError(f"unknown estimator {estimator!r}")
    if estimator == OLS:
        return fit_ols(build_design(path, p))
    if folds < 2:
        raise BadInputError("folds must be at least 2")
    lam_grid = list(lam_grid)
    if not lam_grid:
        raise BadInputError("empty regularization grid")
    mixes = list(mix_grid) if estimator == ELASTIC_NET else [1.0 if estimator == LASSO else 0.0]
    if not mixes:
        raise BadInputError("empty mixing grid")

    design = build_design(path, p)
    if design.t_rows < folds:
        raise BadInputError(f"{design.t_rows} design rows cannot form {folds} folds")
    parts = _fold_slices(design.t_rows, folds, shuffle, seed)

    grid = sorted((lam, mix) for lam in lam_grid for mix in mixes)
    best = None
    for lam, mix in grid:
        scores = []
        for val_idx in parts:
            mask = np.ones(design.t_rows, dtype=bool)
            mask[val_idx] = False
            sub = LaggedDesign(
                x=design.x[mask], y=design.y[mask], p=design.p, d=design.d
            )
            fit = fit_regularized(sub, estimator, lam, mix)
            pred = design.x[val_idx] @ fit.coef_matrix
            scores.append(float(((design.y[val_idx] - pred) ** 2).mean()))
        score = float(np.mean(scores))
        # <= so that the larger strength wins exact ties (grid is sorted).
        if best is None or score <= best[0]:
            best = (score, lam, mix)

    score, lam, mix = best
    final = fit_regularized(design, estimator, lam, mix)
    return FitResult(
        model=final.model,
        estimator=estimator,
        lam=lam,
        mix=final.mix,
        cv_score=score,
        rank_deficient=final.rank_deficient,
        converged=final.converged,
        duality_gap=final.duality_gap,
        coef_matrix=final.coef_matrix,
    )
