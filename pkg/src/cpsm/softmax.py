"""Multinomial logistic regression with hard- and soft-label targets.

Class K is the implicit reference class: its intercept and slopes are fixed
at zero, so a model over K classes stores K-1 parameter rows. The solver is
deterministic full-batch gradient-only ascent: limited-memory quasi-Newton
directions with a backtracking Armijo line search, so the objective trace is
non-decreasing by construction and a warm start can only be improved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import NumericalError, ValidationError

PROB_EPS = 1e-12

_LBFGS_MEMORY = 10
_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 50
_CURVATURE_EPS = 1e-10


def clamp_probs(probs: np.ndarray) -> np.ndarray:
    """Clip probabilities into [PROB_EPS, 1 - PROB_EPS] before logs or ratios."""
    return np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)


@dataclass(frozen=True)
class SoftmaxParams:
    """Parameters of a multinomial logistic model; immutable once built."""

    n_classes: int
    n_features: int
    intercepts: np.ndarray  # (K-1,)
    slopes: np.ndarray      # (K-1, n_features)

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.n_features < 0:
            raise ValidationError(f"n_features must be >= 0, got {self.n_features}")
        intercepts = np.array(self.intercepts, dtype=float).reshape(-1)
        slopes = np.array(self.slopes, dtype=float).reshape(intercepts.shape[0], -1)
        if intercepts.shape != (self.n_classes - 1,):
            raise ValidationError(
                f"intercepts shape {intercepts.shape} != ({self.n_classes - 1},)"
            )
        if slopes.shape != (self.n_classes - 1, self.n_features):
            raise ValidationError(
                f"slopes shape {slopes.shape} != ({self.n_classes - 1}, {self.n_features})"
            )
        if not (np.all(np.isfinite(intercepts)) and np.all(np.isfinite(slopes))):
            raise ValidationError("parameters must be finite")
        intercepts.setflags(write=False)
        slopes.setflags(write=False)
        object.__setattr__(self, "intercepts", intercepts)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def zeros(cls, n_classes: int, n_features: int) -> "SoftmaxParams":
        return cls(
            n_classes=n_classes,
            n_features=n_features,
            intercepts=np.zeros(n_classes - 1),
            slopes=np.zeros((n_classes - 1, n_features)),
        )

    def weight_matrix(self) -> np.ndarray:
        """(K-1, 1+d) block with column 0 the intercepts."""
        return np.hstack([self.intercepts[:, None], self.slopes])

    @classmethod
    def from_weight_matrix(cls, n_classes: int, w: np.ndarray) -> "SoftmaxParams":
        return cls(
            n_classes=n_classes,
            n_features=w.shape[1] - 1,
            intercepts=w[:, 0],
            slopes=w[:, 1:],
        )


@dataclass
class FitConfig:
    """Solver settings; `seed` is kept for config fingerprinting, the solver
    itself is deterministic from a zero or warm start."""

    max_iters: int = 2000
    step_size: float = 0.1
    tolerance: float = 1e-7
    l2_penalty: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.step_size <= 0:
            raise ValidationError("step_size must be positive")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.l2_penalty < 0:
            raise ValidationError("l2_penalty must be nonnegative")


def _check_features(features, n_features: int) -> np.ndarray:
    feats = np.asarray(features, dtype=float)
    if feats.ndim != 2:
        raise ValidationError(f"features must be 2-D, got ndim={feats.ndim}")
    if feats.shape[1] != n_features:
        raise ValidationError(
            f"feature dimension mismatch: model expects {n_features}, got {feats.shape[1]}"
        )
    if feats.size and not np.all(np.isfinite(feats)):
        raise ValidationError("features contain non-finite values")
    return feats


def predict_proba(params: SoftmaxParams, features) -> np.ndarray:
    """Row-stochastic (n, K) class probabilities, max-shifted for stability."""
    feats = _check_features(features, params.n_features)
    n = feats.shape[0]
    scores = np.empty((n, params.n_classes))
    scores[:, :-1] = feats @ params.slopes.T + params.intercepts
    scores[:, -1] = 0.0
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores


def check_soft_targets(targets, n_rows: int | None = None) -> np.ndarray:
    """Validate an (n, K) row-stochastic target matrix."""
    t = np.asarray(targets, dtype=float)
    if t.ndim != 2 or t.shape[1] < 2:
        raise ValidationError("soft targets must be an (n, K>=2) matrix")
    if n_rows is not None and t.shape[0] != n_rows:
        raise ValidationError(f"soft targets have {t.shape[0]} rows, expected {n_rows}")
    if np.any(t < -1e-12) or np.any(t > 1.0 + 1e-12):
        raise ValidationError("soft target entries must lie in [0, 1]")
    sums = t.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
    if bad.size:
        raise ValidationError(
            f"soft target row {bad[0]} sums to {sums[bad[0]]!r}, must be 1 within 1e-9"
        )
    return t


_LOG_EPS = float(np.log(PROB_EPS))


def _probs_from_weights(aug: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = aug.shape[0]
    scores = np.empty((n, w.shape[0] + 1))
    scores[:, :-1] = aug @ w.T
    scores[:, -1] = 0.0
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores


def _objective(w, aug, targets, weights, l2):
    """Weighted soft-target log-likelihood minus the ridge penalty on slopes.

    Returns (value, cache) where the cache carries the probabilities needed
    by `_gradient`. The two-class case runs on flat score vectors.
    """
    if targets.shape[1] == 2:
        scores = aug @ w[0]
        log_p1 = -np.logaddexp(0.0, -scores)
        log_p2 = -np.logaddexp(0.0, scores)
        np.maximum(log_p1, _LOG_EPS, out=log_p1)
        np.maximum(log_p2, _LOG_EPS, out=log_p2)
        value = float(weights @ (targets[:, 0] * log_p1 + targets[:, 1] * log_p2))
        cache = np.exp(log_p1)
    else:
        probs = _probs_from_weights(aug, w)
        value = float(np.sum(weights[:, None] * targets * np.log(clamp_probs(probs))))
        cache = probs
    if l2 > 0:
        value -= 0.5 * l2 * float(np.sum(w[:, 1:] ** 2))
    return value, cache


def _gradient(w, aug, targets, cache, weights, l2) -> np.ndarray:
    if targets.shape[1] == 2:
        resid = (targets[:, 0] - cache) * weights
        g = (resid @ aug)[None, :].copy()
    else:
        resid = (targets[:, :-1] - cache[:, :-1]) * weights[:, None]
        g = resid.T @ aug
    if l2 > 0:
        g[:, 1:] -= l2 * w[:, 1:]
    return g


def _two_loop(g: np.ndarray, s_hist: list, y_hist: list, rho_hist: list, gamma: float) -> np.ndarray:
    """Inverse-curvature scaling of the gradient from stored (step, gradient
    difference) pairs; reduces to gamma * g with empty history. History
    entries are flat vectors."""
    q = g.ravel().copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        alpha = rho * float(s @ q)
        q -= alpha * y
        alphas.append(alpha)
    q *= gamma
    for (s, y, rho), alpha in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        beta = rho * float(y @ q)
        q += (alpha - beta) * s
    return q.reshape(g.shape)


def _maximize(aug, targets, weights, config: FitConfig, w0: np.ndarray):
    """Monotone quasi-Newton ascent; returns (weights, objective trace)."""
    w = w0.copy()
    obj, probs = _objective(w, aug, targets, weights, config.l2_penalty)
    if not np.isfinite(obj):
        raise NumericalError("non-finite objective at initialization")
    trace = [obj]
    if w.size == 0:
        return w, trace
    g = _gradient(w, aug, targets, probs, weights, config.l2_penalty)
    s_hist: list = []
    y_hist: list = []
    rho_hist: list = []
    for _ in range(config.max_iters):
        if s_hist:
            gamma = float((s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1]))
            direction = _two_loop(g, s_hist, y_hist, rho_hist, gamma)
        else:
            # First step: plain gradient scaled so its largest move is step_size.
            direction = g * (config.step_size / max(float(np.max(np.abs(g))), 1e-30))
        slope = float(g.ravel() @ direction.ravel())
        if slope <= 0.0:
            # Stale curvature made the direction non-ascending; restart.
            s_hist, y_hist, rho_hist = [], [], []
            direction = g * (config.step_size / max(float(np.max(np.abs(g))), 1e-30))
            slope = float(g.ravel() @ direction.ravel())
            if slope <= 0.0:
                trace.append(obj)
                break
        step = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            cand = w + step * direction
            cand_obj, cand_probs = _objective(cand, aug, targets, weights, config.l2_penalty)
            if np.isfinite(cand_obj) and cand_obj >= obj + _ARMIJO_C1 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            trace.append(obj)
            break
        new_g = _gradient(cand, aug, targets, cand_probs, weights, config.l2_penalty)
        s = (cand - w).ravel()
        y = (g - new_g).ravel()
        sy = float(s @ y)
        if sy > _CURVATURE_EPS * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > _LBFGS_MEMORY:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        delta = float(np.max(np.abs(s)))
        w, obj, probs, g = cand, cand_obj, cand_probs, new_g
        trace.append(obj)
        if delta < config.tolerance:
            break
    return w, trace


def fit_soft(
    features,
    targets,
    config: FitConfig,
    init: SoftmaxParams | None = None,
    sample_weights=None,
    _trace: list | None = None,
) -> SoftmaxParams:
    """Maximize the soft-target cross-entropy objective (concave in the params).

    With one-hot targets this is ordinary maximum likelihood on hard labels.
    `init` warm-starts the solver; `_trace` collects objective values for
    diagnostics.
    """
    feats = np.asarray(features, dtype=float)
    if feats.ndim != 2:
        raise ValidationError("features must be 2-D")
    if feats.size and not np.all(np.isfinite(feats)):
        raise ValidationError("features contain non-finite values")
    t = check_soft_targets(targets, n_rows=feats.shape[0])
    n, d = feats.shape
    n_classes = t.shape[1]
    if sample_weights is None:
        weights = np.ones(n)
    else:
        weights = np.asarray(sample_weights, dtype=float)
        if weights.shape != (n,):
            raise ValidationError("sample_weights length must match rows")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValidationError("sample_weights must be finite and nonnegative")
    if init is None:
        w0 = np.zeros((n_classes - 1, 1 + d))
    else:
        if init.n_classes != n_classes or init.n_features != d:
            raise ValidationError(
                f"warm start shape ({init.n_classes}, {init.n_features}) does not match "
                f"problem ({n_classes}, {d})"
            )
        w0 = init.weight_matrix()
    aug = np.hstack([np.ones((n, 1)), feats])
    w, trace = _maximize(aug, t, weights, config, w0)
    if _trace is not None:
        _trace.extend(trace)
    return SoftmaxParams.from_weight_matrix(n_classes, w)


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=int)
    out = np.zeros((y.shape[0], n_classes))
    out[np.arange(y.shape[0]), y - 1] = 1.0
    return out


def fit_hard(data: LabeledDataset, config: FitConfig, feature_block: str = "zx") -> SoftmaxParams:
    """Maximum likelihood fit on hard labels over the selected feature block."""
    if np.unique(data.y).size < 2:
        raise ValidationError("degenerate labels: need at least 2 distinct classes")
    feats = data.features(feature_block)
    targets = one_hot(data.y, data.n_classes)
    return fit_soft(feats, targets, config, sample_weights=data.sample_weights)


def log_likelihood(params: SoftmaxParams, features, targets) -> float:
    """Soft-target log-likelihood of the model on the given rows."""
    feats = _check_features(features, params.n_features)
    t = check_soft_targets(targets, n_rows=feats.shape[0])
    if t.shape[1] != params.n_classes:
        raise ValidationError(
            f"targets have {t.shape[1]} classes, model has {params.n_classes}"
        )
    probs = predict_proba(params, feats)
    return float(np.sum(t * np.log(clamp_probs(probs))))


def log_likelihood_grad(params: SoftmaxParams, features, targets) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of `log_likelihood` as (d_intercepts, d_slopes)."""
    feats = _check_features(features, params.n_features)
    t = check_soft_targets(targets, n_rows=feats.shape[0])
    if t.shape[1] != params.n_classes:
        raise ValidationError(
            f"targets have {t.shape[1]} classes, model has {params.n_classes}"
        )
    probs = predict_proba(params, feats)
    resid = t[:, :-1] - probs[:, :-1]
    aug = np.hstack([np.ones((feats.shape[0], 1)), feats])
    g = resid.T @ aug
    return g[:, 0], g[:, 1:]
