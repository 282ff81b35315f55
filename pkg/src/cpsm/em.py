"""EM estimation of the target-domain class-given-conditioning model from
unlabeled target rows, given source-fitted models.

The E-step turns source posteriors into target responsibilities through the
conditional-ratio reweighting; the M-step refits the shifted conditional
model on those responsibilities, warm-started from the previous round so the
marginal-likelihood surrogate can only go up. The prior-only correction
(empty conditioning block) and the uncorrected baseline fall out as special
cases.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .adjust import AdjustResult, ConditionalRatios, adjust_posterior
from .data import UnlabeledDataset
from .errors import NumericalError, ValidationError
from .softmax import (
    FitConfig,
    SoftmaxParams,
    check_soft_targets,
    clamp_probs,
    fit_soft,
    predict_proba,
)

FIT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SourceModels:
    """Source-fitted posterior model over [z | x] and conditional model over z."""

    posterior_model: SoftmaxParams
    conditional_model: SoftmaxParams

    def __post_init__(self):
        if self.posterior_model.n_classes != self.conditional_model.n_classes:
            raise ValidationError(
                "posterior and conditional models disagree on class count: "
                f"{self.posterior_model.n_classes} vs {self.conditional_model.n_classes}"
            )
        if self.posterior_model.n_features < self.conditional_model.n_features:
            raise ValidationError(
                "posterior model must cover at least the conditioning features"
            )

    @property
    def n_classes(self) -> int:
        return self.posterior_model.n_classes


@dataclass
class EmConfig:
    """EM driver settings. `inner` controls each M-step; it defaults to a
    short warm-started budget with no ridge penalty so the surrogate trace is
    monotone exactly, not just approximately."""

    max_em_iters: int = 500
    em_tolerance: float = 1e-8
    inner: FitConfig = field(default_factory=lambda: FitConfig(max_iters=200, l2_penalty=0.0))

    def __post_init__(self):
        if self.max_em_iters < 0:
            raise ValidationError(f"max_em_iters must be >= 0, got {self.max_em_iters}")
        if self.em_tolerance <= 0:
            raise ValidationError("em_tolerance must be positive")


@dataclass(frozen=True)
class CpsmFit:
    """EM output: the shifted conditional model, final target posteriors,
    the surrogate log-likelihood trace, and the implied target prior."""

    theta_hat: SoftmaxParams
    target_posterior: np.ndarray
    loglik_trace: np.ndarray
    iterations_run: int
    estimated_prior: np.ndarray


def _check_target(source: SourceModels, target: UnlabeledDataset) -> None:
    if target.n_rows == 0:
        raise ValidationError("target dataset is empty")
    if source.conditional_model.n_features != target.d_z:
        raise ValidationError(
            f"conditional model expects {source.conditional_model.n_features} conditioning "
            f"features, target has {target.d_z}"
        )
    if source.posterior_model.n_features != target.d_z + target.d_x:
        raise ValidationError(
            f"posterior model expects {source.posterior_model.n_features} features, "
            f"target has {target.d_z + target.d_x}"
        )


def _responsibilities(
    p_xz: np.ndarray, p_z: np.ndarray, theta: SoftmaxParams, z: np.ndarray
) -> AdjustResult:
    q_z = clamp_probs(predict_proba(theta, z))
    return adjust_posterior(p_xz, ConditionalRatios(numerator=q_z, denominator=p_z))


def e_step(source: SourceModels, target: UnlabeledDataset, theta: SoftmaxParams) -> np.ndarray:
    """Target responsibilities under the current shifted conditional model."""
    _check_target(source, target)
    if theta.n_classes != source.n_classes or theta.n_features != target.d_z:
        raise ValidationError("theta does not match source models / target dimensions")
    p_xz = clamp_probs(predict_proba(source.posterior_model, target.features("zx")))
    p_z = clamp_probs(predict_proba(source.conditional_model, target.z))
    return _responsibilities(p_xz, p_z, theta, target.z).posterior


def m_step(
    target_z,
    responsibilities,
    inner: FitConfig,
    init: SoftmaxParams | None = None,
) -> SoftmaxParams:
    """Refit the shifted conditional model on soft responsibilities."""
    resp = check_soft_targets(responsibilities)
    return fit_soft(target_z, resp, inner, init=init)


def fit_cpsm(source: SourceModels, target: UnlabeledDataset, config: EmConfig) -> CpsmFit:
    """Run EM from the source conditional model as the starting point.

    Iteration 0 therefore reproduces the uncorrected source posterior, and a
    target with no shift is a fixed point. Stops when the surrogate improves
    by less than `em_tolerance` or after `max_em_iters` rounds.
    """
    _check_target(source, target)
    p_xz = clamp_probs(predict_proba(source.posterior_model, target.features("zx")))
    p_z = clamp_probs(predict_proba(source.conditional_model, target.z))
    z = target.z

    theta = source.conditional_model
    result = _responsibilities(p_xz, p_z, theta, z)
    trace = [float(np.log(result.row_normalizer).sum())]
    if not np.isfinite(trace[0]):
        raise NumericalError("non-finite surrogate log-likelihood at iteration 0")
    iterations_run = 0
    for it in range(1, config.max_em_iters + 1):
        theta = m_step(z, result.posterior, config.inner, init=theta)
        result = _responsibilities(p_xz, p_z, theta, z)
        value = float(np.log(result.row_normalizer).sum())
        if not np.isfinite(value):
            raise NumericalError(f"non-finite surrogate log-likelihood at iteration {it}")
        trace.append(value)
        iterations_run = it
        if value - trace[-2] < config.em_tolerance:
            break
    posterior = result.posterior
    return CpsmFit(
        theta_hat=theta,
        target_posterior=posterior,
        loglik_trace=np.asarray(trace),
        iterations_run=iterations_run,
        estimated_prior=posterior.mean(axis=0),
    )


def params_from_prior(prior) -> SoftmaxParams:
    """Intercept-only model whose probabilities equal the given prior."""
    p = np.asarray(prior, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValidationError("prior must be a vector of length >= 2")
    if abs(float(p.sum()) - 1.0) > 1e-9 or np.any(p < 0):
        raise ValidationError("prior must be nonnegative and sum to 1 within 1e-9")
    p = clamp_probs(p)
    intercepts = np.log(p[:-1]) - np.log(p[-1])
    return SoftmaxParams(
        n_classes=p.shape[0],
        n_features=0,
        intercepts=intercepts,
        slopes=np.zeros((p.shape[0] - 1, 0)),
    )


def fit_mlls(
    source_posterior_only: SoftmaxParams,
    source_prior,
    target: UnlabeledDataset,
    config: EmConfig,
) -> CpsmFit:
    """Prior-only EM correction: the empty-conditioning special case.

    All features are treated as the remaining block and the shifted model is
    intercept-only, so only the class prior is re-estimated; `estimated_prior`
    of the result is that estimate.
    """
    conditional = params_from_prior(source_prior)
    if conditional.n_classes != source_posterior_only.n_classes:
        raise ValidationError(
            f"prior length {conditional.n_classes} does not match model classes "
            f"{source_posterior_only.n_classes}"
        )
    merged = UnlabeledDataset(z=np.zeros((target.n_rows, 0)), x=target.features("zx"))
    source = SourceModels(posterior_model=source_posterior_only, conditional_model=conditional)
    return fit_cpsm(source, merged, config)


def naive_posterior(source: SourceModels, target: UnlabeledDataset) -> np.ndarray:
    """Source posterior applied to target rows without any correction."""
    _check_target(source, target)
    return predict_proba(source.posterior_model, target.features("zx"))


def params_to_dict(params: SoftmaxParams) -> dict:
    return {
        "n_classes": params.n_classes,
        "n_features": params.n_features,
        "intercepts": params.intercepts.tolist(),
        "slopes": params.slopes.tolist(),
    }


def params_from_dict(doc: dict) -> SoftmaxParams:
    try:
        return SoftmaxParams(
            n_classes=int(doc["n_classes"]),
            n_features=int(doc["n_features"]),
            intercepts=np.asarray(doc["intercepts"], dtype=float),
            slopes=np.asarray(doc["slopes"], dtype=float).reshape(
                int(doc["n_classes"]) - 1, int(doc["n_features"])
            ),
        )
    except KeyError as exc:
        raise ValidationError(f"missing field in model document: {exc}") from None


def fit_to_dict(fit: CpsmFit) -> dict:
    return {
        "format_version": FIT_FORMAT_VERSION,
        "theta_hat": params_to_dict(fit.theta_hat),
        "loglik_trace": fit.loglik_trace.tolist(),
        "estimated_prior": fit.estimated_prior.tolist(),
        "iterations_run": fit.iterations_run,
    }


def save_fit_json(path, fit: CpsmFit) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_to_dict(fit), fh, indent=2)
        fh.write("\n")


def load_fit_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FIT_FORMAT_VERSION:
        raise ValidationError(f"unsupported fit document version: {version!r}")
    return doc
