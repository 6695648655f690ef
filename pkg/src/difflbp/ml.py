"""Karhunen-Loeve reduction and a pooled-covariance LDA classifier.

The transform is fitted on training descriptors only (never on test data).
Components are kept up to 99% cumulative variance, capped at ``n - c`` so
that the pooled within-class covariance downstream stays full rank; the LDA
itself is the classic Gaussian equal-covariance discriminant with uniform
priors, i.e. nearest class mean under the pooled Mahalanobis metric.  A
fixed, scale-aware ridge (1e-6 of the mean covariance eigenvalue) keeps the
metric well conditioned without introducing a tunable knob.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericError

_MODEL_FORMAT = "difflbp-model-1"

_VARIANCE_GOAL = 0.99
_EIGENVALUE_FLOOR = 1e-10   # relative to the largest eigenvalue
_RIDGE_SCALE = 1e-6         # times trace(S_w)/d


@dataclass(frozen=True)
class KLTransform:
    mean: np.ndarray                 # (D,)
    basis: np.ndarray                # (d, D), orthonormal rows
    retained: int
    explained_variance: np.ndarray   # (d,), nonincreasing


@dataclass(frozen=True)
class LDAModel:
    class_means: np.ndarray          # (n_classes, d)
    covariance_cholesky: np.ndarray  # lower factor of S_w + ridge*I
    ridge: float
    classes: tuple                   # sorted labels; ties resolve to the first


def kl_fit(train, labels=None) -> KLTransform:
    """Fit the orthogonal reduction on a training matrix (rows = samples).

    The retained dimension is the smallest count of leading covariance
    eigenvectors reaching 99% cumulative eigenvalue mass, after dropping
    eigenvalues below 1e-10 of the largest, capped at ``n - c`` (``c`` =
    number of distinct labels, 1 if labels are not supplied) and at ``D``.
    """
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {x.shape}")
    n, dim = x.shape
    n_classes = len(set(labels)) if labels is not None else 1
    mean = x.mean(axis=0)
    _, singular, vt = np.linalg.svd(x - mean, full_matrices=False)
    eigenvalues = singular**2 / (n - 1)
    if eigenvalues[0] <= 0.0:
        raise ValueError("training matrix has no variance")
    kept = eigenvalues[eigenvalues >= _EIGENVALUE_FLOOR * eigenvalues[0]]
    cumulative = np.cumsum(kept)
    d = int(np.searchsorted(cumulative, _VARIANCE_GOAL * cumulative[-1]) + 1)
    d = min(d, len(kept), max(1, n - n_classes), dim)
    return KLTransform(mean=mean, basis=vt[:d].copy(), retained=d,
                       explained_variance=eigenvalues[:d].copy())


def kl_apply(transform: KLTransform, x) -> np.ndarray:
    """Project a vector (or rows of a matrix) onto the retained basis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != transform.mean.shape[0]:
        raise ValueError(
            f"feature length {x.shape[-1]} does not match transform "
            f"dimension {transform.mean.shape[0]}"
        )
    return (x - transform.mean) @ transform.basis.T


def lda_fit(features, labels) -> LDAModel:
    """Fit class means and the pooled within-class covariance metric."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    labels = np.asarray(labels)
    if len(labels) != x.shape[0]:
        raise ValueError("one label per feature row is required")
    classes, indices = np.unique(labels, return_inverse=True)
    n, d = x.shape
    c = len(classes)
    counts = np.bincount(indices, minlength=c)
    if counts.min() < 2:
        lonely = classes[np.argmin(counts)]
        raise ValueError(f"class {lonely!r} has fewer than 2 training samples")

    means = np.zeros((c, d))
    scatter = np.zeros((d, d))
    for k in range(c):
        member = x[indices == k]
        means[k] = member.mean(axis=0)
        centered = member - means[k]
        scatter += centered.T @ centered
    pooled = scatter / (n - c)
    ridge = _RIDGE_SCALE * np.trace(pooled) / d
    try:
        chol = np.linalg.cholesky(pooled + ridge * np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise NumericError("regularized pooled covariance is not positive definite") from exc
    return LDAModel(class_means=means, covariance_cholesky=chol,
                    ridge=float(ridge), classes=tuple(classes.tolist()))


def _mahalanobis_sq(model: LDAModel, x: np.ndarray) -> np.ndarray:
    """(m, n_classes) squared distances under the pooled metric."""
    out = np.empty((x.shape[0], len(model.classes)))
    for k in range(len(model.classes)):
        z = solve_triangular(model.covariance_cholesky, (x - model.class_means[k]).T,
                             lower=True)
        out[:, k] = np.sum(z**2, axis=0)
    return out


def lda_predict(model: LDAModel, x):
    """Predict the label of one feature vector, or of each row of a matrix.

    Ties resolve to the earliest class in ``model.classes``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.class_means.shape[1]:
        raise ValueError(
            f"feature length {x.shape[1]} does not match model "
            f"dimension {model.class_means.shape[1]}"
        )
    picks = np.argmin(_mahalanobis_sq(model, x), axis=1)
    labels = [model.classes[k] for k in picks]
    return labels[0] if single else labels


def lda_scores(model: LDAModel, x) -> np.ndarray:
    """Discriminant scores -(x-mu)' inv(S) (x-mu), one column per class."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return -_mahalanobis_sq(model, x[None, :])[0]
    return -_mahalanobis_sq(model, x)


def save_model(path, transform: KLTransform, model: LDAModel) -> None:
    """Persist a fitted reduction + classifier pair as a versioned .npz."""
    np.savez(
        path,
        format=np.asarray(_MODEL_FORMAT),
        kl_mean=transform.mean,
        kl_basis=transform.basis,
        kl_explained_variance=transform.explained_variance,
        lda_class_means=model.class_means,
        lda_covariance_cholesky=model.covariance_cholesky,
        lda_ridge=np.asarray(model.ridge),
        lda_classes=np.asarray([str(c) for c in model.classes]),
    )


def load_model(path) -> tuple[KLTransform, LDAModel]:
    with np.load(path, allow_pickle=False) as data:
        tag = str(data["format"])
        if tag != _MODEL_FORMAT:
            raise ValueError(f"{path}: unsupported model format {tag!r}")
        transform = KLTransform(
            mean=data["kl_mean"],
            basis=data["kl_basis"],
            retained=data["kl_basis"].shape[0],
            explained_variance=data["kl_explained_variance"],
        )
        model = LDAModel(
            class_means=data["lda_class_means"],
            covariance_cholesky=data["lda_covariance_cholesky"],
            ridge=float(data["lda_ridge"]),
            classes=tuple(data["lda_classes"].tolist()),
        )
    return transform, model
