"""Sample-quality metrics: raw-feature Frechet distance, cluster-based
precision/recall curves and positive/negative region mass."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .distributions import Dataset, SplitSpec, log_pdf
from .linalg import spd_sqrt

FRECHET_REG = 1e-8
DEFAULT_CLUSTERS = 20
DEFAULT_ANGLES = 1001
KMEANS_RESTARTS = 10
REGION_HI = 10.0
REGION_LO = 0.1


def _2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def moments(samples) -> tuple[np.ndarray, np.ndarray]:
    """Mean and unbiased covariance; needs at least ``dim + 2`` rows."""
    x = _2d(samples)
    n, d = x.shape
    if n < d + 2:
        raise ValueError(f"need at least {d + 2} samples in dimension {d}, got {n}")
    return x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False))


def frechet_from_moments(mu1, cov1, mu2, cov2, reg: float = FRECHET_REG) -> float:
    """``|mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))`` with ``S = cov + reg I``.

    The cross term is computed as ``Tr((S1^(1/2) S2 S1^(1/2))^(1/2))``, which
    has the same eigenvalues as ``(S1 S2)^(1/2)`` but stays symmetric.
    """
    mu1, mu2 = np.atleast_1d(np.asarray(mu1, float)), np.atleast_1d(np.asarray(mu2, float))
    c1, c2 = np.atleast_2d(np.asarray(cov1, float)), np.atleast_2d(np.asarray(cov2, float))
    if not (mu1.shape == mu2.shape and c1.shape == c2.shape == (mu1.size, mu1.size)):
        raise ValueError("moment shapes do not match")
    eye = np.eye(mu1.size)
    c1, c2 = c1 + reg * eye, c2 + reg * eye
    try:
        s1 = spd_sqrt(c1)
        mid = s1 @ c2 @ s1
        cross = np.trace(spd_sqrt(0.5 * (mid + mid.T)))
    except ValueError as err:
        raise ValueError(f"covariance is rank-deficient beyond regularization: {err}") from None
    diff = mu1 - mu2
    return max(0.0, float(diff @ diff + np.trace(c1) + np.trace(c2) - 2.0 * cross))


def frechet_distance(real_samples, gen_samples) -> float:
    mu1, c1 = moments(real_samples)
    mu2, c2 = moments(gen_samples)
    return frechet_from_moments(mu1, c1, mu2, c2)


@dataclass(frozen=True)
class PRCurve:
    """One (recall, precision) point per slope angle."""

    recall: np.ndarray
    precision: np.ndarray

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist()))

    @property
    def max_f1(self) -> float:
        s = self.precision + self.recall
        f1 = np.where(s > 0, 2 * self.precision * self.recall / np.where(s > 0, s, 1.0), 0.0)
        return float(f1.max())

    def precision_at_recall(self, r: float) -> float:
        ok = self.recall >= r
        return float(self.precision[ok].max()) if ok.any() else 0.0

    def recall_at_precision(self, p: float) -> float:
        ok = self.precision >= p
        return float(self.recall[ok].max()) if ok.any() else 0.0


def cluster_histograms(real_samples, gen_samples, num_clusters: int = DEFAULT_CLUSTERS,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """k-means on the union; normalized cluster occupancy of each set."""
    real, gen = _2d(real_samples), _2d(gen_samples)
    if real.shape[0] == 0 or gen.shape[0] == 0:
        raise ValueError("degenerate clustering: empty sample set")
    if num_clusters < 2:
        raise ValueError("num_clusters must be >= 2")
    data = np.concatenate([real, gen], axis=0)
    k = min(num_clusters, np.unique(data, axis=0).shape[0])
    if k < 2:
        raise ValueError("degenerate clustering: fewer than two distinct points")
    km = KMeans(n_clusters=k, n_init=KMEANS_RESTARTS, random_state=seed).fit(data)
    lab = km.labels_
    p = np.bincount(lab[: len(real)], minlength=k) / len(real)
    q = np.bincount(lab[len(real):], minlength=k) / len(gen)
    return p, q


def pr_from_histograms(p, q, num_angles: int = DEFAULT_ANGLES) -> PRCurve:
    p, q = np.asarray(p, float), np.asarray(q, float)
    eps = 1e-10
    angles = np.linspace(eps, math.pi / 2 - eps, num_angles)
    slopes = np.tan(angles)[:, None]
    precision = np.minimum(slopes * p[None, :], q[None, :]).sum(axis=1)
    recall = np.minimum(p[None, :], q[None, :] / slopes).sum(axis=1)
    return PRCurve(np.clip(recall, 0.0, 1.0), np.clip(precision, 0.0, 1.0))


def pr_curve(real_samples, gen_samples, num_clusters: int = DEFAULT_CLUSTERS,
             num_angles: int = DEFAULT_ANGLES, seed: int = 0) -> PRCurve:
    """Precision/recall trade-off of ``gen`` against ``real`` via cluster histograms."""
    p, q = cluster_histograms(real_samples, gen_samples, num_clusters, seed)
    return pr_from_histograms(p, q, num_angles)


def region_mass(gen_samples, split: SplitSpec) -> tuple[float, float, float]:
    """Fractions of samples classified positive / negative / ambiguous by density ratio."""
    pos, neg = split.target, split.negative
    if isinstance(pos, Dataset) or isinstance(neg, Dataset):
        raise TypeError("region mass needs densities; dataset-backed splits have none")
    x = _2d(gen_samples)
    if x.shape[0] == 0:
        raise ValueError("no samples")
    with np.errstate(invalid="ignore"):
        ratio = log_pdf(pos, x) - log_pdf(neg, x)
    n = x.shape[0]
    n_pos = int(np.sum(ratio > math.log(REGION_HI)))
    n_neg = int(np.sum(ratio < math.log(REGION_LO)))
    return n_pos / n, n_neg / n, (n - n_pos - n_neg) / n


METRIC_COLUMNS = ("step", "frechet", "max_f1", "precision_at_r10", "recall_at_p90", "pos_mass", "neg_mass")


@dataclass(frozen=True)
class EvalReport:
    step: int
    frechet: float
    pr: PRCurve
    pos_region_mass: float
    neg_region_mass: float
    n_samples: int

    @property
    def pr_curve(self) -> list[tuple[float, float]]:
        return self.pr.points()

    def row(self) -> dict:
        return {
            "step": self.step, "frechet": self.frechet, "max_f1": self.pr.max_f1,
            "precision_at_r10": self.pr.precision_at_recall(0.1),
            "recall_at_p90": self.pr.recall_at_precision(0.9),
            "pos_mass": self.pos_region_mass, "neg_mass": self.neg_region_mass,
        }


def evaluate(gen_samples, reference_samples, split: SplitSpec, step: int = 0,
             num_clusters: int = DEFAULT_CLUSTERS, num_angles: int = DEFAULT_ANGLES,
             seed: int = 0) -> EvalReport:
    """All metrics for one batch of generated samples against the target reference set."""
    gen = _2d(gen_samples)
    try:
        pos, neg, _ = region_mass(gen, split)
    except TypeError:
        pos = neg = float("nan")
    return EvalReport(step, frechet_distance(reference_samples, gen),
                      pr_curve(reference_samples, gen, num_clusters, num_angles, seed),
                      pos, neg, gen.shape[0])
