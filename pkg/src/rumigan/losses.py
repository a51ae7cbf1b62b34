"""Adversarial losses as functions of discriminator outputs.

Positive/negative-class ("Rumi") variants of SGAN, LSGAN, f-GAN and WGAN-GP,
plus the single-class baselines. Inputs may be :class:`~rumigan.tensor.Tensor`
or array-likes; each loss returns a scalar tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor as T
from .tensor import Tensor

LOG_EPS = 1e-7
DEFAULT_GP_COEF = 10.0  # WGAN-GP convention; not a Rumi-specific value

FAMILIES = ("rumi-sgan", "rumi-lsgan", "rumi-fgan:kl", "rumi-fgan:reverse-kl",
            "rumi-fgan:pearson", "rumi-fgan:hellinger", "rumi-fgan:sgan",
            "rumi-wgan-gp", "sgan", "lsgan")


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class RumiWeights:
    """Class weights for every Rumi family.

    ``alpha_*`` weight the SGAN terms, ``beta_*`` the LSGAN terms and
    ``gamma_*`` the f-GAN / WGAN terms. Constraints that hold for every family
    are checked on construction; :meth:`check` adds the family-specific ones.
    """

    alpha_plus: float = 1.0
    alpha_minus: float = 0.0
    beta_plus: float = 1.0
    beta_minus: float = 1.0
    gamma_plus: float = 1.0
    gamma_minus: float = 0.0

    def __post_init__(self):
        for name in ("alpha_plus", "alpha_minus", "beta_plus", "beta_minus",
                     "gamma_plus", "gamma_minus"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise WeightError(f"weights.{name} must be finite")
        if not 0.0 <= self.alpha_plus <= 1.0:
            raise WeightError("weights.alpha_plus must lie in [0, 1]")
        if self.alpha_minus < self.alpha_plus - 1.0 - 1e-12:  # tolerate rounding at the edge
            raise WeightError("weights.alpha_minus must satisfy alpha_minus >= alpha_plus - 1 "
                              "(optimal-SGAN validity region)")
        if self.beta_plus <= 0 or self.beta_minus <= 0:
            raise WeightError("weights.beta_plus and weights.beta_minus must be > 0")

    def check(self, family: str) -> "RumiWeights":
        if family.startswith("rumi-fgan") and abs(self.gamma_plus - self.gamma_minus - 1.0) > 1e-12:
            raise WeightError("weights.gamma_plus - weights.gamma_minus must equal 1 for f-GANs")
        if family == "rumi-wgan-gp" and (self.gamma_plus < 0 or self.gamma_minus < 0):
            raise WeightError("weights.gamma_plus and weights.gamma_minus must be >= 0 for WGAN")
        return self


@dataclass(frozen=True)
class LsganLabels:
    """Targets for positives (``b_plus``), negatives (``b_minus``), fakes (``a``), generator (``c``)."""

    a: float = 0.0
    b_plus: float = 2.0
    b_minus: float = -1.0
    c: float = 1.5

    def __post_init__(self):
        if not self.b_plus > self.b_minus:
            raise WeightError("labels.b_plus must exceed labels.b_minus")
        if self.a > 0.5 * (self.b_plus + self.b_minus):
            raise WeightError("labels.a must not exceed (b_plus + b_minus) / 2")


# -- f-divergences -------------------------------------------------------------

@dataclass(frozen=True)
class FDivergence:
    """Output activation ``g``, conjugate ``f^c`` and its derivative.

    Tensor-valued ``activation``/``conjugate`` are used in training; the
    ``*_np`` companions and the closed forms ``d_star``/``pg_scale`` serve the
    oracles. ``d_star(r)`` is the optimal discriminator output as a function
    of ``r = (gamma+ p+ - gamma- p-) / p_g``; ``pg_scale(lam)`` is the factor
    multiplying ``gamma+ p+ - gamma- p-`` in the optimal generator.
    """

    name: str
    activation: Callable[[Tensor], Tensor]
    conjugate: Callable[[Tensor], Tensor]
    activation_np: Callable[[np.ndarray], np.ndarray]
    conjugate_np: Callable[[np.ndarray], np.ndarray]
    conjugate_grad: Callable[[np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray], np.ndarray]
    d_star: Callable[[np.ndarray], np.ndarray]
    pg_scale: Callable[[float], float]
    lambda_bracket: tuple[float, float]


def _log_sigmoid_t(d: Tensor) -> Tensor:
    return T.neg(T.softplus(T.neg(d)))


DIVERGENCES: dict[str, FDivergence] = {
    "kl": FDivergence(
        "kl",
        activation=lambda d: d,
        conjugate=lambda t: T.exp(T.sub(t, 1.0)),
        activation_np=lambda d: d,
        conjugate_np=lambda t: np.exp(t - 1.0),
        conjugate_grad=lambda t: np.exp(t - 1.0),
        in_domain=lambda t: np.isfinite(t),
        d_star=lambda r: 1.0 + np.log(r),
        pg_scale=lambda lam: 1.0 / math.log(lam),
        lambda_bracket=(1.0 + 1e-12, 1e6),
    ),
    "reverse-kl": FDivergence(
        "reverse-kl",
        activation=lambda d: T.neg(T.exp(T.neg(d))),
        conjugate=lambda t: T.sub(-1.0, T.log(T.neg(t))),
        activation_np=lambda d: -np.exp(-d),
        conjugate_np=lambda t: -1.0 - np.log(-t),
        conjugate_grad=lambda t: -1.0 / t,
        in_domain=lambda t: t < 0,
        d_star=lambda r: np.log(r),
        pg_scale=lambda lam: math.exp(-(lam + 1.0)),
        lambda_bracket=(-50.0, 50.0),
    ),
    "pearson": FDivergence(
        "pearson",
        activation=lambda d: d,
        conjugate=lambda t: T.add(T.mul(0.25, T.square(t)), t),
        activation_np=lambda d: d,
        conjugate_np=lambda t: 0.25 * t * t + t,
        conjugate_grad=lambda t: 0.5 * t + 1.0,
        in_domain=lambda t: np.isfinite(t),
        d_star=lambda r: 2.0 * (r - 1.0),
        pg_scale=lambda lam: 1.0 / math.sqrt(lam + 1.0),
        lambda_bracket=(-1.0 + 1e-12, 1e12),
    ),
    "hellinger": FDivergence(
        "hellinger",
        activation=lambda d: T.sub(1.0, T.exp(T.neg(d))),
        conjugate=lambda t: T.div(t, T.sub(1.0, t)),
        activation_np=lambda d: 1.0 - np.exp(-d),
        conjugate_np=lambda t: t / (1.0 - t),
        conjugate_grad=lambda t: 1.0 / (1.0 - t) ** 2,
        in_domain=lambda t: t < 1,
        d_star=lambda r: 0.5 * np.log(r),
        pg_scale=lambda lam: 1.0 / (lam + 1.0) ** 2,
        lambda_bracket=(-1.0 + 1e-12, 1e6),
    ),
    # Activation log(sigmoid(D)) keeps T < 0, inside the conjugate's domain.
    "sgan": FDivergence(
        "sgan",
        activation=_log_sigmoid_t,
        conjugate=lambda t: T.neg(T.log(T.sub(1.0, T.exp(t)))),
        activation_np=lambda d: -np.log1p(np.exp(-d)),
        conjugate_np=lambda t: -np.log1p(-np.exp(t)),
        conjugate_grad=lambda t: np.exp(t) / (1.0 - np.exp(t)),
        in_domain=lambda t: t < 0,
        d_star=lambda r: np.log(r),
        pg_scale=lambda lam: lam / (1.0 - lam),
        lambda_bracket=(1e-12, 1.0 - 1e-12),
    ),
}


ALIASES = {"pearson-chi2": "pearson", "squared-hellinger": "hellinger"}


def divergence(name: str) -> FDivergence:
    try:
        return DIVERGENCES[ALIASES.get(name, name)]
    except KeyError:
        raise ValueError(f"unknown f-divergence {name!r}; known: {sorted(DIVERGENCES)}") from None


# -- helpers ----------------------------------------------------------------------

def _batch(x) -> Tensor:
    x = T.as_tensor(x)
    if x.data.size == 0:
        raise ValueError("empty batch")
    return x


def _prob(x) -> Tensor:
    x = _batch(x)
    if np.any(x.data < 0) or np.any(x.data > 1):
        raise ValueError("discriminator outputs must lie in [0, 1] (sigmoid head)")
    return T.clip(x, LOG_EPS, 1.0 - LOG_EPS)


def _log1m(x: Tensor) -> Tensor:
    return T.log(T.sub(1.0, x))


# -- SGAN -----------------------------------------------------------------------

def rumi_sgan_d_loss(d_pos, d_gen, d_neg, w: RumiWeights) -> Tensor:
    """``-(a+ E+ log D + E_g log(1-D) + a- E- log(1-D))``."""
    d_pos, d_gen, d_neg = _prob(d_pos), _prob(d_gen), _prob(d_neg)
    total = T.add(T.mul(w.alpha_plus, T.mean(T.log(d_pos))), T.mean(_log1m(d_gen)))
    total = T.add(total, T.mul(w.alpha_minus, T.mean(_log1m(d_neg))))
    return T.neg(total)


def rumi_sgan_g_loss(d_pos, d_gen, d_neg, w: RumiWeights) -> Tensor:
    """Min-max generator loss, the negation of :func:`rumi_sgan_d_loss`."""
    return T.neg(rumi_sgan_d_loss(d_pos, d_gen, d_neg, w))


def baseline_sgan_losses(d_real, d_gen) -> tuple[Tensor, Tensor]:
    """Standard GAN: ``(d_loss, g_loss)`` with ``g_loss = -d_loss``."""
    d_real, d_gen = _prob(d_real), _prob(d_gen)
    d_loss = T.neg(T.add(T.mean(T.log(d_real)), T.mean(_log1m(d_gen))))
    return d_loss, T.neg(d_loss)


# -- LSGAN ------------------------------------------------------------------------

def _msq(x, target: float) -> Tensor:
    return T.mean(T.square(T.sub(_batch(x), target)))


def rumi_lsgan_d_loss(d_pos, d_neg, d_gen, w: RumiWeights, labels: LsganLabels) -> Tensor:
    return T.add(T.add(T.mul(w.beta_plus, _msq(d_pos, labels.b_plus)),
                       T.mul(w.beta_minus, _msq(d_neg, labels.b_minus))),
                 _msq(d_gen, labels.a))


def rumi_lsgan_g_loss(d_pos, d_neg, d_gen, w: RumiWeights, labels: LsganLabels) -> Tensor:
    return T.add(T.add(T.mul(w.beta_plus, _msq(d_pos, labels.c)),
                       T.mul(w.beta_minus, _msq(d_neg, labels.c))),
                 _msq(d_gen, labels.c))


def baseline_lsgan_losses(d_real, d_gen, a: float = 0.0, b: float = 1.0,
                          c: float = 1.0) -> tuple[Tensor, Tensor]:
    """Two-term LSGAN; the generator loss includes the (constant) real term."""
    d_loss = T.add(_msq(d_real, b), _msq(d_gen, a))
    g_loss = T.add(_msq(d_real, c), _msq(d_gen, c))
    return d_loss, g_loss


# -- f-GAN -------------------------------------------------------------------------

def _checked_conjugate(t_gen: Tensor, div: FDivergence) -> Tensor:
    if not np.all(div.in_domain(t_gen.data)):
        raise ValueError(f"T outside the {div.name} conjugate domain")
    return div.conjugate(t_gen)


def _domain(t, div: FDivergence) -> Tensor:
    t = _batch(t)
    if not np.all(div.in_domain(t.data)):
        raise ValueError(f"T outside the {div.name} conjugate domain")
    return t


def rumi_fgan_d_loss(t_pos, t_neg, t_gen, w: RumiWeights, div: FDivergence) -> Tensor:
    """``-g+ E+ T + g- E- T + E_g f^c(T)`` with ``T = g(D)`` already applied."""
    t_pos, t_neg, t_gen = _domain(t_pos, div), _domain(t_neg, div), _domain(t_gen, div)
    out = T.add(T.mul(-w.gamma_plus, T.mean(t_pos)), T.mul(w.gamma_minus, T.mean(t_neg)))
    return T.add(out, T.mean(_checked_conjugate(t_gen, div)))


def rumi_fgan_g_loss(t_pos, t_neg, t_gen, w: RumiWeights, div: FDivergence) -> Tensor:
    t_pos, t_neg, t_gen = _domain(t_pos, div), _domain(t_neg, div), _domain(t_gen, div)
    out = T.sub(T.mul(w.gamma_plus, T.mean(t_pos)), T.mul(w.gamma_minus, T.mean(t_neg)))
    return T.sub(out, T.mean(_checked_conjugate(t_gen, div)))


def fgan_losses(t_real, t_gen, div: FDivergence) -> tuple[Tensor, Tensor]:
    """Single-class variational f-GAN ``(d_loss, g_loss)``."""
    t_real, t_gen = _domain(t_real, div), _domain(t_gen, div)
    conj = T.mean(_checked_conjugate(t_gen, div))
    return T.add(T.neg(T.mean(t_real)), conj), T.sub(T.mean(t_real), conj)


# -- WGAN-GP -----------------------------------------------------------------------

def rumi_wgan_losses(d_pos, d_neg, d_gen, w: RumiWeights) -> tuple[Tensor, Tensor]:
    m_pos, m_neg, m_gen = T.mean(_batch(d_pos)), T.mean(_batch(d_neg)), T.mean(_batch(d_gen))
    pos_gap, neg_gap = T.sub(m_pos, m_gen), T.sub(m_neg, m_gen)
    d_loss = T.sub(T.mul(-w.gamma_plus, pos_gap), T.mul(w.gamma_minus, neg_gap))
    g_loss = T.sub(T.mul(w.gamma_plus, pos_gap), T.mul(w.gamma_minus, neg_gap))
    return d_loss, g_loss


def gradient_penalty(discriminator, x_gen, x_pos, x_neg, seed) -> Tensor:
    """Mean of ``(||grad_x D(x)|| - 1)^2`` over generated/positive and generated/negative interpolates.

    Must run inside an active :class:`~rumigan.tensor.Tape`; the result is
    differentiable with respect to whatever the discriminator's parameters
    are tracked on that tape.
    """
    x_gen, x_pos, x_neg = (np.asarray(getattr(x, "data", x), dtype=np.float64)
                           for x in (x_gen, x_pos, x_neg))
    if not (x_gen.shape == x_pos.shape == x_neg.shape):
        raise ValueError("gradient penalty batches must have equal shapes")
    tape = T.current_tape()
    if tape is None:
        raise T.TapeError("gradient_penalty needs an active tape")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = x_gen.shape[0]
    xi = rng.uniform(0.0, 1.0, size=(n, 1))
    zeta = rng.uniform(0.0, 1.0, size=(n, 1))
    hat = (1.0 - xi) * x_gen + xi * x_pos
    tilde = (1.0 - zeta) * x_gen + zeta * x_neg
    x = tape.watch(Tensor(np.concatenate([hat, tilde], axis=0)))
    out = T.sum(discriminator(x))
    (gx,) = tape.gradient(out, [x], create_graph=True)
    return T.mean(T.square(T.sub(T.norm(gx, axis=1), 1.0)))


# -- per-class discriminator terms --------------------------------------------------

def rumi_d_terms(family: str, out_pos, out_neg, out_gen, w: RumiWeights,
                 labels: LsganLabels | None = None) -> tuple[Tensor | None, Tensor | None, Tensor]:
    """Positive, negative and generated contributions to a Rumi discriminator loss.

    Their sum equals the full loss. ``out_pos``/``out_neg`` may be ``None``
    (the term is then ``None``) so a single update can use one data class.
    ``family`` is ``rumi-sgan`` (outputs are probabilities), ``rumi-lsgan``
    (raw outputs) or ``rumi-fgan:<div>`` (outputs are ``T = g(D)``).
    """
    if family == "rumi-sgan":
        pos = None if out_pos is None else T.mul(-w.alpha_plus, T.mean(T.log(_prob(out_pos))))
        neg = None if out_neg is None else T.mul(-w.alpha_minus, T.mean(_log1m(_prob(out_neg))))
        return pos, neg, T.neg(T.mean(_log1m(_prob(out_gen))))
    if family == "rumi-lsgan":
        if labels is None:
            raise ValueError("rumi-lsgan needs labels")
        pos = None if out_pos is None else T.mul(w.beta_plus, _msq(out_pos, labels.b_plus))
        neg = None if out_neg is None else T.mul(w.beta_minus, _msq(out_neg, labels.b_minus))
        return pos, neg, _msq(out_gen, labels.a)
    if family.startswith("rumi-fgan:"):
        div = divergence(family.split(":", 1)[1])
        pos = None if out_pos is None else T.mul(-w.gamma_plus, T.mean(_domain(out_pos, div)))
        neg = None if out_neg is None else T.mul(w.gamma_minus, T.mean(_domain(out_neg, div)))
        return pos, neg, T.mean(_checked_conjugate(_domain(out_gen, div), div))
    raise ValueError(f"no per-class split for family {family!r}")
