"""Chi-square laws, the score functional gamma(J, F) and predicted local power.

Under the null the statistic is asymptotically central chi-square with
``s`` degrees of freedom; under local alternatives ``beta = beta_x /
sqrt(n)`` it is noncentral chi-square with noncentrality::

    eta^2 = beta_x' Q beta_x * gamma(J, F)^2 / A^2(J),
    gamma(J, F) = int_0^1 J(v) * (-f'/f)(F^{-1}(v)) dv.

Density conditions assumed by that theory (positive, absolutely
continuous density with finite Fisher information and exponential
tails) hold for every :class:`InnovationDistribution` family offered
here except that the Student t has polynomial tails; they are documented,
not verified.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, optimize, special, stats

from arrank.arscores import eval_score, score_variance
from arrank.errors import ArrankError, ConfigError, DomainError

INNOVATION_KINDS = ("normal", "logistic", "student_t", "contaminated_normal")


@dataclass(frozen=True)
class InnovationDistribution:
    """Mean-zero innovation law.

    Parameters by kind:

    * ``normal``: ``sigma``
    * ``logistic``: ``scale``
    * ``student_t``: ``nu`` (> 2), ``scale``
    * ``contaminated_normal``: ``eps`` in [0, 1], ``sigma1``, ``sigma2``;
      ``(1 - eps) N(0, sigma1^2) + eps N(0, sigma2^2)``
    """

    kind: str = "normal"
    sigma: float = 1.0
    scale: float = 1.0
    nu: float = 5.0
    eps: float = 0.1
    sigma1: float = 1.0
    sigma2: float = 5.0
    _parts: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        k = self.kind
        if k == "normal":
            if not self.sigma > 0:
                raise ConfigError("normal innovations need sigma > 0")
            parts = ((1.0, stats.norm(scale=self.sigma)),)
        elif k == "logistic":
            if not self.scale > 0:
                raise ConfigError("logistic innovations need scale > 0")
            parts = ((1.0, stats.logistic(scale=self.scale)),)
        elif k == "student_t":
            if not self.nu > 2:
                raise ConfigError("student_t innovations need nu > 2 for a finite variance")
            if not self.scale > 0:
                raise ConfigError("student_t innovations need scale > 0")
            parts = ((1.0, stats.t(self.nu, scale=self.scale)),)
        elif k == "contaminated_normal":
            if not 0.0 <= self.eps <= 1.0:
                raise ConfigError("contamination eps must lie in [0, 1]")
            if not (self.sigma1 > 0 and self.sigma2 > 0):
                raise ConfigError("contaminated_normal needs sigma1, sigma2 > 0")
            parts = (
                (1.0 - self.eps, stats.norm(scale=self.sigma1)),
                (self.eps, stats.norm(scale=self.sigma2)),
            )
        else:
            raise ConfigError(f"unknown innovation kind {k!r}; choose from {INNOVATION_KINDS}")
        object.__setattr__(self, "_parts", parts)

    @classmethod
    def from_dict(cls, d: dict) -> InnovationDistribution:
        known = {"kind", "sigma", "scale", "nu", "eps", "sigma1", "sigma2"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown innovation parameters: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        keys = {
            "normal": ("sigma",),
            "logistic": ("scale",),
            "student_t": ("nu", "scale"),
            "contaminated_normal": ("eps", "sigma1", "sigma2"),
        }[self.kind]
        return {"kind": self.kind, **{k: getattr(self, k) for k in keys}}

    @property
    def variance(self) -> float:
        return float(sum(w * d.var() for w, d in self._parts))

    def pdf(self, x: ArrayLike) -> NDArray:
        return sum(w * d.pdf(x) for w, d in self._parts)

    def cdf(self, x: ArrayLike) -> NDArray:
        return sum(w * d.cdf(x) for w, d in self._parts)

    def dpdf(self, x: ArrayLike) -> NDArray:
        """Derivative of the density."""
        x = np.asarray(x, dtype=np.float64)
        k = self.kind
        if k == "normal":
            return -x / self.sigma**2 * self.pdf(x)
        if k == "logistic":
            return -np.tanh(x / (2 * self.scale)) / self.scale * self.pdf(x)
        if k == "student_t":
            nu, s = self.nu, self.scale
            return -(nu + 1) * x / (nu * s * s + x * x) * self.pdf(x)
        return sum(-w * x / d.std() ** 2 * d.pdf(x) for w, d in self._parts)

    def ppf(self, q: float) -> float:
        if len(self._parts) == 1:
            return float(self._parts[0][1].ppf(q))
        hi = max(d.std() for _, d in self._parts) * 50
        return float(optimize.brentq(lambda x: float(self.cdf(x)) - q, -hi, hi, xtol=1e-14))

    def sample(self, rng: np.random.Generator, size: int) -> NDArray[np.float64]:
        k = self.kind
        if k == "normal":
            return rng.normal(0.0, self.sigma, size)
        if k == "logistic":
            return rng.logistic(0.0, self.scale, size)
        if k == "student_t":
            return self.scale * rng.standard_t(self.nu, size)
        z = rng.standard_normal(size)
        contaminated = rng.random(size) < self.eps
        return np.where(contaminated, self.sigma2, self.sigma1) * z


@dataclass(frozen=True)
class PowerPrediction:
    eta2: float
    dof: int
    level: float
    power: float


def _check_dof(k: int) -> None:
    if int(k) != k or k <= 0:
        raise DomainError(f"degrees of freedom must be a positive integer, got {k}")


def chi2_sf(x: float, k: int) -> float:
    """Upper tail ``P(chi2_k > x)`` via the regularized incomplete gamma function."""
    _check_dof(k)
    if x < 0:
        raise DomainError(f"chi2_sf needs x >= 0, got {x}")
    return float(special.gammaincc(0.5 * k, 0.5 * x))


def chi2_cdf(x: float, k: int) -> float:
    _check_dof(k)
    if x < 0:
        raise DomainError(f"chi2_cdf needs x >= 0, got {x}")
    return float(special.gammainc(0.5 * k, 0.5 * x))


def chi2_quantile(prob: float, k: int) -> float:
    """``x`` with ``P(chi2_k <= x) = prob``, polished by Newton steps."""
    _check_dof(k)
    if not 0.0 < prob < 1.0:
        raise DomainError(f"chi2_quantile needs 0 < prob < 1, got {prob}")
    x = 2.0 * float(special.gammainccinv(0.5 * k, 1.0 - prob))
    h = 0.5 * k
    for _ in range(3):
        if x <= 0:
            break
        dens = math.exp((h - 1) * math.log(0.5 * x) - 0.5 * x - math.lgamma(h)) * 0.5
        # Work on whichever tail is smaller to keep relative accuracy.
        if prob > 0.5:
            err = (1.0 - prob) - chi2_sf(x, k)
        else:
            err = chi2_cdf(x, k) - prob
        step = err / dens
        x -= step
        if abs(step) <= 1e-14 * max(1.0, x):
            break
    return x


def _gamma_integral(kind: str, cdf, dpdf, center: float) -> tuple[float, float]:
    # Substituting v = F(x): int J(F(x)) (-f'(x)) dx, split at the median where
    # the sign score jumps.
    def integrand(x: float) -> float:
        u = float(cdf(x))
        if u <= 0.0 or u >= 1.0:
            return 0.0
        return eval_score(kind, u) * -float(dpdf(x))

    left, e1 = integrate.quad(integrand, -np.inf, center, epsabs=1e-11, epsrel=1e-11, limit=200)
    right, e2 = integrate.quad(integrand, center, np.inf, epsabs=1e-11, epsrel=1e-11, limit=200)
    return left + right, e1 + e2


def gamma_jf(kind: str, dist: InnovationDistribution) -> float:
    """``gamma(J, F) = int_0^1 J(v) (-f'/f)(F^{-1}(v)) dv`` by adaptive quadrature.

    Raises
    ------
    ArrankError
        If the quadrature error estimate exceeds 1e-7.
    """
    value, err = _gamma_integral(kind, dist.cdf, dist.dpdf, 0.0)
    if err > 1e-7:
        raise ArrankError(f"gamma(J, F) quadrature did not converge (error estimate {err:.2g})")
    return value


def noncentrality(
    beta_x: ArrayLike, q: ArrayLike, kind: str, dist: InnovationDistribution
) -> float:
    """``eta^2 = beta_x' Q beta_x * gamma(J, F)^2 / A^2(J)``."""
    b = np.atleast_1d(np.asarray(beta_x, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if q.shape != (len(b), len(b)):
        raise DomainError(f"Q has shape {q.shape}, expected {(len(b), len(b))}")
    quad = float(b @ q @ b)
    scale = max(1.0, float(np.abs(q).max()) * float(b @ b))
    if quad < -1e-12 * scale:
        raise DomainError("Q is not positive semidefinite (negative quadratic form)")
    if not np.any(b):
        return 0.0
    return max(quad, 0.0) * gamma_jf(kind, dist) ** 2 / score_variance(kind)


def predicted_power(eta2: float, s: int, tau: float, max_terms: int = 100_000) -> float:
    """``P(chi2_s(eta2) > chi2_s(1 - tau))`` from the Poisson mixture of central laws.

    Terms are summed until the remaining Poisson mass falls below 1e-10.
    If ``eta2`` is so large that ``max_terms`` is not enough, 1.0 is
    returned with a :class:`RuntimeWarning`.
    """
    _check_dof(s)
    if eta2 < 0:
        raise DomainError(f"noncentrality must be nonnegative, got {eta2}")
    if not 0.0 < tau < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {tau}")
    if eta2 == 0:
        return float(tau)
    crit = chi2_quantile(1.0 - tau, s)
    lam = 0.5 * eta2
    # Start at the Poisson mode and sweep outwards so weights never underflow.
    mode = int(lam)
    log_w_mode = -lam + mode * math.log(lam) - math.lgamma(mode + 1)
    total = 0.0
    log_w = log_w_mode
    for j in range(mode, mode + max_terms):
        w = math.exp(log_w)
        total += w * chi2_sf(crit, s + 2 * j)
        log_w += math.log(lam) - math.log(j + 1)
        if j > lam and math.exp(log_w) * (j + 1) / (j + 1 - lam) < 1e-10 * 0.5:
            break
    else:
        warnings.warn("noncentral chi-square series did not converge; power saturated at 1", RuntimeWarning)
        return 1.0
    log_w = log_w_mode
    for j in range(mode - 1, -1, -1):
        log_w += math.log(j + 1) - math.log(lam)
        w = math.exp(log_w)
        total += w * chi2_sf(crit, s + 2 * j)
        if w < 1e-17:
            break
    return float(min(max(total, tau), 1.0))


def predict_power(
    beta_x: ArrayLike, q: ArrayLike, kind: str, dist: InnovationDistribution, tau: float
) -> PowerPrediction:
    eta2 = noncentrality(beta_x, q, kind, dist)
    s = len(np.atleast_1d(beta_x))
    return PowerPrediction(eta2, s, tau, predicted_power(eta2, s, tau))
