"""Score-generating functions and the scores they induce from a rank-score path.

Three score functions are supported, all antisymmetric about 1/2:

========================  ========================  =========
kind                      J(u)                      A^2(J)
========================  ========================  =========
``"wilcoxon"``            u - 1/2                   1/12
``"van_der_waerden"``     Phi^{-1}(u)               1
``"sign"``                sign(u - 1/2) / 2         1/4
========================  ========================  =========

Each satisfies the Chernoff-Savage growth bound near 0 and 1, which is an
admissibility requirement for the asymptotic theory; it is not checked at
runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from arrank.errors import DomainError
from arrank.qr_lp import RankScorePath

ScoreKind = Literal["wilcoxon", "van_der_waerden", "sign"]
SCORE_KINDS: tuple[str, ...] = ("wilcoxon", "van_der_waerden", "sign")

# Rational approximation to the standard normal quantile (P. J. Acklam),
# relative error about 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_SQRT2PI = math.sqrt(2.0 * math.pi)


def norm_ppf(u: float) -> float:
    """Standard normal quantile, absolute error below 1e-12 on (0, 1)."""
    if not 0.0 < u < 1.0:
        raise DomainError(f"normal quantile needs 0 < u < 1, got {u}")
    if u < _P_LOW:
        q = math.sqrt(-2.0 * math.log(u))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    elif u <= 1.0 - _P_LOW:
        q = u - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log1p(-u))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    # One Halley step against the exact CDF.
    if u < 0.5:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - u
    else:
        e = -(0.5 * math.erfc(x / math.sqrt(2.0)) - (1.0 - u))
    step = e * _SQRT2PI * math.exp(0.5 * x * x)
    return x - step / (1.0 + 0.5 * x * step)


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _check_kind(kind: str) -> None:
    if kind not in SCORE_KINDS:
        raise DomainError(f"unknown score kind {kind!r}; choose from {SCORE_KINDS}")


def eval_score(kind: str, u: float) -> float:
    """Evaluate the score function ``J(u)`` for ``0 < u < 1``."""
    _check_kind(kind)
    if not 0.0 < u < 1.0:
        raise DomainError(f"score functions are defined on (0, 1), got {u}")
    if kind == "wilcoxon":
        return u - 0.5
    if kind == "van_der_waerden":
        return norm_ppf(u)
    return 0.5 * float(np.sign(u - 0.5))


def _antiderivative(kind: str, u: float) -> float:
    if kind == "wilcoxon":
        return 0.5 * u * u - 0.5 * u
    if kind == "van_der_waerden":
        # -phi(Phi^{-1}(u)), with limit 0 at both ends
        if u <= 0.0 or u >= 1.0:
            return 0.0
        return -norm_pdf(norm_ppf(u))
    return 0.5 * abs(u - 0.5)


def integrate_score(kind: str, a: float, b: float) -> float:
    """Closed-form ``int_a^b J(u) du`` for ``0 <= a <= b <= 1``."""
    _check_kind(kind)
    if not 0.0 <= a <= b <= 1.0:
        raise DomainError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")
    if kind == "wilcoxon":
        return 0.5 * (b * b - a * a) - 0.5 * (b - a)
    return _antiderivative(kind, b) - _antiderivative(kind, a)


def score_variance(kind: str) -> float:
    """``A^2(J) = int (J - Jbar)^2``; ``Jbar = 0`` for all supported kinds."""
    _check_kind(kind)
    return {"wilcoxon": 1.0 / 12.0, "van_der_waerden": 1.0, "sign": 0.25}[kind]


@dataclass(frozen=True)
class ScoreFunction:
    """Bundle of a score kind with its pointwise and integrated forms."""

    kind: str

    def __post_init__(self) -> None:
        _check_kind(self.kind)

    def __call__(self, u: float) -> float:
        return eval_score(self.kind, u)

    def eval(self, u: float) -> float:
        return eval_score(self.kind, u)

    def segment_integral(self, a: float, b: float) -> float:
        return integrate_score(self.kind, a, b)

    @property
    def a2(self) -> float:
        return score_variance(self.kind)


@dataclass(frozen=True)
class ScoreVector:
    """Scores ``b_t = -int_0^1 J(u) d a_t(u)`` for each observation."""

    values: NDArray[np.float64]
    score_kind: str
    a2: float


def generate_scores(path: RankScorePath, kind: str) -> ScoreVector:
    """Integrate ``J`` exactly against the piecewise-linear rank-score path.

    On each segment the scores are affine, so ``-int J da_t`` reduces to
    ``-sum_k slope_{t,k} * int_{alpha_k}^{alpha_{k+1}} J``.
    """
    _check_kind(kind)
    bp = path.breakpoints
    if kind == "wilcoxon":
        seg = 0.5 * (bp[1:] ** 2 - bp[:-1] ** 2) - 0.5 * np.diff(bp)
    else:
        seg = np.diff([_antiderivative(kind, float(u)) for u in bp])
    values = -(path.slopes() @ seg)
    return ScoreVector(values, kind, score_variance(kind))
