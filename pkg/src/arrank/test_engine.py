"""Rank test of "no regression" under a nuisance autoregression.

Pipeline: lagged design -> rank-score path -> scores -> projection of the
regressors off the lag space -> ``S_n``, ``T_n`` -> chi-square p-value.
Nothing in it estimates the autoregression coefficients, the intercept,
the innovation scale or the innovation law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from arrank.arscores import ScoreVector, generate_scores
from arrank.asymptotics import chi2_quantile, chi2_sf
from arrank.errors import ArrankError, CollinearityError, DomainError, SingularDesignError
from arrank.model_data import (
    AutoregressionDesign,
    Dataset,
    RegressionDesign,
    build_ar_design,
    build_regression_design,
    design_diagnostics,
)
from arrank.qr_lp import RankScorePath, solve_rank_score_path

#: Q_n is refused above this condition number.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ProjectedDesign:
    """Regressors split into their projection on the lag space and the residual.

    Attributes
    ----------
    xhat : ndarray, shape (n, s)
        Projection of ``X*`` on the column span of the lagged design.
    residual_design : ndarray, shape (n, s)
        ``X* - xhat``.
    qn : ndarray, shape (s, s)
        ``n^{-1} (X* - xhat)' (X* - xhat)``.
    """

    xhat: NDArray[np.float64]
    residual_design: NDArray[np.float64]
    qn: NDArray[np.float64]
    names: tuple[str, ...] = ()

    @property
    def q_condition(self) -> float:
        eig = np.linalg.eigvalsh(self.qn)
        return float(eig[-1] / eig[0]) if eig[0] > 0 else float("inf")


@dataclass(frozen=True)
class TestReport:
    """Outcome of :func:`run_test`."""

    __test__ = False  # not a pytest class

    statistic: float
    dof: int
    p_value: float
    level: float
    reject: bool
    score_kind: str
    s_n: NDArray[np.float64]
    q_condition: float
    n_effective: int
    critical_value: float
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _combination_name(vec: NDArray, names: tuple[str, ...]) -> str:
    v = vec / np.abs(vec).max()
    terms = [f"{c:+.3g}*{nm}" for c, nm in zip(v, names) if abs(c) > 1e-3]
    return " ".join(terms).lstrip("+")


def project_design(ar: AutoregressionDesign, reg: RegressionDesign) -> ProjectedDesign:
    """Project the regressors off the lagged design with a thin QR factorization.

    Raises
    ------
    SingularDesignError
        Lagged design rank deficient.
    CollinearityError
        Smallest eigenvalue of ``Q_n`` below ``1e-12 trace(X*'X*/n)`` or
        condition number above 1e12; the message names the near-null
        regressor combination.
    """
    y = np.asarray(ar.design)
    x = np.asarray(reg.xstar)
    n = y.shape[0]
    if x.shape[0] != n:
        raise DomainError(f"regressors have {x.shape[0]} rows, lagged design has {n}")
    if n <= ar.p + 1:
        raise DomainError("need n > p + 1")
    if y.shape[1] > 1 and np.all(y[:, 0] == 1.0):
        # same column span, better conditioned for series with a large offset
        y = np.column_stack([y[:, 0], y[:, 1:] - y[:, 1:].mean(axis=0)])
    q, r = np.linalg.qr(y)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        raise SingularDesignError("lagged design is rank deficient")
    xhat = q @ (q.T @ x)
    resid = x - xhat
    qn = resid.T @ resid / n
    qn = 0.5 * (qn + qn.T)
    pd = ProjectedDesign(xhat, resid, qn, tuple(reg.names))
    if qn.size:
        eig, vec = np.linalg.eigh(qn)
        # Compare with the energy of X* itself: a regressor lying in the lag
        # space leaves only rounding noise in Q_n, which a scale-free test
        # on Q_n alone cannot tell from signal.
        tr = float(np.sum(x * x)) / n
        if tr == 0 or eig[0] < 1e-12 * tr or eig[-1] > MAX_CONDITION * eig[0]:
            combo = _combination_name(vec[:, 0], pd.names)
            raise CollinearityError(
                "regressors are (nearly) collinear with the lag space or each other: "
                f"Q_n min eigenvalue {eig[0]:.3g}, trace(X*'X*/n) {tr:.3g}; offending combination {combo}"
            )
    return pd


def compute_statistic(pd: ProjectedDesign, sv: ScoreVector) -> tuple[NDArray[np.float64], float]:
    """``S_n = n^{-1/2} (X* - xhat)' b`` and ``T_n = S_n' Q_n^{-1} S_n / A^2(J)``."""
    b = np.asarray(sv.values)
    n = len(b)
    s_n = pd.residual_design.T @ b / np.sqrt(n)
    if not np.any(s_n):
        return s_n, 0.0
    chol = linalg.cho_factor(pd.qn, lower=True)
    t_n = float(s_n @ linalg.cho_solve(chol, s_n)) / sv.a2
    return s_n, max(t_n, 0.0)


def run_test(
    d: Dataset,
    kind: str = "wilcoxon",
    level: float = 0.05,
    path: RankScorePath | None = None,
) -> TestReport:
    """Test ``beta* = 0`` in ``y_t = beta_0 + x_t' beta* + eps_t`` with AR(p) errors.

    Parameters
    ----------
    d : Dataset
    kind : {"wilcoxon", "van_der_waerden", "sign"}
    level : float
        Significance level ``tau``; ``H_0`` is rejected when the statistic
        strictly exceeds the ``1 - tau`` chi-square quantile.
    path : RankScorePath, optional
        Precomputed rank-score path for ``d`` (skips the LP).

    Errors from any stage carry that stage's name in ``err.stage``.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    if d.s < 1:
        raise DomainError("at least one regressor is needed")

    def staged(stage, fn, *args):
        try:
            return fn(*args)
        except ArrankError as err:
            if err.stage is None:
                err.stage = stage
            raise

    ar = staged("build_ar_design", build_ar_design, d)
    reg = build_regression_design(d)
    if path is None:
        path = staged("solve_rank_score_path", solve_rank_score_path, ar)
    sv = staged("generate_scores", generate_scores, path, kind)
    pd = staged("project_design", project_design, ar, reg)
    s_n, t_n = staged("compute_statistic", compute_statistic, pd, sv)

    dof = d.s
    crit = chi2_quantile(1.0 - level, dof)
    p_value = chi2_sf(t_n, dof)
    notes = list(design_diagnostics(reg).warnings)
    if d.has_ties():
        notes.append("tied response values; rank scores resolved by lexicographic pivoting")
    return TestReport(
        statistic=t_n,
        dof=dof,
        p_value=p_value,
        level=level,
        reject=bool(t_n > crit),
        score_kind=kind,
        s_n=s_n,
        q_condition=pd.q_condition,
        n_effective=d.n,
        critical_value=crit,
        warnings=tuple(notes),
    )
