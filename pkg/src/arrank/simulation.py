"""Seeded Monte Carlo size and power studies.

Data follow ``y_t = beta_0 + x_t' beta_x / sqrt(n) + eps_t`` with
``eps_t = phi_0 + sum_j phi_j eps_{t-j} + u_t``.  Each replicate draws its
innovations and regressors from its own counter-based (Philox) stream
keyed by ``(seed, replicate, role)``, so replicates can run in any order
and on any number of workers with identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import signal

from arrank.arscores import SCORE_KINDS
from arrank.asymptotics import InnovationDistribution, chi2_cdf, noncentrality, predicted_power
from arrank.errors import ArrankError, ConfigError, StudyAbortedError
from arrank.model_data import Dataset, build_ar_design, build_regression_design
from arrank.test_engine import project_design, run_test

DESIGN_KINDS = ("iid_normal", "iid_uniform", "fixed_matrix")
_ROLE_INNOVATIONS = 0
_ROLE_DESIGN = 1


def rng_stream(seed: int, replicate: int, role: int) -> np.random.Generator:
    """Independent Philox stream for one ``(seed, replicate, role)`` triple."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(replicate), int(role)])
    return np.random.Generator(np.random.Philox(ss))


def is_stationary(phi: ArrayLike) -> bool:
    """All roots of ``1 - phi_1 z - ... - phi_p z^p`` outside the unit circle."""
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    if phi.size == 0 or not np.any(phi):
        return True
    coeffs = np.concatenate([[1.0], -phi])[::-1]  # highest degree first
    coeffs = np.trim_zeros(coeffs, "f")
    return bool(np.all(np.abs(np.roots(coeffs)) > 1.0))


@dataclass(frozen=True)
class SimulationConfig:
    """One Monte Carlo scenario.

    ``beta_x`` is the local-alternative direction; the coefficient used to
    generate data is ``beta_x / sqrt(n)``.  ``s`` and ``p`` are taken from
    the lengths of ``beta_x`` and ``phi``.  ``fixed_x`` is required (n x s)
    when ``design_gen="fixed_matrix"``.
    """

    n: int = 300
    phi: tuple[float, ...] = (0.5,)
    phi0: float = 0.0
    beta0: float = 0.0
    beta_x: tuple[float, ...] = (0.0, 0.0)
    innovation: InnovationDistribution = field(default_factory=InnovationDistribution)
    design_gen: str = "iid_normal"
    score_kind: str = "wilcoxon"
    level: float = 0.05
    replications: int = 1000
    seed: int = 20240101
    burn_in: int = 200
    fixed_x: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", tuple(float(v) for v in np.atleast_1d(self.phi)))
        object.__setattr__(self, "beta_x", tuple(float(v) for v in np.atleast_1d(self.beta_x)))
        if self.s < 1:
            raise ConfigError("beta_x must have at least one entry (s >= 1)")
        if self.n < self.p + self.s + 2:
            raise ConfigError(f"n={self.n} too small for p={self.p}, s={self.s}")
        if not is_stationary(self.phi):
            raise ConfigError(f"AR coefficients {self.phi} are not stationary")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.burn_in < 50:
            raise ConfigError("burn_in must be >= 50")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if self.score_kind not in SCORE_KINDS:
            raise ConfigError(f"unknown score kind {self.score_kind!r}")
        if self.design_gen not in DESIGN_KINDS:
            raise ConfigError(f"unknown design_gen {self.design_gen!r}; choose from {DESIGN_KINDS}")
        if self.design_gen == "fixed_matrix":
            if self.fixed_x is None:
                raise ConfigError("design_gen='fixed_matrix' requires fixed_x")
            fx = np.array(self.fixed_x, dtype=np.float64)
            if fx.ndim == 1:
                fx = fx.reshape(-1, 1)
            if fx.shape != (self.n, self.s):
                raise ConfigError(f"fixed_x has shape {fx.shape}, expected {(self.n, self.s)}")
            fx.setflags(write=False)
            object.__setattr__(self, "fixed_x", fx)
        elif self.fixed_x is not None:
            raise ConfigError("fixed_x is only used with design_gen='fixed_matrix'")

    @property
    def s(self) -> int:
        return len(self.beta_x)

    @property
    def p(self) -> int:
        return len(self.phi)

    def is_null(self) -> bool:
        return not any(self.beta_x)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["innovation"] = self.innovation.to_dict()
        out["phi"] = list(self.phi)
        out["beta_x"] = list(self.beta_x)
        out["s"] = self.s
        out["p"] = self.p
        out["fixed_x"] = None if self.fixed_x is None else self.fixed_x.tolist()
        return out


def gen_ar_errors(
    phi0: float,
    phi: ArrayLike,
    dist: InnovationDistribution,
    n: int,
    burn_in: int,
    rng: np.random.Generator,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Simulate an AR(p) error series.

    The recursion starts from zeros; the first ``burn_in`` values are
    discarded.  Returns ``(presample, errors)`` where ``presample`` holds
    the ``p`` values immediately before the ``n`` kept ones.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    if not is_stationary(phi):
        raise ConfigError(f"AR coefficients {phi.tolist()} are not stationary")
    p = len(phi)
    total = burn_in + n
    u = dist.sample(rng, total)
    # eps_t - sum_j phi_j eps_{t-j} = phi0 + u_t, started from zeros
    series = signal.lfilter([1.0], np.concatenate([[1.0], -phi]), phi0 + u)
    return series[burn_in - p : burn_in].copy(), series[burn_in:].copy()


def _standardize(x: NDArray) -> NDArray:
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - x.mean(axis=0)) / sd


def gen_dataset(cfg: SimulationConfig, replicate_index: int) -> Dataset:
    """Draw replicate ``replicate_index`` of the scenario.

    Generated regressor columns are standardized to mean 0 and variance 1.
    The presample responses carry no regression term.
    """
    rng_u = rng_stream(cfg.seed, replicate_index, _ROLE_INNOVATIONS)
    pre_eps, eps = gen_ar_errors(cfg.phi0, cfg.phi, cfg.innovation, cfg.n, cfg.burn_in, rng_u)
    if cfg.design_gen == "fixed_matrix":
        x = np.array(cfg.fixed_x)
    else:
        rng_x = rng_stream(cfg.seed, replicate_index, _ROLE_DESIGN)
        if cfg.design_gen == "iid_normal":
            x = rng_x.standard_normal((cfg.n, cfg.s))
        else:
            x = rng_x.uniform(-1.0, 1.0, (cfg.n, cfg.s))
        x = _standardize(x)
    beta = np.asarray(cfg.beta_x) / math.sqrt(cfg.n)
    y = cfg.beta0 + x @ beta + eps
    names = tuple(f"x{j + 1}" for j in range(cfg.s))
    return Dataset(cfg.beta0 + pre_eps, y, x, names, cfg.p)


@dataclass(frozen=True)
class ReplicateResult:
    statistic: float
    p_value: float
    reject: bool
    qn: NDArray[np.float64] | None
    error: str | None = None


def run_replicate(cfg: SimulationConfig, replicate_index: int) -> ReplicateResult:
    try:
        d = gen_dataset(cfg, replicate_index)
        rep = run_test(d, cfg.score_kind, cfg.level)
        qn = project_design(build_ar_design(d), build_regression_design(d)).qn
    except ArrankError as err:
        return ReplicateResult(float("nan"), float("nan"), False, None, f"{type(err).__name__}: {err}")
    return ReplicateResult(rep.statistic, rep.p_value, rep.reject, qn)


def _run_chunk(args: tuple[SimulationConfig, int, int]) -> list[ReplicateResult]:
    cfg, lo, hi = args
    return [run_replicate(cfg, i) for i in range(lo, hi)]


def ks_distance_chi2(stats_: ArrayLike, dof: int) -> float:
    """Kolmogorov-Smirnov distance between a sample and the central chi2_dof law."""
    x = np.sort(np.asarray(stats_, dtype=np.float64))
    m = len(x)
    if m == 0:
        return float("nan")
    cdf = np.array([chi2_cdf(max(v, 0.0), dof) for v in x])
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


@dataclass(frozen=True)
class StudyReport:
    """Aggregated outcome of :func:`run_study`."""

    config: dict
    rejection_rate: float
    predicted: float
    mc_stderr: float
    p_values: NDArray[np.float64]
    statistics: NDArray[np.float64]
    ks_distance_to_chi2: float
    eta2: float
    n_replications: int
    n_failures: int
    failures: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rejection_rate": self.rejection_rate,
            "predicted": self.predicted,
            "mc_stderr": self.mc_stderr,
            "p_values": np.asarray(self.p_values).tolist(),
            "statistics": np.asarray(self.statistics).tolist(),
            "ks_distance_to_chi2": self.ks_distance_to_chi2,
            "eta2": self.eta2,
            "n_replications": self.n_replications,
            "n_failures": self.n_failures,
            "failures": list(self.failures),
        }


def run_study(cfg: SimulationConfig, workers: int = 1, chunk_size: int = 25) -> StudyReport:
    """Run ``cfg.replications`` replicates and compare with the asymptotic prediction.

    Under the null the prediction is the level; otherwise it is the local
    power at ``eta^2`` computed with ``Q`` set to the average ``Q_n`` over
    replicates.  Failed replicates are skipped and listed; if more than 1%
    fail the study is aborted.

    Parameters
    ----------
    workers : int
        Worker processes.  Results do not depend on this value: replicates
        carry their own streams and are aggregated in index order.
    """
    n_rep = cfg.replications
    if workers <= 1:
        results = [run_replicate(cfg, i) for i in range(n_rep)]
    else:
        chunks = [(cfg, lo, min(lo + chunk_size, n_rep)) for lo in range(0, n_rep, chunk_size)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for part in ex.map(_run_chunk, chunks) for r in part]

    failures = tuple(f"replicate {i}: {r.error}" for i, r in enumerate(results) if r.error)
    if len(failures) > 0.01 * n_rep:
        raise StudyAbortedError(
            f"{len(failures)} of {n_rep} replicates failed; first: {failures[0]}"
        )
    ok = [r for r in results if r.error is None]
    m = len(ok)
    stats_ = np.array([r.statistic for r in ok])
    pvals = np.array([r.p_value for r in ok])
    rate = float(np.mean([r.reject for r in ok]))
    stderr = math.sqrt(rate * (1.0 - rate) / m)
    if cfg.is_null():
        eta2 = 0.0
        predicted = cfg.level
    else:
        q = np.mean(np.stack([r.qn for r in ok]), axis=0)
        eta2 = noncentrality(cfg.beta_x, q, cfg.score_kind, cfg.innovation)
        predicted = predicted_power(eta2, cfg.s, cfg.level)
    return StudyReport(
        config=cfg.to_dict(),
        rejection_rate=rate,
        predicted=predicted,
        mc_stderr=stderr,
        p_values=pvals,
        statistics=stats_,
        ks_distance_to_chi2=ks_distance_chi2(stats_, cfg.s),
        eta2=eta2,
        n_replications=m,
        n_failures=len(failures),
        failures=failures,
    )
