from __future__ import annotations

import numpy as np
import pytest

from arrank.model_data import AutoregressionDesign, Dataset


def random_dataset(rng: np.random.Generator, n: int, p: int, s: int, phi: float = 0.4) -> Dataset:
    """AR(p)-error data with standard-normal regressors and no regression signal."""
    total = n + p + 50
    u = rng.standard_normal(total)
    e = np.zeros(total)
    for t in range(1, total):
        e[t] = phi * e[t - 1] + u[t]
    series = e[50:]
    x = rng.standard_normal((n, s))
    names = tuple(f"x{j + 1}" for j in range(s))
    return Dataset(series[:p], series[p:], x, names, p)


def random_design(rng: np.random.Generator, n: int, p: int) -> AutoregressionDesign:
    x = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    return AutoregressionDesign(x, rng.standard_normal(n), p)


def intercept_only(y) -> AutoregressionDesign:
    y = np.asarray(y, dtype=np.float64)
    return AutoregressionDesign(np.ones((len(y), 1)), y, 0)


def one_sample_scores(y, alpha: float) -> np.ndarray:
    """Closed-form rank scores of an intercept-only design (Hajek scores)."""
    y = np.asarray(y)
    n = len(y)
    ranks = np.argsort(np.argsort(y)) + 1
    return np.clip(ranks - n * alpha, 0.0, 1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion for the session summary."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
