"""Observed data, lagged autoregression design and regression design.

Row ``t`` of the lagged design holds the regressors used to predict
``y_t``: ``(1, y_{t-1}, ..., y_{t-p})``.  Lags reaching before the first
response value are read from the presample ``(y_{-p+1}, ..., y_0)``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from arrank.errors import DataError, SingularDesignError

PresamplePolicy = Literal["explicit", "consume_head"]

#: Relative eigenvalue threshold used for every rank check.
RANK_RTOL = 1e-10


def _frozen(a: ArrayLike, ndim: int) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        if ndim == 2 and arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        else:
            raise DataError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Response series, presample and exogenous regressors.

    ``regressors`` has one column per regressor and no intercept column.
    """

    presample: NDArray[np.float64]
    response: NDArray[np.float64]
    regressors: NDArray[np.float64]
    regressor_names: tuple[str, ...]
    ar_order: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "presample", _frozen(self.presample, 1))
        object.__setattr__(self, "response", _frozen(self.response, 1))
        x = np.asarray(self.regressors, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size else x.reshape(len(self.response), 0)
        object.__setattr__(self, "regressors", _frozen(x, 2))
        object.__setattr__(self, "regressor_names", tuple(self.regressor_names))

        p, n, s = self.ar_order, self.n, self.s
        if p < 0:
            raise DataError(f"ar_order must be nonnegative, got {p}")
        if len(self.presample) != p:
            raise DataError(f"presample has length {len(self.presample)}, expected ar_order={p}")
        if self.regressors.shape[0] != n:
            raise DataError(f"regressors have {self.regressors.shape[0]} rows, response has {n}")
        if len(self.regressor_names) != s:
            raise DataError(f"{len(self.regressor_names)} regressor names for {s} columns")
        if n < p + s + 2:
            raise DataError(f"n={n} rows is too few for p={p}, s={s} (need at least {p + s + 2})")
        for name, arr in (("presample", self.presample), ("response", self.response)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise DataError("nonfinite value", row=int(bad[0]) + 1, column=name)
        bad_rows, bad_cols = np.nonzero(~np.isfinite(self.regressors))
        if bad_rows.size:
            raise DataError(
                "nonfinite value", row=int(bad_rows[0]) + 1, column=self.regressor_names[bad_cols[0]]
            )

    @property
    def n(self) -> int:
        return len(self.response)

    @property
    def s(self) -> int:
        return self.regressors.shape[1]

    def full_series(self) -> NDArray[np.float64]:
        """Presample followed by the response, i.e. ``y_{-p+1}, ..., y_n``."""
        return np.concatenate([self.presample, self.response])

    def has_ties(self) -> bool:
        """True if the response contains repeated values."""
        return len(np.unique(self.response)) < self.n


@dataclass(frozen=True)
class AutoregressionDesign:
    """Lagged design ``Y_n`` (intercept plus ``p`` lags) and the response."""

    design: NDArray[np.float64]
    response: NDArray[np.float64]
    p: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "design", _frozen(self.design, 2))
        object.__setattr__(self, "response", _frozen(self.response, 1))
        if self.design.shape != (len(self.response), self.p + 1):
            raise DataError(
                f"design shape {self.design.shape} does not match n={len(self.response)}, p={self.p}"
            )

    @property
    def n(self) -> int:
        return len(self.response)

    @property
    def lags(self) -> NDArray[np.float64]:
        """The design without its intercept column (``Y_n*``)."""
        return self.design[:, 1:]


@dataclass(frozen=True)
class RegressionDesign:
    """Exogenous regressors ``X_n*`` and the same matrix with an intercept column."""

    xstar: NDArray[np.float64]
    names: tuple[str, ...] = ()
    with_intercept: NDArray[np.float64] = field(init=False)

    def __post_init__(self) -> None:
        x = _frozen(self.xstar, 2)
        object.__setattr__(self, "xstar", x)
        object.__setattr__(self, "with_intercept", _frozen(np.column_stack([np.ones(len(x)), x]), 2))
        names = tuple(self.names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        object.__setattr__(self, "names", names)


@dataclass(frozen=True)
class DesignDiagnostics:
    """Advisory summaries of the regressor conditions.

    Attributes
    ----------
    min_eigen_An : float
        Smallest eigenvalue of ``A_n = X*'X* / n``.
    fourth_moment_avg : float
        ``n^{-1} sum_t ||x_t||^4``.
    max_leverage : float
        ``max_t n^{-1} x_t' A_n^{-1} x_t`` (pseudo-inverse when singular).
    trace_An : float
        Trace of ``A_n``, the scale for the eigenvalue warning.
    """

    min_eigen_An: float
    fourth_moment_avg: float
    max_leverage: float
    trace_An: float = 1.0

    @property
    def warnings(self) -> list[str]:
        out = []
        if self.min_eigen_An < RANK_RTOL * self.trace_An:
            out.append(
                f"regressor matrix A_n is (near) singular: min eigenvalue {self.min_eigen_An:.3g}"
            )
        if self.max_leverage > 0.5:
            out.append(f"high leverage observation: max leverage {self.max_leverage:.3g} > 0.5")
        return out


def _cell_to_float(value: object, row: int, column: str) -> float:
    if isinstance(value, (bool, np.bool_)):
        raise DataError("non-numeric cell", row=row, column=column)
    try:
        out = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise DataError(f"non-numeric cell {value!r}", row=row, column=column) from None
    if not math.isfinite(out):
        raise DataError("nonfinite value", row=row, column=column)
    return out


def _column(table: Mapping[str, Sequence[object]], name: str) -> NDArray[np.float64]:
    if name not in table:
        raise DataError(f"missing column {name!r}; available: {list(table)}", column=name)
    col = table[name]
    if isinstance(col, np.ndarray) and col.dtype.kind in "fiu":
        arr = col.astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise DataError("nonfinite value", row=int(bad[0]) + 1, column=name)
        return arr
    return np.array([_cell_to_float(v, i + 1, name) for i, v in enumerate(col)], dtype=np.float64)


def load_dataset(
    table: Mapping[str, Sequence[object]],
    response_name: str,
    regressor_names: Sequence[str],
    ar_order: int,
    presample_policy: PresamplePolicy = "consume_head",
    presample: ArrayLike | None = None,
) -> Dataset:
    """Build a :class:`Dataset` from a column-labelled table.

    Parameters
    ----------
    table : mapping
        Column name to sequence of cells, all columns of equal length.
        Cells may be numbers or numeric strings.
    response_name, regressor_names : str, sequence of str
        Columns to use.
    ar_order : int
        Autoregression order ``p``.
    presample_policy : {"explicit", "consume_head"}
        With ``"consume_head"`` the first ``p`` response values become the
        presample and the corresponding regressor rows are dropped.  With
        ``"explicit"`` the presample is passed in ``presample``.
    presample : array_like, optional
        Required (length ``p``) when ``presample_policy="explicit"``.

    Raises
    ------
    DataError
        Missing column, non-numeric or nonfinite cell (with 1-based row and
        column), or too few rows.
    """
    regressor_names = list(regressor_names)
    if ar_order < 0:
        raise DataError(f"ar_order must be nonnegative, got {ar_order}")
    y = _column(table, response_name)
    cols = [_column(table, name) for name in regressor_names]
    for name, c in zip(regressor_names, cols):
        if len(c) != len(y):
            raise DataError(f"column length {len(c)} differs from response length {len(y)}", column=name)
    x = np.column_stack(cols) if cols else np.empty((len(y), 0))

    p, s = ar_order, len(regressor_names)
    if presample_policy == "consume_head":
        if presample is not None:
            raise DataError("presample given but presample_policy='consume_head'")
        if len(y) < 2 * p + s + 2:
            raise DataError(
                f"table has {len(y)} rows; consume_head with p={p}, s={s} needs at least {2 * p + s + 2}"
            )
        pre, y, x = y[:p], y[p:], x[p:]
    elif presample_policy == "explicit":
        if presample is None:
            raise DataError("presample_policy='explicit' requires a presample")
        pre = np.asarray(presample, dtype=np.float64).ravel()
        if len(pre) != p:
            raise DataError(f"presample has length {len(pre)}, expected ar_order={p}")
    else:
        raise DataError(f"unknown presample_policy {presample_policy!r}")
    return Dataset(pre, y, x, tuple(regressor_names), p)


def _check_rank(m: NDArray[np.float64], what: str) -> None:
    if m.shape[1] > 1 and np.all(m[:, 0] == 1.0):
        # rank of [1 | L] equals rank of [1 | L - mean(L)]; centering keeps
        # series with a large offset from looking collinear with the intercept
        m = np.column_stack([m[:, 0], m[:, 1:] - m[:, 1:].mean(axis=0)])
    scale = np.max(np.abs(m), axis=0)
    scale[scale == 0] = 1.0
    g = (m / scale).T @ (m / scale)
    eig = np.linalg.eigvalsh(g)
    if eig[0] < RANK_RTOL * np.trace(g):
        raise SingularDesignError(
            f"{what} is rank deficient (relative min eigenvalue {eig[0] / np.trace(g):.3g})"
        )


def build_ar_design(d: Dataset) -> AutoregressionDesign:
    """Build the lagged design ``Y_n`` with rows ``(1, y_{t-1}, ..., y_{t-p})``.

    Raises
    ------
    SingularDesignError
        If the design does not have full column rank ``p + 1``.
    """
    p, n = d.ar_order, d.n
    series = d.full_series()
    design = np.empty((n, p + 1))
    design[:, 0] = 1.0
    for j in range(1, p + 1):
        # series[p + t] is y_t (0-based t); lag j of row t is series[p + t - j].
        design[:, j] = series[p - j : p - j + n]
    _check_rank(design, "autoregression design")
    return AutoregressionDesign(design, d.response.copy(), p)


def build_regression_design(d: Dataset) -> RegressionDesign:
    return RegressionDesign(d.regressors.copy(), d.regressor_names)


def design_diagnostics(r: RegressionDesign) -> DesignDiagnostics:
    """Smallest eigenvalue, fourth moment and maximal leverage of the regressors."""
    x = r.xstar
    n = x.shape[0]
    a = x.T @ x / n
    if a.size == 0:
        return DesignDiagnostics(0.0, 0.0, 0.0, 0.0)
    eig = np.linalg.eigvalsh(a)
    min_eig = max(float(eig[0]), 0.0)
    fourth = float(np.mean(np.sum(x * x, axis=1) ** 2))
    a_inv = np.linalg.pinv(a, hermitian=True)
    lev = np.einsum("ij,jk,ik->i", x, a_inv, x) / n
    return DesignDiagnostics(min_eig, fourth, float(max(lev.max(), 0.0)), float(np.trace(a)))
