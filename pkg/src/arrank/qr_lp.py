"""Autoregression rank scores as the solution of a bounded linear program.

For a lagged design ``X`` (``n x m``, first column ones) and response ``y``
the rank scores at ``alpha`` solve::

    maximize    y' a
    subject to  X' (a - (1 - alpha) 1) = 0,   0 <= a <= 1.

This is the dual of the ``alpha``-th quantile autoregression.  The
solution is piecewise linear in ``alpha``; :func:`solve_rank_score_path`
traces it exactly with a parametric bounded-variable dual simplex, and
:func:`solve_rank_scores_at` solves a single ``alpha`` from scratch with a
primal simplex (Bland's rule).  The two share no pivoting code, so each
serves as a check on the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

from arrank.errors import (
    ArrankError,
    BreakpointCapError,
    DomainError,
    IterationLimitError,
    SingularDesignError,
)
from arrank.model_data import AutoregressionDesign

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class RankScoreVector:
    """Rank scores ``a_n(alpha)`` at a single ``alpha``.

    ``basis`` lists the observations whose score is determined by the
    equality constraints (zero residual in the primal fit).
    """

    alpha: float
    values: NDArray[np.float64]
    basis: tuple[int, ...]


@dataclass(frozen=True)
class RankScorePath:
    """The whole process ``alpha -> a_n(alpha)`` on ``[0, 1]``.

    Attributes
    ----------
    breakpoints : ndarray, shape (K + 1,)
        Strictly increasing, from 0 to 1.
    node_values : ndarray, shape (n, K + 1)
        Column ``k`` is ``a_n(breakpoints[k])``.
    bases : tuple of tuple of int
        Optimal basis on each of the ``K`` segments.
    """

    breakpoints: NDArray[np.float64]
    node_values: NDArray[np.float64]
    bases: tuple[tuple[int, ...], ...]
    n_pivots: int = 0

    @property
    def n(self) -> int:
        return self.node_values.shape[0]

    @property
    def n_segments(self) -> int:
        return len(self.breakpoints) - 1

    def slopes(self) -> NDArray[np.float64]:
        """``n x K`` matrix of ``d a_t / d alpha`` on each segment."""
        return np.diff(self.node_values, axis=1) / np.diff(self.breakpoints)

    def segment_of(self, alpha: float) -> int:
        """Index ``k`` with ``breakpoints[k] < alpha <= breakpoints[k+1]`` (0 for alpha=0)."""
        k = int(np.searchsorted(self.breakpoints, alpha, side="left")) - 1
        return min(max(k, 0), self.n_segments - 1)

    def at(self, alpha: ArrayLike) -> NDArray[np.float64]:
        """Linear interpolation of the path; returns ``n`` or ``n x len(alpha)``."""
        al = np.asarray(alpha, dtype=np.float64)
        if np.any((al < 0) | (al > 1)):
            raise DomainError("alpha must lie in [0, 1]")
        flat = np.atleast_1d(al)
        bp = self.breakpoints
        k = np.clip(np.searchsorted(bp, flat, side="right") - 1, 0, len(bp) - 2)
        w = (flat - bp[k]) / (bp[k + 1] - bp[k])
        out = self.node_values[:, k] * (1 - w) + self.node_values[:, k + 1] * w
        return out[:, 0] if al.ndim == 0 else out


@dataclass(frozen=True)
class QuantileFit:
    """Autoregression quantile at ``alpha`` (the primal companion of the rank scores)."""

    alpha: float
    coefficients: NDArray[np.float64]
    residuals: NDArray[np.float64]

    @property
    def objective(self) -> float:
        r = self.residuals
        return float(np.sum(r * (self.alpha - (r < 0))))


def _scaled(design: AutoregressionDesign) -> tuple[NDArray, NDArray]:
    x = np.array(design.design, dtype=np.float64)
    y = np.array(design.response, dtype=np.float64)
    # The solution set is unchanged by x -> x M (M invertible) and by
    # y -> y - x d, so center against the intercept column when there is one.
    if x.shape[1] and np.all(x[:, 0] == 1.0):
        x[:, 1:] -= x[:, 1:].mean(axis=0)
        y -= np.median(y)
    cs = np.max(np.abs(x), axis=0)
    cs[cs == 0] = 1.0
    ys = np.max(np.abs(y))
    if ys == 0:
        ys = 1.0
    return x / cs, y / ys


# ---------------------------------------------------------------------------
# Cold solver: bounded-variable primal simplex, Bland's rule.


def _bounded_simplex(
    A: NDArray,
    b: NDArray,
    c: NDArray,
    upper: NDArray,
    basis: list[int],
    at_upper: NDArray,
    max_iter: int,
    tol: float = 1e-11,
) -> None:
    """Maximize ``c'x`` s.t. ``Ax = b``, ``0 <= x <= upper`` from a feasible basis.

    ``basis`` and ``at_upper`` are updated in place.
    """
    m, ntot = A.shape
    is_basic = np.zeros(ntot, dtype=bool)
    is_basic[basis] = True
    for _ in range(max_iter):
        B = A[:, basis]
        xn = np.where(at_upper & ~is_basic, upper, 0.0)
        xn[is_basic] = 0.0
        xb = np.linalg.solve(B, b - A @ xn)
        pi = np.linalg.solve(B.T, c[basis])
        d = c - A.T @ pi
        can_up = ~is_basic & ~at_upper & (upper > 0) & (d > tol)
        can_down = ~is_basic & at_upper & (d < -tol)
        cand = np.flatnonzero(can_up | can_down)
        if cand.size == 0:
            return
        j = int(cand[0])
        direction = 1.0 if can_up[j] else -1.0
        w = np.linalg.solve(B, A[:, j]) * direction  # x_B moves by -theta * w
        ub_b = upper[basis]
        theta = upper[j]
        leave = -1
        leave_to_upper = False
        for pos in range(m):
            if w[pos] > tol:
                t = max(xb[pos], 0.0) / w[pos]
                to_up = False
            elif w[pos] < -tol and np.isfinite(ub_b[pos]):
                t = max(ub_b[pos] - xb[pos], 0.0) / -w[pos]
                to_up = True
            else:
                continue
            if t < theta - tol or (abs(t - theta) <= tol and leave >= 0 and basis[pos] < basis[leave]):
                theta, leave, leave_to_upper = t, pos, to_up
            elif leave < 0 and abs(t - theta) <= tol:
                theta, leave, leave_to_upper = t, pos, to_up
        if not np.isfinite(theta):
            raise ArrankError("linear program is unbounded")
        if leave < 0:
            at_upper[j] = not at_upper[j]
            continue
        k = basis[leave]
        is_basic[k] = False
        at_upper[k] = leave_to_upper
        basis[leave] = j
        is_basic[j] = True
        at_upper[j] = False
    raise IterationLimitError(f"simplex did not converge within {max_iter} pivots")


def _basic_solution(A: NDArray, b: NDArray, upper: NDArray, basis: list[int], at_upper: NDArray) -> NDArray:
    x = np.where(at_upper, upper, 0.0)
    x[basis] = 0.0
    x[basis] = np.linalg.solve(A[:, basis], b - A @ x)
    return x


def _solve_lp(
    A: NDArray, b: NDArray, c: NDArray, upper: NDArray, max_iter: int
) -> tuple[NDArray, list[int]]:
    """Two-phase bounded simplex; returns the solution and its basis."""
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A1 = np.hstack([A * sign[:, None], np.eye(m)])
    b1 = b * sign
    c1 = np.concatenate([np.zeros(n), -np.ones(m)])
    basis = list(range(n, n + m))
    at_upper = np.zeros(n + m, dtype=bool)
    _bounded_simplex(A1, b1, c1, np.concatenate([upper, np.full(m, np.inf)]), basis, at_upper, max_iter)

    up2 = np.concatenate([upper, np.zeros(m)])
    x = _basic_solution(A1, b1, up2, basis, at_upper)
    if x[n:].sum() > 1e-9 * max(1.0, np.abs(b1).sum()):
        raise ArrankError("linear program is infeasible")
    # Pivot leftover (zero-level) artificials out of the basis.
    for pos in range(m):
        if basis[pos] < n:
            continue
        row = np.linalg.inv(A1[:, basis])[pos] @ A1[:, :n]
        row[[j for j in basis if j < n]] = 0.0
        k = int(np.argmax(np.abs(row)))
        if abs(row[k]) < 1e-9:
            raise SingularDesignError("equality constraints are rank deficient")
        at_upper[k] = False
        basis[pos] = k

    _bounded_simplex(A1, b1, np.concatenate([c, np.zeros(m)]), up2, basis, at_upper, max_iter)
    x = _basic_solution(A1, b1, up2, basis, at_upper)
    return x[:n], list(basis)


def solve_rank_scores_at(design: AutoregressionDesign, alpha: float) -> RankScoreVector:
    """Solve the rank-score LP at one ``alpha`` by a cold two-phase simplex.

    Raises
    ------
    DomainError
        ``alpha`` outside ``[0, 1]``.
    IterationLimitError
        Pivot budget exhausted.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    x, y = _scaled(design)
    n, m = x.shape
    if alpha == 0.0 or alpha == 1.0:
        return RankScoreVector(float(alpha), np.full(n, 1.0 - alpha), ())
    rhs = (1.0 - alpha) * x.sum(axis=0)
    a, basis = _solve_lp(x.T.copy(), rhs, y, np.ones(n), max_iter=50 * n * m + 1000)
    a = np.clip(a, 0.0, 1.0)
    return RankScoreVector(float(alpha), a, tuple(sorted(basis)))


# ---------------------------------------------------------------------------
# Exact path: parametric dual simplex in alpha.


def _initial_basis(x: NDArray, y: NDArray) -> list[int]:
    """Optimal basis at ``alpha = 0+``.

    Near zero, ``a = 1 - alpha * lam`` where ``lam`` minimizes ``y' lam``
    over ``X' lam = X' 1, lam >= 0``; its optimal basis starts the path.
    """
    n, m = x.shape
    _, basis = _solve_lp(x.T.copy(), x.sum(axis=0), -y, np.full(n, np.inf), max_iter=50 * n * m + 1000)
    if len(basis) != m:
        raise SingularDesignError("could not find a starting basis of full rank")
    return basis


_OK, _CAP, _PIVOTS, _DUAL_LOST, _NO_ENTERING, _NOT_ZERO = range(6)


@numba.njit(cache=True)
def _lex_entering(ties, basis, binv, x, g, at_upper):
    # Perturb y_j by eps**j: a tied candidate's slack becomes a polynomial
    # in eps; the lexicographically smallest ratio is unique.
    n, m = x.shape
    nt = len(ties)
    rows = np.zeros((nt, n))
    for r in range(nt):
        j = ties[r]
        rows[r, j] = 1.0
        w = binv.T @ x[j]
        for pos in range(m):
            rows[r, basis[pos]] -= w[pos]
        sgn = 1.0 if at_upper[j] else -1.0
        for c in range(n):
            rows[r, c] *= sgn / abs(g[j])
    alive = np.ones(nt, dtype=np.bool_)
    n_alive = nt
    for c in range(n):
        lo = np.inf
        for r in range(nt):
            if alive[r] and rows[r, c] < lo:
                lo = rows[r, c]
        for r in range(nt):
            if alive[r] and rows[r, c] > lo + 1e-12:
                alive[r] = False
                n_alive -= 1
        if n_alive == 1:
            break
    for r in range(nt):
        if alive[r]:
            return ties[r]
    return ties[0]


@numba.njit(cache=True)
def _path_kernel(x, y, basis, cap, max_pivots, feas_tol):
    n, m = x.shape
    is_basic = np.zeros(n, dtype=np.bool_)
    at_upper = np.ones(n, dtype=np.bool_)
    for i in range(m):
        is_basic[basis[i]] = True
        at_upper[basis[i]] = False
    colsum = np.zeros(m)
    for t in range(n):
        colsum += x[t]

    size = 4 * n + 8
    alphas = np.empty(size)
    nodes = np.empty((size, n))
    seg_bases = np.empty((size, m), dtype=np.int64)
    alphas[0] = 0.0
    nodes[0, :] = 1.0
    k = 0  # index of the last recorded node
    alpha = 0.0
    pivots = 0
    upper_sum = np.zeros(m)
    r = np.empty(n)
    g = np.empty(n)
    status = _OK

    while True:
        if pivots % 64 == 0:
            upper_sum[:] = 0.0
            for t in range(n):
                if at_upper[t]:
                    upper_sum += x[t]
        xb = np.empty((m, m))
        yb = np.empty(m)
        for i in range(m):
            xb[i] = x[basis[i]]
            yb[i] = y[basis[i]]
        binv = np.linalg.inv(xb)
        c0 = binv.T @ (colsum - upper_sum)
        d = binv.T @ colsum
        dtol = 1e-12 * max(1.0, np.abs(d).max())
        i_leave = -1
        alpha_next = np.inf
        for i in range(m):
            if d[i] > dtol:
                h = c0[i] / d[i]
            elif d[i] < -dtol:
                h = (c0[i] - 1.0) / d[i]
            else:
                continue
            h = max(h, alpha)
            if h < alpha_next:
                alpha_next = h
                i_leave = i

        coef = binv @ yb
        for t in range(n):
            acc = y[t]
            for j in range(m):
                acc -= x[t, j] * coef[j]
            r[t] = acc
            if not is_basic[t]:
                if at_upper[t] and acc < -feas_tol:
                    status = _DUAL_LOST
                elif not at_upper[t] and acc > feas_tol:
                    status = _DUAL_LOST
        if status != _OK:
            break

        if alpha_next >= 1.0 - 1e-13:
            for t in range(n):
                if at_upper[t]:
                    status = _NOT_ZERO
            if status != _OK:
                break
            if alpha < 1.0:
                k += 1
                alphas[k] = 1.0
                nodes[k, :] = 0.0
                seg_bases[k - 1, :] = basis
            break

        if alpha_next > alpha + 1e-14:
            if k + 2 >= size:
                size *= 2
                a2 = np.empty(size)
                a2[: k + 1] = alphas[: k + 1]
                n2 = np.empty((size, n))
                n2[: k + 1] = nodes[: k + 1]
                b2 = np.empty((size, m), dtype=np.int64)
                b2[: k + 1] = seg_bases[: k + 1]
                alphas, nodes, seg_bases = a2, n2, b2
            k += 1
            alphas[k] = alpha_next
            for t in range(n):
                nodes[k, t] = 1.0 if at_upper[t] else 0.0
            for i in range(m):
                v = c0[i] - alpha_next * d[i]
                nodes[k, basis[i]] = min(max(v, 0.0), 1.0)
            seg_bases[k - 1, :] = basis
            if k > cap:
                status = _CAP
                break
            alpha = alpha_next

        pivots += 1
        if pivots > max_pivots:
            status = _PIVOTS
            break

        leaving = basis[i_leave]
        to_upper = d[i_leave] < 0
        sigma = -1.0 if to_upper else 1.0
        gmax = 0.0
        for t in range(n):
            acc = 0.0
            for j in range(m):
                acc += x[t, j] * binv[j, i_leave]
            g[t] = acc * sigma
            gmax = max(gmax, abs(g[t]))
        gtol = 1e-11 * max(1.0, gmax)
        tmin = np.inf
        for t in range(n):
            if is_basic[t] or t == leaving:
                continue
            if at_upper[t] and g[t] > gtol:
                tt = max(r[t], 0.0) / g[t]
            elif not at_upper[t] and g[t] < -gtol:
                tt = max(-r[t], 0.0) / -g[t]
            else:
                continue
            if tt < tmin:
                tmin = tt
        if not np.isfinite(tmin):
            status = _NO_ENTERING
            break
        bound = tmin + 1e-11 * (1.0 + tmin)
        n_ties = 0
        ties = np.empty(n, dtype=np.int64)
        for t in range(n):
            if is_basic[t] or t == leaving:
                continue
            if at_upper[t] and g[t] > gtol:
                tt = max(r[t], 0.0) / g[t]
            elif not at_upper[t] and g[t] < -gtol:
                tt = max(-r[t], 0.0) / -g[t]
            else:
                continue
            if tt <= bound:
                ties[n_ties] = t
                n_ties += 1
        if n_ties == 1:
            entering = ties[0]
        else:
            entering = _lex_entering(ties[:n_ties], basis, binv, x, g, at_upper)

        if at_upper[entering]:
            upper_sum -= x[entering]
        if to_upper:
            upper_sum += x[leaving]
        basis[i_leave] = entering
        is_basic[entering] = True
        at_upper[entering] = False
        is_basic[leaving] = False
        at_upper[leaving] = to_upper

    return status, alphas[: k + 1].copy(), nodes[: k + 1].copy(), seg_bases[:k].copy(), pivots, alpha


def solve_rank_score_path(
    design: AutoregressionDesign, max_breakpoints: int | None = None
) -> RankScorePath:
    """Trace ``alpha -> a_n(alpha)`` exactly over ``[0, 1]``.

    Starting from the optimal basis at ``alpha = 0`` (where ``a = 1``), the
    right-hand side ``(1 - alpha) X'1`` is moved until a basic score hits
    0 or 1; that observation then leaves the basis and the entering one is
    found by the dual ratio test on the quantile-fit residuals, with ties
    broken lexicographically.  Every segment is certified optimal: primal
    bounds hold and each nonbasic score agrees with the sign of its
    residual.

    Parameters
    ----------
    max_breakpoints : int, optional
        Abort after this many breakpoints (default ``50 n (p + 1)``).

    Raises
    ------
    BreakpointCapError
        Too many breakpoints; fall back to :func:`solve_rank_score_grid`.
    IterationLimitError
        Degenerate pivoting did not make progress.
    """
    x, y = _scaled(design)
    n, m = x.shape
    cap = max_breakpoints if max_breakpoints is not None else 50 * n * m
    max_pivots = 4 * cap + 100
    basis = np.array(_initial_basis(x, y), dtype=np.int64)
    try:
        status, alphas, nodes, bases, pivots, alpha = _path_kernel(x, y, basis, cap, max_pivots, FEAS_TOL)
    except np.linalg.LinAlgError:
        raise SingularDesignError("singular basis encountered on the rank-score path") from None
    if status == _CAP:
        raise BreakpointCapError(f"more than {cap} breakpoints; use solve_rank_score_grid instead")
    if status == _PIVOTS:
        raise IterationLimitError(
            f"parametric simplex exceeded {max_pivots} pivots at alpha={alpha:.6g}; "
            "degenerate cycling suspected"
        )
    if status != _OK:
        reason = {
            _DUAL_LOST: "lost dual feasibility",
            _NO_ENTERING: "found no entering observation",
            _NOT_ZERO: "did not reach zero at alpha = 1",
        }[status]
        raise ArrankError(f"rank-score path {reason} at alpha={alpha:.6g} (numerical breakdown)")
    node_values = np.ascontiguousarray(nodes.T)
    node_values[:, 0] = 1.0
    node_values[:, -1] = 0.0
    return RankScorePath(alphas, node_values, tuple(tuple(int(v) for v in b) for b in bases), pivots)


def solve_rank_score_grid(design: AutoregressionDesign, grid: ArrayLike) -> RankScorePath:
    """Piecewise-linear approximation of the path from cold solves on a grid.

    The fallback for inputs where the exact path hits its breakpoint cap.
    ``grid`` is augmented with 0 and 1 and sorted.
    """
    g = np.unique(np.concatenate([[0.0, 1.0], np.asarray(grid, dtype=np.float64)]))
    if g[0] < 0 or g[-1] > 1:
        raise DomainError("grid points must lie in [0, 1]")
    sols = [solve_rank_scores_at(design, float(a)) for a in g]
    return RankScorePath(g, np.column_stack([s.values for s in sols]), tuple(s.basis for s in sols[1:]))


def solve_quantile_fit(
    design: AutoregressionDesign, alpha: float, path: RankScorePath | None = None
) -> QuantileFit:
    """Autoregression quantile at ``alpha`` from the optimal basis of the path.

    At a breakpoint the primal solution is not unique; the basis of the
    segment ending at ``alpha`` is used, which gives the lowest of the
    optimal fits.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if path is None:
        path = solve_rank_score_path(design)
    basis = list(path.bases[path.segment_of(alpha)])
    x = np.asarray(design.design)
    y = np.asarray(design.response)
    coef = np.linalg.solve(x[basis], y[basis])
    return QuantileFit(float(alpha), coef, y - x @ coef)
