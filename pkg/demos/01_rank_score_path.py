"""
The autoregression rank-score path
==================================

Rank scores generalize ranks to models whose design contains lagged
responses.  For each alpha in [0, 1] they solve a small linear program,
and as alpha moves the solution changes piecewise linearly.  This script
traces the whole path for a short AR(1) series and compares it with the
one-sample case, where the scores have a closed form.
"""

import numpy as np

from arrank import (
    Dataset,
    build_ar_design,
    generate_scores,
    solve_quantile_fit,
    solve_rank_score_path,
    solve_rank_scores_at,
)
from arrank.model_data import AutoregressionDesign

rng = np.random.default_rng(7)

# An AR(1) series of length 12 plus one presample value.
e = np.zeros(13)
for t in range(1, 13):
    e[t] = 0.6 * e[t - 1] + rng.standard_normal()
d = Dataset(e[:1], e[1:], np.zeros((12, 0)), [], 1)
ar = build_ar_design(d)
print("lagged design (intercept, y_{t-1}):")
print(np.round(ar.design, 3))

# The path is exact: a list of breakpoints and the scores at each one.
path = solve_rank_score_path(ar)
print(f"\n{path.n_segments} segments, breakpoints:")
print(np.round(path.breakpoints, 4))

# Between breakpoints the scores are affine, so interpolation is exact.
alpha = 0.37
print(f"\ninterpolated at alpha={alpha}:", np.round(path.at(alpha), 4))
print("cold solve at the same alpha: ", np.round(solve_rank_scores_at(ar, alpha).values, 4))

# The primal side of the same LP is the autoregression quantile.
fit = solve_quantile_fit(ar, alpha, path)
print("quantile autoregression coefficients:", np.round(fit.coefficients, 4))

# Observations with positive residuals keep score 1, negative ones score 0.
print("residual signs:", np.sign(np.round(fit.residuals, 12)).astype(int))

# With an intercept-only design the scores are the classical one-sample
# rank scores: 1 until alpha reaches (R-1)/n, then falling linearly to 0.
y = np.array([2.3, -0.4, 1.1, 0.2, 3.0])
one = solve_rank_score_path(AutoregressionDesign(np.ones((5, 1)), y, 0))
print("\nintercept-only breakpoints:", one.breakpoints)

# Integrating the Wilcoxon score function against the path gives the
# familiar centred ranks (2R - 1) / (2n) - 1/2.
ranks = np.argsort(np.argsort(y)) + 1
print("Wilcoxon scores:", np.round(generate_scores(one, "wilcoxon").values, 4) + 0.0)
print("centred ranks:  ", (2 * ranks - 1) / 10 - 0.5)
