"""Independent reference implementations used by the test suite."""

import itertools
import math

import numpy as np

import statsmodels.api as sm


def brute_force_merge(library, start_row, selected, members, criterion="bic"):
    """Best subset of ``members`` by full enumeration with statsmodels Poisson fits."""
    y = library.response(start_row)
    n = len(y)
    base = [np.ones(n)] + [library.column(c)[start_row:] for c in selected]
    best, best_val = None, math.inf
    for r in range(len(members) + 1):
        for subset in itertools.combinations(members, r):
            cols = base + [library.column(c)[start_row:] for c in subset]
            X = np.column_stack(cols)
            res = sm.GLM(y, X, family=sm.families.Poisson()).fit(tol=1e-12, maxiter=200)
            k = X.shape[1]
            penalty = 2 * k if criterion == "aic" else k * math.log(n)
            val = penalty - 2 * res.llf
            if val < best_val - 1e-9:
                best, best_val = subset, val
    return best, best_val


def random_merge_problem(seed):
    """Synthetic series plus a random group of at most 8 members and a random base model."""
    from countcast.design import FeatureConfig, FeatureLibrary
    from countcast.select import GroupSpec, group_members
    from countcast.synthetic import SeasonalGenerator

    r = np.random.default_rng(seed)
    gen = SeasonalGenerator(level=float(r.uniform(0.5, 2.5)), excitation=(0.2,) if seed % 3 == 0 else ())
    series = gen.generate("2016-01-03", 4 * 168, seed=seed)
    kind = r.choice(["tod", "tow", "lags", "avglag"])
    if kind in ("tod", "tow"):
        pool = group_members(kind, fourier_order=4)
    elif kind == "lags":
        pool = group_members("lags", n_lags=8)
    else:
        pool = group_members("avglag")
    size = int(r.integers(1, min(8, len(pool)) + 1))
    members = tuple(sorted(r.choice(pool, size=size, replace=False), key=pool.index))
    base_pool = ["tod_s1", "tod_c1", "todwd_s1", "toy_c1"]
    selected = tuple(c for c in base_pool if r.uniform() < 0.5 and c not in members)
    lib = FeatureLibrary(series, FeatureConfig().anchored(series))
    start = max([0] + [int(m.split("_")[1]) for m in pool if m.startswith(("lag", "avglag"))])
    return lib, start, selected, GroupSpec(kind, members, "exhaustive")
