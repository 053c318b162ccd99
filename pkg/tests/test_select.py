import math

import numpy as np
import pandas as pd
import pytest

from countcast.design import FeatureConfig, FeatureLibrary
from countcast.glm import FamilySpec
from countcast.select import (
    GroupSpec,
    SelectionData,
    SelectionDiagram,
    default_group,
    optimal_merge,
    run_diagram,
    scenario,
)
from countcast.series import CountSeries
from countcast.synthetic import SeasonalGenerator

from oracles import brute_force_merge, random_merge_problem


def _data(series, start_row=0, family="poisson"):
    lib = FeatureLibrary(series, FeatureConfig().anchored(series))
    return SelectionData(lib, start_row, FamilySpec(family))


def test_empty_group_keeps_base(seasonal_series):
    data = _data(seasonal_series)
    res = optimal_merge(("tod_s1",), GroupSpec("tow", ()), data)
    assert res.chosen == ()
    assert res.value == pytest.approx(data.value(("tod_s1",), "bic")[0])


def test_relevant_member_is_found():
    rng = np.random.default_rng(0)
    n = 24 * 7 * 6
    ts = pd.date_range("2016-01-03", periods=n, freq="h")
    s1 = np.sin(2 * np.pi * ts.hour / 24)
    series = CountSeries(ts[0], rng.poisson(np.exp(1.5 + 0.8 * s1)))
    res = optimal_merge((), GroupSpec("tod", ("tod_s1", "tod_c1")), _data(series))
    assert res.chosen == ("tod_s1",)
    assert len(res.candidates) == 4


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_matches_enumeration(seed):
    lib, start, selected, group = random_merge_problem(seed)
    res = optimal_merge(selected, group, SelectionData(lib, start, FamilySpec()))
    best, best_val = brute_force_merge(lib, start, selected, group.members)
    assert res.chosen == best
    assert res.value == pytest.approx(best_val, abs=1e-5)


def test_nested_prefix_candidates():
    tod = default_group("tod", fourier_order=10)
    cands = tod.candidates()
    assert len(cands) == 11
    assert cands[0] == () and cands[1] == ("tod_s1", "tod_c1")
    assert all(len(c) == 2 * k for k, c in enumerate(cands))
    lags = default_group("lags", n_lags=3).candidates()
    assert lags == [(), ("lag_1",), ("lag_1", "lag_2"), ("lag_1", "lag_2", "lag_3")]


def test_growth_strategy_is_single_or_none():
    g = default_group("growth")
    assert g.search_strategy == "single_or_none"
    assert all(len(c) <= 1 for c in g.candidates())
    assert len(g.candidates()) == 6
    with pytest.raises(ValueError):
        GroupSpec("growth", g.members, "exhaustive")


def test_default_members():
    assert len(default_group("tod").members) == 20
    assert default_group("avglag").members == tuple(f"avglag_{j}" for j in (5, 10, 15, 24, 48))
    assert default_group("lags").members == tuple(f"lag_{i}" for i in range(1, 11))
    assert default_group("avglag").search_strategy == "exhaustive"


def test_scenario_presets():
    assert [g.name for g in scenario("seas_only").nodes] == ["tod", "tod_wd", "tow", "toy"]
    assert [g.name for g in scenario("seas_growth").nodes][-1] == "growth"
    assert [g.name for g in scenario("seas_growth_avglag_lag").nodes] == [
        "tod", "tod_wd", "tow", "toy", "growth", "lags", "avglag",
    ]
    with pytest.raises(ValueError):
        scenario("everything")
    with pytest.raises(ValueError):
        SelectionDiagram((default_group("tod"), default_group("tod")))


def test_zero_node_diagram_is_intercept_only(seasonal_series):
    model, trace = run_diagram(SelectionDiagram(()), seasonal_series)
    assert model.column_names == ("intercept",)
    assert model.beta[0] == pytest.approx(math.log(seasonal_series.values.mean()), abs=1e-8)
    assert trace.nodes == []


@pytest.fixture(scope="module")
def lag_series():
    return SeasonalGenerator(level=1.5, excitation=(0.3,)).generate("2016-01-03", 10 * 168, seed=3)


def test_seas_only_never_touches_lags_or_growth(lag_series):
    d = scenario("seas_only", fourier_order=3)
    _, trace = run_diagram(d, lag_series)
    cols = trace.evaluated_columns()
    assert cols and not any(c.startswith(("lag", "avglag", "growth")) for c in cols)


@pytest.mark.parametrize("family", ["poisson", "negbin"])
def test_full_diagram_properties(lag_series, family):
    d = scenario("seas_growth_avglag_lag", family, fourier_order=3, n_lags=4)
    model, trace = run_diagram(d, lag_series)
    values = [trace.baseline_value] + [n.value for n in trace.nodes]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))
    assert trace.final_value <= trace.baseline_value
    growth = [n for n in trace.nodes if n.group == "growth"][0]
    assert len(growth.chosen) <= 1
    assert sum(c.startswith("growth") for c in model.column_names) <= 1
    assert trace.start_row == 48
    assert set(model.column_names) - {"intercept"} == set(trace.final_columns) - set(model.dropped_columns)


def test_selection_is_deterministic_and_threads_agree(lag_series):
    d = scenario("seas_growth_lag", fourier_order=2, n_lags=3)
    m1, t1 = run_diagram(d, lag_series)
    m2, t2 = run_diagram(d, lag_series, threads=4)
    assert t1.to_json() == t2.to_json()
    np.testing.assert_array_equal(m1.beta, m2.beta)


class _FlatData(SelectionData):
    def __init__(self):
        pass

    def value(self, columns, criterion):
        return 1.0, True


def test_ties_go_to_first_candidate():
    group = GroupSpec("lags", ("lag_1", "lag_2"), "exhaustive")
    res = optimal_merge((), group, _FlatData())
    assert res.chosen == ()
    assert [c.subset for c in res.candidates] == [(), ("lag_1",), ("lag_2",), ("lag_1", "lag_2")]
