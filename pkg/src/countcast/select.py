"""Grouped structural model selection.

Covariates are organised in groups (daily, weekly, annual Fourier terms,
growth, lags, averaged lags). A selection diagram visits the groups in order;
at each node the *optimal merge* picks the subset ``H`` of the group that
minimises ``crit(H | S)`` given the columns ``S`` chosen so far, and the
accumulated set is carried to the next node.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .design import (
    AvgLagSpec,
    FeatureConfig,
    FeatureLibrary,
    GROWTH_FUNCS,
    fourier_names,
    order_columns,
    parse_column,
    required_history,
)
from .glm import FamilySpec, FitControls, FittedModel, criterion_value, fit_glm
from .series import CountSeries

STRATEGIES = ("exhaustive", "nested_prefix", "single_or_none")
GROUP_NAMES = ("tod", "tod_wd", "tow", "toy", "growth", "lags", "avglag")
CRITERIA = ("aic", "bic")

SEASONAL = ("tod", "tod_wd", "tow", "toy")
SCENARIOS = {
    "seas_only": SEASONAL,
    "seas_growth": SEASONAL + ("growth",),
    "seas_growth_avglag": SEASONAL + ("growth", "avglag"),
    "seas_growth_lag": SEASONAL + ("growth", "lags"),
    "seas_growth_avglag_lag": SEASONAL + ("growth", "lags", "avglag"),
}

DEFAULT_STRATEGY = {
    "tod": "nested_prefix",
    "tod_wd": "nested_prefix",
    "tow": "nested_prefix",
    "toy": "nested_prefix",
    "growth": "single_or_none",
    "lags": "nested_prefix",
    "avglag": "exhaustive",
}


class SelectionError(RuntimeError):
    def __init__(self, message: str, trace: "SelectionTrace | None" = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class GroupSpec:
    name: str
    members: tuple[str, ...]
    search_strategy: str = "exhaustive"

    def __post_init__(self):
        if self.search_strategy not in STRATEGIES:
            raise ValueError(f"unknown search strategy {self.search_strategy!r}")
        if self.name == "growth" and self.search_strategy != "single_or_none":
            raise ValueError("the growth group only admits the single_or_none strategy")
        object.__setattr__(self, "members", tuple(self.members))
        if len(set(self.members)) != len(self.members):
            raise ValueError(f"group {self.name} has duplicate members")
        for m in self.members:
            parse_column(m)

    def blocks(self) -> list[tuple[str, ...]]:
        """Members grouped by order, e.g. ``(s_k, c_k)`` pairs for Fourier groups."""
        out: list[tuple[str, ...]] = []
        key = None
        for m in self.members:
            info = parse_column(m)
            k = (info.group, info.order, info.growth)
            if out and k == key:
                out[-1] = out[-1] + (m,)
            else:
                out.append((m,))
            key = k
        return out

    def candidates(self) -> list[tuple[str, ...]]:
        """Subsets searched by the strategy, in tie-break order; always starts with ``()``."""
        if self.search_strategy == "exhaustive":
            return [c for r in range(len(self.members) + 1) for c in itertools.combinations(self.members, r)]
        if self.search_strategy == "single_or_none":
            return [()] + [(m,) for m in self.members]
        blocks = self.blocks()
        return [tuple(itertools.chain.from_iterable(blocks[:k])) for k in range(len(blocks) + 1)]


def group_members(name: str, fourier_order: int = 10, n_lags: int = 10, avglag_windows: Sequence[int] = AvgLagSpec().windows) -> tuple[str, ...]:
    if name in ("tod", "tod_wd", "tow", "toy"):
        return tuple(fourier_names(name, fourier_order))
    if name == "lags":
        return tuple(f"lag_{i}" for i in range(1, n_lags + 1))
    if name == "avglag":
        return tuple(f"avglag_{j}" for j in avglag_windows)
    if name == "growth":
        return tuple(f"growth_{g}" for g in GROWTH_FUNCS)
    raise ValueError(f"unknown group {name!r}")


def default_group(name: str, strategy: str | None = None, **member_kwargs) -> GroupSpec:
    return GroupSpec(name, group_members(name, **member_kwargs), strategy or DEFAULT_STRATEGY[name])


@dataclass(frozen=True)
class SelectionDiagram:
    nodes: tuple[GroupSpec, ...]
    criterion: str = "bic"
    family: FamilySpec = field(default_factory=FamilySpec)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        names = [g.name for g in self.nodes]
        if len(set(names)) != len(names):
            raise ValueError("a group may appear at most once in a diagram")

    def required_history(self) -> int:
        return required_history(m for g in self.nodes for m in g.members)


def scenario(
    preset: str,
    family: FamilySpec | str = "poisson",
    criterion: str = "bic",
    strategies: dict[str, str] | None = None,
    **member_kwargs,
) -> SelectionDiagram:
    """Diagram for one of the named complexity scenarios."""
    if preset not in SCENARIOS:
        raise ValueError(f"unknown scenario {preset!r}; expected one of {sorted(SCENARIOS)}")
    if isinstance(family, str):
        family = FamilySpec(family)
    strategies = strategies or {}
    unknown = set(strategies) - set(GROUP_NAMES)
    if unknown:
        raise ValueError(f"strategy overrides for unknown groups: {sorted(unknown)}")
    nodes = tuple(default_group(g, strategies.get(g), **member_kwargs) for g in SCENARIOS[preset])
    return SelectionDiagram(nodes, criterion, family, preset)


# -- search ------------------------------------------------------------------


@dataclass(frozen=True)
class CandidateRecord:
    subset: tuple[str, ...]
    value: float
    converged: bool


@dataclass(frozen=True)
class MergeResult:
    group: str
    strategy: str
    candidates: tuple[CandidateRecord, ...]
    chosen: tuple[str, ...]
    value: float

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "strategy": self.strategy,
            "chosen": list(self.chosen),
            "criterion_value": self.value,
            "candidates": [
                {"subset": list(c.subset), "value": _json_float(c.value), "converged": c.converged}
                for c in self.candidates
            ],
        }


def _json_float(x: float):
    return x if math.isfinite(x) else None


class SelectionData:
    """Response, covariate cache and common row window shared by all candidate fits."""

    def __init__(
        self,
        library: FeatureLibrary,
        start_row: int,
        family: FamilySpec,
        controls: FitControls | None = None,
    ):
        self.library = library
        self.start_row = start_row
        self.family = family
        self.controls = controls or FitControls()
        self._fits: dict[tuple[str, ...], FittedModel] = {}

    def fit(self, columns: Iterable[str]) -> FittedModel:
        key = tuple(order_columns(columns))
        model = self._fits.get(key)
        if model is None:
            design = self.library.design(key, self.start_row)
            model = fit_glm(design, self.library.response(self.start_row), self.family, self.controls)
            self._fits[key] = model
        return model

    def value(self, columns: Iterable[str], criterion: str) -> tuple[float, bool]:
        model = self.fit(columns)
        if not model.converged:
            return math.nan, False
        return criterion_value(model, criterion), True


def optimal_merge(
    selected: Iterable[str],
    group: GroupSpec,
    data: SelectionData,
    criterion: str = "bic",
    threads: int = 1,
) -> MergeResult:
    """Subset of ``group`` minimising the criterion once merged into ``selected``.

    Candidates come from the group's search strategy; the empty subset is
    always among them. Ties go to the earliest candidate.
    """
    selected = tuple(selected)
    cands = group.candidates()
    cols = [selected + c for c in cands]
    if threads > 1 and len(cands) > 1:
        with ThreadPoolExecutor(threads) as pool:
            # fit uncached keys concurrently; fill the cache deterministically afterwards
            models = list(pool.map(lambda c: _fit_uncached(data, c), cols))
        for c, m in zip(cols, models):
            data._fits.setdefault(tuple(order_columns(c)), m)
    records = []
    for c, full in zip(cands, cols):
        value, ok = data.value(full, criterion)
        records.append(CandidateRecord(c, value, ok))
    ok = [r for r in records if r.converged]
    if not ok:
        raise SelectionError(f"no candidate of group {group.name} converged")
    best = min(ok, key=lambda r: r.value)  # min() keeps the first of equal values
    return MergeResult(group.name, group.search_strategy, tuple(records), best.subset, best.value)


def _fit_uncached(data: SelectionData, columns) -> FittedModel:
    key = tuple(order_columns(columns))
    if key in data._fits:
        return data._fits[key]
    design = data.library.design(key, data.start_row)
    return fit_glm(design, data.library.response(data.start_row), data.family, data.controls)


@dataclass
class SelectionTrace:
    diagram: str
    family: str
    criterion: str
    start_row: int
    baseline_value: float
    nodes: list[MergeResult] = field(default_factory=list)
    final_columns: list[str] = field(default_factory=list)
    final_value: float = math.nan
    refit_value: float = math.nan

    def to_dict(self) -> dict:
        return {
            "diagram": self.diagram,
            "family": self.family,
            "criterion": self.criterion,
            "start_row": self.start_row,
            "baseline_value": self.baseline_value,
            "nodes": [n.to_dict() for n in self.nodes],
            "final_columns": self.final_columns,
            "final_value": _json_float(self.final_value),
            "refit_value": _json_float(self.refit_value),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def evaluated_columns(self) -> set[str]:
        return {c for n in self.nodes for r in n.candidates for c in r.subset}

    def summary(self) -> str:
        lines = [
            f"diagram {self.diagram}  family {self.family}  criterion {self.criterion}",
            f"{'node':<4} {'group':<8} {'strategy':<15} {'fits':>5} {'chosen':>7} {self.criterion:>16}",
            f"{'S0':<4} {'(int)':<8} {'':<15} {1:>5} {0:>7} {self.baseline_value:>16.3f}",
        ]
        for i, n in enumerate(self.nodes, 1):
            lines.append(
                f"{'S' + str(i):<4} {n.group:<8} {n.strategy:<15} {len(n.candidates):>5} "
                f"{len(n.chosen):>7} {n.value:>16.3f}"
            )
        lines.append("final: " + (", ".join(self.final_columns) or "(intercept only)"))
        return "\n".join(lines)


def run_diagram(
    diagram: SelectionDiagram,
    series: CountSeries,
    features: FeatureConfig | None = None,
    controls: FitControls | None = None,
    threads: int = 1,
) -> tuple[FittedModel, SelectionTrace]:
    """Apply the diagram's optimal merges in order and refit the chosen model.

    All candidate fits share one row window (starting after the longest
    history any group member needs) so criterion values are comparable; the
    final model is refitted on every row its own columns allow.
    """
    features = (features or FeatureConfig()).anchored(series)
    library = FeatureLibrary(series, features)
    start_row = diagram.required_history()
    if len(series) <= start_row + 1:
        raise SelectionError(f"series of length {len(series)} is too short for a history of {start_row}")
    data = SelectionData(library, start_row, diagram.family, controls)

    base, ok = data.value((), diagram.criterion)
    if not ok:
        raise SelectionError("intercept-only model failed to converge")
    trace = SelectionTrace(diagram.name, diagram.family.family, diagram.criterion, start_row, base)
    selected: tuple[str, ...] = ()
    value = base
    for i, node in enumerate(diagram.nodes, 1):
        try:
            result = optimal_merge(selected, node, data, diagram.criterion, threads)
        except SelectionError as exc:
            raise SelectionError(f"node S{i} ({node.name}): {exc}", trace) from exc
        trace.nodes.append(result)
        selected = selected + result.chosen
        value = result.value
    trace.final_columns = order_columns(selected)
    trace.final_value = value

    design = library.design(trace.final_columns)
    model = fit_glm(design, library.response(design.dropped_prefix), diagram.family, controls, features=features)
    if not model.converged:
        raise SelectionError("final refit did not converge", trace)
    trace.refit_value = criterion_value(model, diagram.criterion)
    return model, trace
