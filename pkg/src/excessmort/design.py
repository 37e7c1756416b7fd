"""Outcome vectors and predictor matrices for the four counterfactual models."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dataset import MONTH_ABBR, MonthlySeries, month_index
from .errors import InsufficientDataError, MissingPointError

HURRICANE_MONTHS = frozenset({6, 7, 8, 9, 10, 11})
DRY_MONTHS = frozenset({12, 1, 2, 3})


class ModelKind(enum.IntEnum):
    INTERCEPT_ONLY = 1
    MONTH_DUMMIES = 2
    MONTH_DUMMIES_AR1 = 3
    DYNAMIC_SEASONAL = 4


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    baseline_month: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not 1 <= self.baseline_month <= 12:
            raise ValueError("baseline_month must be in 1..12")

    @property
    def ar1(self) -> bool:
        return self.kind is ModelKind.MONTH_DUMMIES_AR1

    @property
    def label(self) -> str:
        return f"Model {int(self.kind)}"

    def columns(self) -> list[str]:
        if self.kind is ModelKind.INTERCEPT_ONLY:
            return ["intercept"]
        if self.kind is ModelKind.DYNAMIC_SEASONAL:
            return ["intercept", "lag", "hurricane", "dry"]
        return ["intercept"] + [MONTH_ABBR[m - 1] for m in range(1, 13) if m != self.baseline_month]

    def param_names(self) -> list[str]:
        names = self.columns() + ["sigma"]
        if self.ar1:
            names.append("rho")
        return names

    def to_dict(self) -> dict:
        return {"kind": int(self.kind), "baseline_month": self.baseline_month}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(ModelKind(d["kind"]), d.get("baseline_month", 1))


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    y: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...]
    time_index: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.y)

    @property
    def segment_starts(self) -> np.ndarray:
        """True where a row does not directly follow the previous row in calendar time."""
        k = np.array([month_index(y, m) for y, m in self.time_index])
        starts = np.ones(len(k), dtype=bool)
        starts[1:] = np.diff(k) != 1
        return starts


def regressors(spec: ModelSpec, month: int, lag: float | None = None) -> np.ndarray:
    """Predictor row for one calendar month (``lag`` only for the dynamic model)."""
    if spec.kind is ModelKind.INTERCEPT_ONLY:
        return np.ones(1)
    if spec.kind is ModelKind.DYNAMIC_SEASONAL:
        if lag is None:
            raise MissingPointError("dynamic model needs the previous month's count")
        return np.array([1.0, float(lag), float(month in HURRICANE_MONTHS), float(month in DRY_MONTHS)])
    row = np.zeros(12)
    row[0] = 1.0
    dummies = [m for m in range(1, 13) if m != spec.baseline_month]
    if month != spec.baseline_month:
        row[1 + dummies.index(month)] = 1.0
    return row


def build_design(
    series: MonthlySeries,
    spec: ModelSpec,
    years: Iterable[int] | None = None,
    exclude: Iterable[tuple[int, int]] = (),
) -> DesignMatrix:
    """Design for fitting ``spec`` on ``series``.

    ``years`` restricts the fitting sample (default: every year present) and
    ``exclude`` drops individual (year, month) points; the dropped rows leave
    gaps that the AR(1) likelihood treats as segment breaks. For the dynamic
    model a row is kept only when its previous month is itself in the
    fitting sample.
    """
    keep_years = None if years is None else set(int(y) for y in years)
    excluded = set((int(y), int(m)) for y, m in exclude)
    for ym in excluded:
        if ym not in series:
            raise MissingPointError(f"excluded point {ym[0]}-{ym[1]:02d} not in series")
    in_sample = [
        (y, m) not in excluded and (keep_years is None or y in keep_years)
        for y, m in series.time_index
    ]
    rows, ys, times = [], [], []
    for k, ((year, month), count) in enumerate(zip(series.time_index, series.counts)):
        if not in_sample[k]:
            continue
        lag = None
        if spec.kind is ModelKind.DYNAMIC_SEASONAL:
            if k == 0 or not in_sample[k - 1]:
                continue
            lag = series.counts[k - 1]
        rows.append(regressors(spec, month, lag))
        ys.append(float(count))
        times.append((year, month))
    min_rows = len(spec.columns()) + 1
    if len(rows) < min_rows:
        raise InsufficientDataError(f"{spec.label} needs at least {min_rows} usable rows, got {len(rows)}")
    X = np.vstack(rows)
    y = np.asarray(ys)
    X.setflags(write=False)
    y.setflags(write=False)
    return DesignMatrix(y, X, tuple(spec.columns()), tuple(times))
