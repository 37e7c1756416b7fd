"""Monthly count series: loading, validation, baselines and synthesis."""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GapError, MissingPointError, MissingYearError, ParseError, RangeError, ZeroSigmaError

MONTH_ABBR = ("jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec")
MONTH_NAMES = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)

CSV_HEADER = ("year", "month", "deaths")

# Reported 2010-16 averages (sample SD) and 2017 tallies, Puerto Rico.
BASELINE_MU = (2592, 2358, 2539, 2336, 2388, 2362, 2431, 2448, 2373, 2477, 2414, 2664)
BASELINE_SIGMA = (132, 127, 138, 97, 69, 137, 39, 101, 94, 179, 139, 152)
OBSERVED_2017 = (2894, 2315, 2494, 2392, 2390, 2369, 2367, 2321, 2928, 3040, 2671, 2820)


def month_index(year: int, month: int) -> int:
    """Absolute month number, so consecutive months differ by exactly one."""
    return 12 * int(year) + int(month) - 1


def from_month_index(k: int) -> tuple[int, int]:
    return k // 12, k % 12 + 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MonthlySeries:
    """Contiguous monthly counts.

    Construct through :meth:`from_entries` (or :func:`load_csv`), which
    validates ordering, contiguity and ranges.
    """

    years: np.ndarray
    months: np.ndarray
    counts: np.ndarray
    label: str = ""

    @classmethod
    def from_entries(cls, entries: Iterable[Sequence[int]], label: str = "") -> "MonthlySeries":
        rows = [tuple(e) for e in entries]
        if not rows:
            raise ParseError("series has no entries")
        years = np.array([int(r[0]) for r in rows], dtype=np.int64)
        months = np.array([int(r[1]) for r in rows], dtype=np.int64)
        counts = np.array([r[2] for r in rows], dtype=np.int64)
        if np.any((months < 1) | (months > 12)):
            bad = rows[int(np.argmax((months < 1) | (months > 12)))]
            raise RangeError(f"month outside 1-12 in entry {bad}")
        if np.any(counts < 0):
            bad = rows[int(np.argmax(counts < 0))]
            raise RangeError(f"negative count in entry {bad}")
        idx = 12 * years + months - 1
        steps = np.diff(idx)
        if np.any(steps <= 0):
            i = int(np.argmax(steps <= 0))
            what = "duplicate" if steps[i] == 0 else "out-of-order"
            raise GapError(f"{what} entry {rows[i + 1][:2]} after {rows[i][:2]}")
        if np.any(steps > 1):
            i = int(np.argmax(steps > 1))
            raise GapError(f"gap between {rows[i][:2]} and {rows[i + 1][:2]}")
        return cls(_frozen(years), _frozen(months), _frozen(counts), label)

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MonthlySeries):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.years, other.years)
            and np.array_equal(self.months, other.months)
            and np.array_equal(self.counts, other.counts)
        )

    @property
    def entries(self) -> list[tuple[int, int, int]]:
        return [(int(y), int(m), int(c)) for y, m, c in zip(self.years, self.months, self.counts)]

    @property
    def time_index(self) -> list[tuple[int, int]]:
        return [(int(y), int(m)) for y, m in zip(self.years, self.months)]

    @property
    def year_set(self) -> list[int]:
        return sorted(set(int(y) for y in self.years))

    def position(self, year: int, month: int) -> int | None:
        k = month_index(year, month) - month_index(self.years[0], self.months[0])
        if 0 <= k < len(self):
            return k
        return None

    def get(self, year: int, month: int) -> int:
        k = self.position(year, month)
        if k is None:
            raise MissingPointError(f"{year}-{month:02d} not in series")
        return int(self.counts[k])

    def __contains__(self, ym: tuple[int, int]) -> bool:
        return self.position(*ym) is not None

    def with_value(self, year: int, month: int, count: int) -> "MonthlySeries":
        """Copy of the series with one cell replaced."""
        k = self.position(year, month)
        if k is None:
            raise MissingPointError(f"{year}-{month:02d} not in series")
        entries = self.entries
        entries[k] = (year, month, int(count))
        return MonthlySeries.from_entries(entries, self.label)

    def select_years(self, years: Iterable[int]) -> "MonthlySeries":
        """Contiguous sub-series covering exactly ``years`` (which must be consecutive)."""
        ys = sorted(set(int(y) for y in years))
        missing = [y for y in ys if not np.any(self.years == y)]
        if missing:
            raise MissingYearError(f"years not in series: {missing}")
        keep = np.isin(self.years, ys)
        return MonthlySeries.from_entries(
            [e for e, k in zip(self.entries, keep) if k], self.label
        )

    def concat(self, other: "MonthlySeries") -> "MonthlySeries":
        return MonthlySeries.from_entries(self.entries + other.entries, self.label or other.label)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical CSV rendering."""
        return hashlib.sha256(to_csv_text(self).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MonthlyBaseline:
    """Per-calendar-month mean and sample SD over a set of years."""

    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    n_years: tuple[int, ...]
    years: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not (len(self.mu) == len(self.sigma) == len(self.n_years) == 12):
            raise ValueError("baseline needs exactly 12 monthly entries")
        if any(s < 0 for s in self.sigma):
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True, eq=False)
class StandardizedSeries:
    years: np.ndarray
    months: np.ndarray
    z: np.ndarray

    def __len__(self) -> int:
        return len(self.z)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(y), int(m), float(z)) for y, m, z in zip(self.years, self.months, self.z)]


def parse_csv_text(text: str, label: str = "") -> MonthlySeries:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("empty CSV")
    header = tuple(c.strip().lower() for c in rows[0])
    if header != CSV_HEADER:
        raise ParseError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(rows[0])!r}")
    if len(rows) == 1:
        raise ParseError("CSV has a header but no data rows")
    entries = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != 3:
            raise ParseError(f"line {lineno}: expected 3 fields, got {len(r)}")
        try:
            year, month, deaths = (int(c.strip()) for c in r)
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer field in {r}") from None
        entries.append((year, month, deaths))
    return MonthlySeries.from_entries(entries, label)


def load_csv(path: str | Path) -> MonthlySeries:
    """Read a ``year,month,deaths`` CSV into a validated series."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_csv_text(text, label=path.stem)


def to_csv_text(series: MonthlySeries) -> str:
    lines = [",".join(CSV_HEADER)]
    lines += [f"{y},{m},{c}" for y, m, c in series.entries]
    return "\n".join(lines) + "\n"


def write_csv(series: MonthlySeries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv_text(series))


def monthly_baseline(series: MonthlySeries, years: Iterable[int]) -> MonthlyBaseline:
    """Mean and sample (n-1) SD of each calendar month over ``years``."""
    ys = sorted(set(int(y) for y in years))
    if not ys:
        raise MissingYearError("no baseline years given")
    mu, sigma, n = [], [], []
    for m in range(1, 13):
        vals = []
        for y in ys:
            if (y, m) not in series:
                raise MissingYearError(f"{y}-{m:02d} missing for baseline")
            vals.append(series.get(y, m))
        v = np.asarray(vals, dtype=float)
        mu.append(float(v.mean()))
        sigma.append(float(v.std(ddof=1)) if len(v) > 1 else 0.0)
        n.append(len(v))
    return MonthlyBaseline(tuple(mu), tuple(sigma), tuple(n), tuple(ys))


def standardize(series: MonthlySeries, baseline: MonthlyBaseline) -> StandardizedSeries:
    """``z = (x - mu_m) / sigma_m`` for every entry."""
    mu = np.asarray(baseline.mu)
    sd = np.asarray(baseline.sigma)
    needed = sorted(set(int(m) for m in series.months))
    zero = [MONTH_NAMES[m - 1] for m in needed if sd[m - 1] == 0]
    if zero:
        raise ZeroSigmaError(f"baseline SD is zero for {', '.join(zero)}")
    k = series.months - 1
    z = (series.counts - mu[k]) / sd[k]
    return StandardizedSeries(series.years, series.months, _frozen(z))


def _largest_remainder_round(values: np.ndarray, target_sum: int) -> np.ndarray:
    base = np.floor(values)
    short = int(target_sum - base.sum())
    order = np.argsort(-(values - base), kind="stable")
    out = base.copy()
    out[order[:short]] += 1
    return out.astype(np.int64)


def synthesize_moment_matched(
    baseline: MonthlyBaseline,
    years: Iterable[int],
    seed: int,
    ar_coef: float = 0.6,
    label: str = "synthetic",
) -> MonthlySeries:
    """Integer series whose per-month mean and sample SD reproduce ``baseline``.

    Base draws are a standard AR(1) sequence over the contiguous months
    (``ar_coef`` sets the month-to-month correlation), affinely rescaled
    within each calendar month so the moments match exactly, then rounded
    with a largest-remainder step that keeps each month's total.
    """
    ys = sorted(set(int(y) for y in years))
    if len(ys) < 2:
        raise ValueError("need at least two years to match a sample SD")
    if ys != list(range(ys[0], ys[-1] + 1)):
        raise ValueError("synthesis years must be consecutive")
    if not -1 < ar_coef < 1:
        raise ValueError("ar_coef must lie in (-1, 1)")
    rng = np.random.default_rng(seed)
    n_years = len(ys)
    n = 12 * n_years
    eta = rng.standard_normal(n)
    e = np.empty(n)
    e[0] = eta[0]
    scale = np.sqrt(1.0 - ar_coef**2)
    for t in range(1, n):
        e[t] = ar_coef * e[t - 1] + scale * eta[t]
    grid = e.reshape(n_years, 12)
    out = np.empty((n_years, 12), dtype=np.int64)
    for m in range(12):
        mu, sd = baseline.mu[m], baseline.sigma[m]
        col = grid[:, m]
        if sd == 0:
            vals = np.full(n_years, mu)
        else:
            vals = mu + sd * (col - col.mean()) / col.std(ddof=1)
        out[:, m] = _largest_remainder_round(vals, int(round(mu * n_years)))
    entries = [(y, m + 1, int(out[i, m])) for i, y in enumerate(ys) for m in range(12)]
    return MonthlySeries.from_entries(entries, label)


def reported_baseline() -> MonthlyBaseline:
    """Published 2010-16 monthly means and SDs for Puerto Rico."""
    return MonthlyBaseline(
        tuple(float(v) for v in BASELINE_MU),
        tuple(float(v) for v in BASELINE_SIGMA),
        (7,) * 12,
        tuple(range(2010, 2017)),
    )


def observed_2017() -> MonthlySeries:
    return MonthlySeries.from_entries(
        [(2017, m + 1, c) for m, c in enumerate(OBSERVED_2017)], label="pr2017"
    )


def reconstructed_series(seed: int = 1, ar_coef: float = 0.6) -> MonthlySeries:
    """Moment-matched 2010-16 synthesis followed by the reported 2017 tallies."""
    base = synthesize_moment_matched(reported_baseline(), range(2010, 2017), seed, ar_coef=ar_coef)
    return MonthlySeries.from_entries(base.entries + observed_2017().entries, label=f"pr-synthetic-{seed}")


BUILTIN = {
    "pr2017": lambda seed=1: observed_2017(),
    "pr-synthetic": reconstructed_series,
}
