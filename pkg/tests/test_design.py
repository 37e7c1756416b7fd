import numpy as np
import pytest

from excessmort.design import ModelKind, ModelSpec, build_design, regressors
from excessmort.errors import InsufficientDataError, MissingPointError

from conftest import make_series


def test_columns_per_model():
    assert ModelSpec(1).columns() == ["intercept"]
    cols = ModelSpec(2).columns()
    assert len(cols) == 12 and cols[0] == "intercept" and "jan" not in cols
    assert ModelSpec(3).param_names()[-2:] == ["sigma", "rho"]
    assert ModelSpec(4).columns() == ["intercept", "lag", "hurricane", "dry"]


def test_invalid_model_kind():
    with pytest.raises(ValueError):
        ModelSpec(5)


def test_spec_round_trip():
    for k in ModelKind:
        spec = ModelSpec(k)
        assert ModelSpec.from_dict(spec.to_dict()) == spec


def test_month_dummies_have_january_baseline():
    spec = ModelSpec(2)
    assert regressors(spec, 1).tolist() == [1.0] + [0.0] * 11
    row = regressors(spec, 9)
    assert row.sum() == 2.0 and row[spec.columns().index("sep")] == 1.0


def test_seasonal_indicators():
    spec = ModelSpec(4)
    assert regressors(spec, 6, lag=10).tolist() == [1, 10, 1, 0]
    assert regressors(spec, 12, lag=10).tolist() == [1, 10, 0, 1]
    assert regressors(spec, 4, lag=10).tolist() == [1, 10, 0, 0]
    assert regressors(spec, 3, lag=10).tolist() == [1, 10, 0, 1]
    with pytest.raises(MissingPointError):
        regressors(spec, 3)


def test_row_counts(baseline_series):
    assert len(build_design(baseline_series, ModelSpec(3))) == 84
    d4 = build_design(baseline_series, ModelSpec(4))
    assert len(d4) == 83
    assert d4.time_index[0] == (2010, 2)
    assert d4.X[0, 1] == baseline_series.get(2010, 1)


def test_year_restriction(series):
    d = build_design(series, ModelSpec(2), years=range(2010, 2017))
    assert len(d) == 84 and all(y < 2017 for y, _ in d.time_index)


def test_exclusion_creates_segment_break(baseline_series):
    d = build_design(baseline_series, ModelSpec(3), exclude=[(2014, 10)])
    assert len(d) == 83
    starts = np.flatnonzero(d.segment_starts)
    assert starts.tolist() == [0, d.time_index.index((2014, 11))]


def test_dynamic_model_drops_row_after_exclusion(baseline_series):
    d = build_design(baseline_series, ModelSpec(4), exclude=[(2014, 10)])
    assert (2014, 10) not in d.time_index and (2014, 11) not in d.time_index
    assert len(d) == 81


def test_gap_between_fit_years():
    s = make_series(range(1000, 1036))
    d = build_design(s, ModelSpec(3), years=[2010, 2012])
    assert np.flatnonzero(d.segment_starts).tolist() == [0, 12]


def test_exclusion_of_unknown_point(baseline_series):
    with pytest.raises(MissingPointError):
        build_design(baseline_series, ModelSpec(2), exclude=[(2020, 1)])


def test_too_few_rows():
    s = make_series([1000] * 12)
    with pytest.raises(InsufficientDataError):
        build_design(s, ModelSpec(2))


def test_design_is_read_only(baseline_series):
    d = build_design(baseline_series, ModelSpec(2))
    with pytest.raises(ValueError):
        d.y[0] = 0.0
