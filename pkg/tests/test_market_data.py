from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frmkit.errors import (
    BadDate,
    BadNumber,
    DuplicateDate,
    InsufficientOverlap,
    MissingColumn,
    MissingInput,
    NonPositivePrice,
    NotEnoughInstitutions,
)
from frmkit.market_data import (
    PriceSeries,
    ReturnPanel,
    WindowSpec,
    attach_market_caps,
    build_panel,
    load_csv,
    load_panel,
    select_top_j,
    windows,
)


def write(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")
    return path


def days(start, n):
    return np.datetime64(start, "D") + np.arange(n)


def panel_from(prices: dict, caps: dict | None = None, macros: dict | None = None, dates=None):
    dates = days("2020-01-01", len(next(iter(prices.values())))) if dates is None else dates
    caps = caps or {t: np.ones(len(dates)) for t in prices}
    series = [PriceSeries(t, dates, np.asarray(p, float), np.asarray(caps[t], float)) for t, p in prices.items()]
    macros = macros or {}
    series += [PriceSeries(m, v[0], np.asarray(v[1], float)) for m, v in macros.items()]
    return build_panel(series, list(macros))


def bare_panel(T, caps_row, names=None):
    J = len(caps_row)
    names = names or tuple(f"T{k}" for k in range(J))
    return ReturnPanel(days("2020-01-01", T), tuple(names), (), np.zeros((T, J)), np.tile(caps_row, (T, 1)))


def test_three_row_file(tmp_path):
    f = write(tmp_path / "p.csv", ("date", "ticker", "price"),
              [("2020-01-02", "A", 10), ("2020-01-03", "A", 11), ("2020-01-06", "A", 12)])
    (s,) = load_csv(f, "prices")
    assert s.ticker == "A" and len(s) == 3
    assert list(s.prices) == [10.0, 11.0, 12.0]


def test_zero_price_row_two(tmp_path):
    f = write(tmp_path / "p.csv", ("date", "ticker", "price"),
              [("2020-01-02", "A", 10), ("2020-01-03", "A", 0), ("2020-01-06", "A", 12)])
    with pytest.raises(NonPositivePrice) as err:
        load_csv(f, "prices")
    assert err.value.row == 2


def test_interleaved_tickers_are_split_and_sorted(tmp_path):
    rows = [("2020-01-03", "B", 2), ("2020-01-02", "A", 1), ("2020-01-02", "B", 3), ("2020-01-03", "A", 4)]
    a, b = load_csv(write(tmp_path / "p.csv", ("date", "ticker", "price"), rows), "prices")
    assert (a.ticker, b.ticker) == ("A", "B")
    assert list(a.dates.astype(str)) == ["2020-01-02", "2020-01-03"]
    assert list(a.prices) == [1.0, 4.0] and list(b.prices) == [3.0, 2.0]


@pytest.mark.parametrize("rows, exc, row", [
    ([("2020-13-01", "A", 1)], BadDate, 1),
    ([("2020-01-02", "A", "x")], BadNumber, 1),
    ([("2020-01-02", "A", 1), ("2020-01-02", "A", 2)], DuplicateDate, 2),
])
def test_row_errors(tmp_path, rows, exc, row):
    with pytest.raises(exc) as err:
        load_csv(write(tmp_path / "p.csv", ("date", "ticker", "price"), rows), "prices")
    assert err.value.row == row


def test_missing_file_and_column(tmp_path):
    with pytest.raises(MissingInput):
        load_csv(tmp_path / "nope.csv", "prices")
    with pytest.raises(MissingColumn):
        load_csv(write(tmp_path / "p.csv", ("date", "ticker"), [("2020-01-02", "A")]), "prices")


def test_macro_values_may_be_negative(tmp_path):
    (s,) = load_csv(write(tmp_path / "m.csv", ("date", "name", "value"), [("2020-01-02", "VIX", -0.5)]), "macros")
    assert s.prices[0] == -0.5


def test_constant_price_gives_zero_returns():
    p = panel_from({"A": [5.0] * 6, "B": [1, 2, 3, 4, 5, 6]})
    assert np.all(p.institution_returns[:, 0] == 0.0)


def test_log_return_closed_form():
    p = panel_from({"A": [100.0, 110.0]})
    assert p.institution_returns[0, 0] == pytest.approx(np.log(1.1), abs=1e-15)
    assert p.institution_returns[0, 0] == pytest.approx(0.09531, abs=1e-5)


def test_macro_gap_of_three_days_is_carried_forward():
    dates = days("2020-01-01", 20)
    keep = np.ones(20, bool)
    keep[7:10] = False
    mvals = np.arange(20, dtype=float)
    p = panel_from({"A": np.linspace(1, 2, 20)}, macros={"M": (dates[keep], mvals[keep])}, dates=dates)
    assert p.T == 19
    # row whose previous date is the last gap day uses the value before the gap
    row = list(p.dates).index(dates[10])
    assert p.macro_values[row, 0] == 6.0
    # and the macro column is the previous day's value elsewhere
    assert p.macro_values[0, 0] == 0.0


def test_stale_macro_drops_rows():
    dates = days("2020-01-01", 20)
    keep = np.ones(20, bool)
    keep[5:12] = False
    p = panel_from({"A": np.linspace(1, 2, 20)}, macros={"M": (dates[keep], np.arange(20.0)[keep])}, dates=dates)
    assert p.T < 19


def test_inner_join_on_dates():
    a = PriceSeries("A", days("2020-01-01", 5), np.arange(1.0, 6.0), np.ones(5))
    b = PriceSeries("B", days("2020-01-03", 5), np.arange(1.0, 6.0), np.ones(5))
    p = build_panel([a, b], [])
    assert p.T == 2 and p.institutions == ("A", "B")


def test_attach_market_caps_inner_joins():
    d = days("2020-01-01", 4)
    (s,) = attach_market_caps([PriceSeries("A", d, np.ones(4))], [PriceSeries("A", d[1:], np.full(3, 7.0))])
    assert len(s) == 3 and np.all(s.market_caps == 7.0)


def test_top_j_by_caps():
    p = bare_panel(5, [5.0, 9.0, 1.0])
    assert select_top_j(p, 0, WindowSpec(length_n=3, top_j=2)) == [0, 1]


def test_top_j_tie_goes_to_smaller_ticker():
    # WindowSpec requires top_j >= 2, so the single-pick tie rule is checked with a bare spec
    p = bare_panel(5, [7.0, 7.0], names=("B", "A"))
    assert select_top_j(p, 0, SimpleNamespace(length_n=3, top_j=1)) == [1]
    p = bare_panel(5, [7.0, 7.0, 7.0], names=("C", "B", "A"))
    assert select_top_j(p, 0, WindowSpec(length_n=3, top_j=2)) == [1, 2]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=3, max_size=8), st.randoms(use_true_random=False))
def test_top_j_ignores_input_order(caps, rnd):
    names = [f"T{k}" for k in range(len(caps))]
    perm = list(range(len(caps)))
    rnd.shuffle(perm)
    spec = WindowSpec(length_n=3, top_j=2)
    a = select_top_j(bare_panel(4, np.array(caps, float), names), 0, spec)
    b = select_top_j(bare_panel(4, np.array(caps, float)[perm], [names[k] for k in perm]), 0, spec)
    assert {names[k] for k in a} == {names[perm[k]] for k in b}


def test_top_j_uses_window_start_caps():
    T = 6
    caps = np.tile([5.0, 9.0, 1.0], (T, 1))
    caps[3:, 2] = 100.0  # crossover inside the window
    p = ReturnPanel(days("2020-01-01", T), ("A", "B", "C"), (), np.zeros((T, 3)), caps)
    assert select_top_j(p, 0, WindowSpec(length_n=5, top_j=2)) == [0, 1]
    assert select_top_j(p, 1, WindowSpec(length_n=5, top_j=2)) == [0, 1]


def test_top_j_errors():
    p = bare_panel(5, [1.0, 2.0])
    with pytest.raises(NotEnoughInstitutions):
        select_top_j(p, 0, WindowSpec(length_n=3, top_j=3))
    with pytest.raises(ValueError):
        select_top_j(p, 4, WindowSpec(length_n=3, top_j=2))


@pytest.mark.parametrize("T, count", [(63, 1), (65, 3)])
def test_window_count(T, count):
    assert len(list(windows(bare_panel(T, [1.0, 2.0]), WindowSpec()))) == count


def test_window_rows_are_stride_one():
    ws = list(windows(bare_panel(65, [1.0, 2.0]), WindowSpec()))
    s, rows = ws[2]
    # 1-based rows 3..65 are 0-based 2..64
    assert s == 2 and rows[0] == 2 and rows[-1] == 64


@settings(max_examples=30, deadline=None)
@given(T=st.integers(2, 200), n=st.integers(2, 80))
def test_window_count_property(T, n):
    p = bare_panel(T, [1.0, 2.0])
    spec = WindowSpec(length_n=n)
    if T < n:
        with pytest.raises(ValueError):
            list(windows(p, spec))
    else:
        assert len(list(windows(p, spec))) == T - n + 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=30))
def test_returns_telescope(prices):
    p = panel_from({"A": prices})
    assert p.institution_returns[:, 0].sum() == pytest.approx(np.log(prices[-1] / prices[0]), abs=1e-9)


def test_window_spec_validation():
    with pytest.raises(ValueError):
        WindowSpec(length_n=1)
    with pytest.raises(ValueError):
        WindowSpec(tau=1.0)


def test_too_short_panel():
    with pytest.raises(InsufficientOverlap):
        panel_from({"A": [1.0]})


def test_load_panel_files(tmp_path):
    d = ["2020-01-02", "2020-01-03", "2020-01-06", "2020-01-07"]
    prices = write(tmp_path / "p.csv", ("date", "ticker", "price"),
                   [(x, t, v) for x, v in zip(d, [1, 2, 3, 4]) for t in ("A", "B")])
    caps = write(tmp_path / "c.csv", ("date", "ticker", "market_cap"), [(x, t, 10) for x in d for t in ("A", "B")])
    macros = write(tmp_path / "m.csv", ("date", "name", "value"), [(x, "VIX", k) for k, x in enumerate(d)])
    p = load_panel(prices, caps, macros)
    assert p.institutions == ("A", "B") and p.macros == ("VIX",) and p.T == 3
    assert list(p.macro_values[:, 0]) == [0.0, 1.0, 2.0]
