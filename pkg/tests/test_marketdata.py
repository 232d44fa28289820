from datetime import date

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from vgfx.analytics import nrmse
from vgfx.errors import DuplicateQuote, EmptySeries, MissingStrike, ParseError
from vgfx.marketdata import (OptionChain, Quote, build_comparison, load_chain_csv,
                             load_rate_csv, load_results_csv)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestRates:
    def test_two_rows(self, tmp_path):
        s = load_rate_csv(write(tmp_path, "r.csv", "2021-05-25,0.05\n2021-05-26,0.06\n"), "dom")
        assert len(s) == 2 and s.values == (0.05, 0.06) and s.series_id == "dom"

    def test_missing_marker_dropped(self, tmp_path):
        s = load_rate_csv(write(tmp_path, "r.csv", "DATE,X\n2021-05-24,.\n2021-05-25,0.05\n"))
        assert s.dropped == 1 and len(s) == 1 and s.series_id == "X"

    def test_percent(self, tmp_path):
        s = load_rate_csv(write(tmp_path, "r.csv", "2021-05-25,5.24%\n"))
        assert s.values == (0.0524,) and s.percent_parsed

    def test_euro_fixture_last_value_negative(self, data_dir):
        s = load_rate_csv(data_dir / "EURONTD156N.csv")
        assert len(s) == 4 and s.dropped == 1
        assert s.dates[-1] == date(2021, 5, 26) and s.values[-1] < 0

    def test_other_fixtures(self, data_dir):
        usd = load_rate_csv(data_dir / "USDONTD156N.csv")
        fx = load_rate_csv(data_dir / "DEXUSEU.csv")
        assert all(v > 0 for v in usd.values) and 1.0 < min(fx.values) < max(fx.values) < 1.5

    def test_as_of(self, data_dir):
        s = load_rate_csv(data_dir / "USDONTD156N.csv")
        assert s.as_of(date(2021, 5, 24)) == 0.07663
        assert s.as_of("2021-06-30") == 0.07613
        with pytest.raises(EmptySeries):
            s.as_of(date(2020, 1, 1))

    def test_parse_error_line_number(self, tmp_path):
        p = write(tmp_path, "r.csv", "DATE,X\n2021-05-25,0.05\n2021-05-26,abc\n")
        with pytest.raises(ParseError) as err:
            load_rate_csv(p)
        assert err.value.line == 3

    def test_dates_must_increase(self, tmp_path):
        with pytest.raises(ParseError):
            load_rate_csv(write(tmp_path, "r.csv", "2021-05-26,0.05\n2021-05-25,0.06\n"))

    def test_lenient_dates(self, tmp_path):
        p = write(tmp_path, "r.csv", "05/25/2021,0.05\n")
        with pytest.raises(ParseError):
            load_rate_csv(p)
        assert load_rate_csv(p, lenient=True).dates == (date(2021, 5, 25),)

    def test_empty(self, tmp_path):
        with pytest.raises(EmptySeries):
            load_rate_csv(write(tmp_path, "r.csv", ""))
        with pytest.raises(EmptySeries):
            load_rate_csv(write(tmp_path, "r.csv", "DATE,X\n2021-01-01,.\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_rate_csv(tmp_path / "nope.csv")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-0.1, 0.2, allow_nan=False), min_size=1, max_size=30))
    def test_round_trip(self, tmp_path_factory, values):
        tmp = tmp_path_factory.mktemp("rt")
        text = "".join(f"2021-01-{i + 1:02d},{v!r}\n" for i, v in enumerate(values))
        s = load_rate_csv(write(tmp, "a.csv", text), "dom")
        again = load_rate_csv(write(tmp, "b.csv", s.to_csv()))
        assert again == s


class TestChain:
    def test_single_row(self, tmp_path):
        c = load_chain_csv(write(tmp_path, "c.csv",
                                 "expiry,strike,right,price\n2021-12-03,1.32,put,0.0947\n"))
        assert c.quotes == (Quote(date(2021, 12, 3), 1.32, "put", 0.0947),)

    def test_empty(self, tmp_path):
        with pytest.raises(EmptySeries):
            load_chain_csv(write(tmp_path, "c.csv", ""))
        with pytest.raises(EmptySeries):
            load_chain_csv(write(tmp_path, "c.csv", "expiry,strike,right,price\n"))

    def test_call_and_put_same_strike(self, tmp_path):
        c = load_chain_csv(write(tmp_path, "c.csv", "expiry,strike,right,price\n"
                                 "2021-12-03,1.3,put,0.1\n2021-12-03,1.3,call,0.2\n"))
        assert [q.right for q in c.quotes] == ["put", "call"]

    def test_duplicate(self, tmp_path):
        with pytest.raises(DuplicateQuote):
            load_chain_csv(write(tmp_path, "c.csv", "expiry,strike,right,price\n"
                                 "2021-12-03,1.3,put,0.1\n2021-12-03,1.3,P,0.2\n"))

    @pytest.mark.parametrize("row", ["2021-12-03,-1.3,put,0.1", "2021-12-03,1.3,swap,0.1",
                                     "2021-12-03,1.3,put", "2021-13-03,1.3,put,0.1",
                                     "2021-05-01,1.3,put,0.1"])
    def test_bad_rows(self, tmp_path, row):
        text = "# as_of: 2021-06-02\nexpiry,strike,right,price\n" + row + "\n"
        with pytest.raises(ParseError):
            load_chain_csv(write(tmp_path, "c.csv", text))

    def test_bad_header(self, tmp_path):
        with pytest.raises(ParseError):
            load_chain_csv(write(tmp_path, "c.csv", "strike,price\n1.3,0.1\n"))

    def test_fixture_metadata_and_order(self, data_dir):
        c = load_chain_csv(data_dir / "e6z21_puts.csv")
        assert c.as_of == date(2021, 6, 2) and c.underlying == "E6Z21"
        assert c.strikes == [float(k) for k, _, _ in oracles.E6Z21_LADDER]
        assert (c.quotes[0].expiry - c.as_of).days == 184

    def test_round_trip(self, data_dir, tmp_path):
        c = load_chain_csv(data_dir / "e6z21_puts.csv")
        assert load_chain_csv(write(tmp_path, "c.csv", c.to_csv())) == c

    def test_select(self, tmp_path):
        c = OptionChain((Quote(date(2021, 12, 3), 1.3, "put", 0.1),
                         Quote(date(2021, 12, 3), 1.3, "call", 0.2)))
        assert len(c.select(right="call")) == 1


class TestComparison:
    def test_single_strike(self):
        c = OptionChain((Quote(date(2021, 12, 3), 1.3, "put", 0.1),))
        q = build_comparison(c, {1.3: 0.11})
        assert q.strikes.tolist() == [1.3] and q.simulated.tolist() == [0.11]

    def test_fixture_nrmse(self, data_dir):
        chain = load_chain_csv(data_dir / "e6z21_puts.csv")
        results = load_results_csv(data_dir / "e6z21_model.csv")
        value = nrmse(build_comparison(chain, results))
        assert float(f"{value:.5g}") == oracles.E6Z21_NRMSE

    def test_missing_strike(self, data_dir):
        chain = load_chain_csv(data_dir / "e6z21_puts.csv")
        results = load_results_csv(data_dir / "e6z21_model.csv")
        del results[1.35]
        with pytest.raises(MissingStrike):
            build_comparison(chain, results)

    def test_results_style_filter(self, tmp_path):
        p = write(tmp_path, "r.csv", "strike,style,price\n1.3,american,0.2\n1.3,european,0.1\n")
        assert load_results_csv(p, "european") == {1.3: 0.1}
        with pytest.raises(DuplicateQuote):
            load_results_csv(p)
