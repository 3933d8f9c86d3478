"""Channel parsing: strict headers, line-level rejection, stable time sort,
outlier flagging, and the CSV round trip."""

import numpy as np
import pytest

from satml import ingest
from satml.ingest import (ChannelKind, OutlierRule, SchemaError,
                          default_outlier_rules, flag_outliers, parse_channel,
                          write_channel)

SAA_HEADER = "ut_ms,sa,sx,sy,sz"


def saa_bytes(rows):
    return ("\n".join([SAA_HEADER] + rows) + "\n").encode()


class TestHeaders:
    def test_empty_stream_fatal(self):
        with pytest.raises(SchemaError):
            parse_channel(ChannelKind.SAA, b"")

    def test_wrong_header_fatal(self):
        with pytest.raises(SchemaError):
            parse_channel(ChannelKind.SAA, b"ut_ms,alpha,sx,sy,sz\n")

    def test_pw_header_defines_columns(self):
        data = b"ut_ms,NPWD2500,NPWD2881\n1000,0.5,0.25\n"
        table, report = parse_channel(ChannelKind.PW, data)
        assert table.column_names == ["ut_ms", "NPWD2500", "NPWD2881"]
        assert report.accepted == 1
        assert table.columns["NPWD2881"][0] == 0.25

    def test_pw_bad_column_name_fatal(self):
        with pytest.raises(SchemaError):
            parse_channel(ChannelKind.PW, b"ut_ms,NPWD25,NPWD2881\n")

    def test_pw_must_start_with_time(self):
        with pytest.raises(SchemaError):
            parse_channel(ChannelKind.PW, b"NPWD2500,ut_ms\n")


class TestRowRejection:
    def test_arity_rejected_with_line_number(self):
        data = saa_bytes(["1000,1,2,3,4", "2000,1,2,3", "3000,4,3,2,1"])
        table, report = parse_channel(ChannelKind.SAA, data)
        assert report.accepted == 2
        assert report.rejected == 1
        assert (3, "arity") in report.rejection_reasons
        assert table.n_rows == 2

    def test_type_rejected(self):
        data = saa_bytes(["1000,one,2,3,4", "2000,1,2,3,4"])
        table, report = parse_channel(ChannelKind.SAA, data)
        assert report.rejected == 1
        assert report.rejection_reasons == [(2, "type")]

    def test_nan_token_rejected(self):
        data = saa_bytes(["1000,nan,2,3,4"])
        _, report = parse_channel(ChannelKind.SAA, data)
        assert report.rejected == 1

    def test_eclipse_enum_rejected(self):
        data = b"rev,event,enter_ms,exit_ms\n1,mars_umbra,10,20\n1,earth_umbra,10,20\n"
        table, report = parse_channel(ChannelKind.ECLIPSE, data)
        assert report.accepted == 1
        assert report.rejection_reasons == [(2, "enum")]

    def test_accepted_plus_rejected_counts_all_data_lines(self):
        rows = ["1000,1,2,3,4", "bad", "2000,x,2,3,4", "3000,1,2,3,4"]
        _, report = parse_channel(ChannelKind.SAA, saa_bytes(rows))
        assert report.accepted + report.rejected == len(rows)

    def test_blank_lines_ignored(self):
        data = saa_bytes(["1000,1,2,3,4", "", "2000,1,2,3,4"])
        _, report = parse_channel(ChannelKind.SAA, data)
        assert report.accepted == 2
        assert report.rejected == 0


class TestSorting:
    def test_rows_sorted_by_time(self):
        data = saa_bytes(["3000,3,3,3,3", "1000,1,1,1,1", "2000,2,2,2,2"])
        table, _ = parse_channel(ChannelKind.SAA, data)
        assert list(table.columns["ut_ms"]) == [1000, 2000, 3000]
        assert list(table.columns["sa"]) == [1.0, 2.0, 3.0]

    def test_sort_is_stable_for_equal_times(self):
        data = saa_bytes(["1000,1,0,0,0", "500,9,0,0,0", "1000,2,0,0,0"])
        table, _ = parse_channel(ChannelKind.SAA, data)
        assert list(table.columns["sa"]) == [9.0, 1.0, 2.0]

    def test_ftl_sorts_on_interval_start(self):
        data = b"utb_ms,ute_ms,pointing\n500,900,NADIR\n100,400,EARTH\n"
        table, _ = parse_channel(ChannelKind.FTL, data)
        assert list(table.columns["utb_ms"]) == [100, 500]
        assert list(table.columns["pointing"]) == ["EARTH", "NADIR"]


class TestRoundTrip:
    def test_write_then_parse_identical(self, mex_tables):
        for table in mex_tables:
            data = write_channel(table)
            back, report = parse_channel(table.kind, data)
            assert report.rejected == 0
            assert back.column_names == table.column_names
            for name in table.column_names:
                a, b = table.columns[name], back.columns[name]
                if a.dtype == object:
                    assert list(a) == list(b)
                else:
                    np.testing.assert_array_equal(a, b)

    def test_float_repr_roundtrip_is_exact(self):
        vals = np.array([0.1, 1 / 3, 1e-17, 12345.678901234567])
        table = ingest.RawTable(ChannelKind.IREM, {
            "ut_ms": np.arange(4, dtype=np.int64), "count_rate": vals})
        back, _ = parse_channel(ChannelKind.IREM, write_channel(table))
        np.testing.assert_array_equal(back.columns["count_rate"], vals)


class TestOutliers:
    def test_flag_does_not_delete(self):
        data = saa_bytes(["1000,400,2,3,4", "2000,10,2,3,4"])
        table, _ = parse_channel(ChannelKind.SAA, data)
        table, n = flag_outliers(table, OutlierRule("sa", 0.0, 360.0))
        assert n == 1
        assert table.n_rows == 2
        assert list(table.outlier_mask) == [True, False]
        assert table.clean().n_rows == 1

    def test_default_rules_pw_nonnegative(self):
        rules = default_outlier_rules(ChannelKind.PW, ["ut_ms", "NPWD2500"])
        assert len(rules) == 1
        assert rules[0].column == "NPWD2500"
        assert rules[0].low == 0.0

    def test_rule_on_text_column_rejected(self):
        data = b"ut_ms,command\n1000,AAAA1\n"
        table, _ = parse_channel(ChannelKind.DMOP, data)
        with pytest.raises(ValueError):
            flag_outliers(table, OutlierRule("command", 0.0))

    def test_rule_on_missing_column_rejected(self):
        table, _ = parse_channel(ChannelKind.IREM, b"ut_ms,count_rate\n1,2.0\n")
        with pytest.raises(ValueError):
            flag_outliers(table, OutlierRule("nope", 0.0))
