"""Catalog/population CSV round trips and the plot-ready output formats."""

import numpy as np
import pytest

from volfied.files import (
    ADS_HEADER_PREFIX,
    METRICS_HEADER,
    SUMMARY_HEADER,
    atomic_write_text,
    load_ads_csv,
    load_poas_csv,
    load_profiles_csv,
    render_metrics_csv,
    render_summary_row,
    write_ads_csv,
    write_mapping_csv,
    write_poas_csv,
    write_profiles_csv,
)
from volfied.model import Ad, PoA, VehicleProfile
from volfied.sim import StepMetrics


def sample_ads():
    return [
        Ad(ad_id=1, features=np.array([0.25, 0.5]), base_value=0.75),
        Ad(ad_id=2, features=np.array([0.1, 0.2]), base_value=0.3, target_poa=4),
    ]


class TestAdsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ads.csv"
        write_ads_csv(path, sample_ads())
        back = load_ads_csv(path)
        assert [a.ad_id for a in back] == [1, 2]
        assert back[0].target_poa is None and back[1].target_poa == 4
        assert back[0].base_value == 0.75
        assert np.array_equal(back[1].features, np.array([0.1, 0.2]))

    def test_header_and_scope_layout(self, tmp_path):
        path = tmp_path / "ads.csv"
        write_ads_csv(path, sample_ads())
        lines = path.read_text().splitlines()
        assert lines[0] == "ad_id,f1,f2,base_value,scope,target_poa"
        assert lines[1].endswith(",G,")
        assert lines[2].endswith(",L,4")

    def test_malformed_row_reports_line(self, tmp_path):
        path = tmp_path / "ads.csv"
        path.write_text("ad_id,f1,base_value,scope,target_poa\n1,0.5,oops,G,\n")
        with pytest.raises(ValueError, match="line 2"):
            load_ads_csv(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "ads.csv"
        path.write_text("nope,f1\n")
        with pytest.raises(ValueError, match=ADS_HEADER_PREFIX):
            load_ads_csv(path)


class TestPoasCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "poas.csv"
        poas = [PoA(poa_id=0, x_m=100.0, y_m=200.0, range_m=150.0)]
        write_poas_csv(path, poas)
        assert path.read_text().splitlines()[0] == "poa_id,x_m,y_m,range_m"
        back = load_poas_csv(path)
        assert back == poas


class TestProfilesCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "profiles.csv"
        profiles = [VehicleProfile(vehicle_id=7, interests=np.array([0.5, 0.25, 1.0]))]
        write_profiles_csv(path, profiles)
        assert path.read_text().splitlines()[0] == "vehicle_id,f1,f2,f3"
        back = load_profiles_csv(path)
        assert back[0].vehicle_id == 7
        assert np.array_equal(back[0].interests, profiles[0].interests)


class TestMappingCsv:
    def test_layout(self, tmp_path):
        path = tmp_path / "mapping.csv"
        write_mapping_csv(path, [(3, 1, 0.02), (5, 2, 0.015)])
        lines = path.read_text().splitlines()
        assert lines[0] == "removed_ad_id,representative_ad_id,distance"
        assert lines[1] == "3,1,0.020000"


class TestMetricsRendering:
    def test_six_decimal_reals(self):
        rows = [
            StepMetrics(step=0, revenue_cum=1.0, impressions_cum=1,
                        avg_distance_cum=0.05, broadcasts_cum=2),
            StepMetrics(step=1, revenue_cum=2.5, impressions_cum=3,
                        avg_distance_cum=0.1234567, broadcasts_cum=4),
        ]
        text = render_metrics_csv("volfied", rows)
        lines = text.splitlines()
        assert lines[0] == METRICS_HEADER
        assert lines[1] == "0,volfied,1.000000,1,0.050000,2"
        assert lines[2] == "1,volfied,2.500000,3,0.123457,4"

    def test_summary_row_matches_last_metrics_row(self):
        last = StepMetrics(step=9, revenue_cum=12.5, impressions_cum=10,
                           avg_distance_cum=0.1, broadcasts_cum=40)
        row = render_summary_row("volfied", 3, "", last)
        assert SUMMARY_HEADER == (
            "strategy,seed,param_value,final_revenue,final_impressions,final_avg_distance"
        )
        assert row == "volfied,3,,12.500000,10,0.100000"
        metrics_line = render_metrics_csv("volfied", [last]).splitlines()[1]
        assert metrics_line.split(",")[2:5] == row.split(",")[3:]

    def test_summary_row_with_sweep_value(self):
        last = StepMetrics(step=0, revenue_cum=0.0, impressions_cum=0,
                           avg_distance_cum=0.0, broadcasts_cum=0)
        row = render_summary_row("topk", 1, "4", last)
        assert row == "topk,1,4,0.000000,0,0.000000"


class TestAtomicWrite:
    def test_writes_and_leaves_no_temp(self, tmp_path):
        target = tmp_path / "out.csv"
        atomic_write_text(target, "hello\n")
        assert target.read_text() == "hello\n"
        assert [p.name for p in tmp_path.iterdir()] == ["out.csv"]

    def test_overwrites_existing(self, tmp_path):
        target = tmp_path / "out.csv"
        target.write_text("old")
        atomic_write_text(target, "new")
        assert target.read_text() == "new"
