"""Smoke tests for the geosafety Python extension."""

import csv
import math
from pathlib import Path

import numpy as np
import pytest

import geosafety

ROOT = Path(__file__).resolve().parents[2]
FIXTURE = ROOT / "data" / "fixture"


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_haversine_quarter_meridian():
    assert geosafety.haversine(0.0, 0.0, 90.0, 0.0) == pytest.approx(math.pi / 2 * geosafety.EARTH_RADIUS_M, rel=1e-12)
    assert geosafety.haversine(-1.3, 36.8, -1.3, 36.8) == 0.0


def test_extract_features_matches_fixture_oracle():
    locations = read_rows(FIXTURE / "locations.csv")
    expected = read_rows(FIXTURE / "features_expected.csv")
    points = [(float(r["lat"]), float(r["lon"])) for r in locations]
    got = geosafety.extract_features(str(FIXTURE / "settlement.osm"), points, threads=2)
    assert got.shape == (len(points), 6)
    want = np.array([[int(r[c]) for c in geosafety.FEATURE_COLUMNS] for r in expected])
    np.testing.assert_array_equal(got, want)


def test_extract_features_errors():
    with pytest.raises(geosafety.GeosafetyError, match="IoError"):
        geosafety.extract_features("/nonexistent.osm", [(0.0, 0.0)])
    with pytest.raises(geosafety.GeosafetyError, match="ConfigError"):
        geosafety.extract_features(str(FIXTURE / "settlement.osm"), [(0.0, 0.0)], radii={"pubs": 1.0})


def test_fit_lmm_recovers_planted_effects():
    rng = np.random.default_rng(3)
    groups = np.repeat(np.arange(40), 25)
    x = rng.normal(size=groups.size)
    X = np.column_stack([np.ones_like(x), x])
    y = 2.0 - 1.5 * x + rng.normal(0.0, 1.0, 40)[groups] + rng.normal(0.0, 0.5, groups.size)
    fit = geosafety.fit_lmm(X, y, groups.tolist(), ["(Intercept)", "x"])
    assert fit["converged"]
    assert fit["names"] == ["(Intercept)", "x"]
    assert fit["beta"][1] == pytest.approx(-1.5, abs=0.1)
    assert fit["sigma_e2"] == pytest.approx(0.25, rel=0.2)
    assert fit["sigma_u2"] > 0.3
    with pytest.raises(geosafety.GeosafetyError):
        geosafety.fit_lmm(X, y[:-1], groups.tolist())


def test_resample_and_intervals():
    p, l = geosafety.resample_two_way(35, 7, seed=1, stream=1)
    assert len(p) == 35 and len(l) == 7
    assert all(0 <= i < 35 for i in p) and all(0 <= j < 7 for j in l)
    assert (p, l) == geosafety.resample_two_way(35, 7, seed=1, stream=1)
    lo, hi = geosafety.percentile_interval([float(i) for i in range(101)], 0.9)
    assert (lo, hi) == pytest.approx((5.0, 95.0))


def test_quintiles_and_ols():
    rates = [0.1 * i for i in range(23)][::-1]
    groups = geosafety.quintile_groups(rates, [f"S{i:02d}" for i in range(23)])
    assert [len(g) for g in groups] == [5, 5, 5, 4, 4]
    assert sorted(i for g in groups for i in g) == list(range(23))
    D = np.arange(10.0).reshape(-1, 1)
    coef, fitted = geosafety.ols_baseline(D, 3.0 + 2.0 * D[:, 0])
    np.testing.assert_allclose(coef, [3.0, 2.0], atol=1e-10)
    np.testing.assert_allclose(fitted, 3.0 + 2.0 * D[:, 0], atol=1e-10)


def test_run_cli_extract(tmp_path):
    code, out, err = geosafety.run_cli(["extract", "--osm", str(FIXTURE / "settlement.osm"),
                                        "--locations", str(FIXTURE / "locations.csv"), "-o", str(tmp_path)])
    assert code == 0, err
    assert read_rows(tmp_path / "features.csv") == read_rows(FIXTURE / "features_expected.csv")
    code, _, err = geosafety.run_cli(["fit", "--osm", "/missing.osm"])
    assert code == 2
