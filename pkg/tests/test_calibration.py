import json
import math

import numpy as np
import pytest

from apcss.calibration import (
    CalibrationChecksumError,
    CalibrationVersionError,
    FORMAT_VERSION,
    NullCalibration,
    calibrate_null,
    critical_value,
    load_calibration,
    p_value,
    save_calibration,
    shipped_calibration_path,
    _checksum,
    _payload,
)
from apcss.errors import CorruptCalibrationError
from apcss.model import AlignmentMethod, LayoutDims


def _stub(null_sample, e0=0.0, v0=1.0):
    sample = np.asarray(null_sample, dtype=np.float64)
    return NullCalibration(
        dims=LayoutDims(2, 2, 1),
        method=AlignmentMethod.AVERAGE,
        e0_crad=e0,
        v0_crad=v0,
        e0_rcad=e0,
        v0_rcad=v0,
        null_sample=sample,
        n_phase1=max(len(sample), 2),
        n_phase2=len(sample),
        seed=0,
    )


def test_critical_value_order_statistic_examples():
    cal = _stub(np.arange(1.0, 101.0))
    assert critical_value(cal, 0.05) == 95.0
    # ceil(0.9 * 100) must be exactly 90, immune to float rounding
    assert critical_value(cal, 0.1) == 90.0
    assert critical_value(cal, 0.01) == 99.0
    two = _stub([4.0, 7.0])
    assert critical_value(two, 0.5) == 4.0


def test_critical_value_alpha_validation():
    cal = _stub(np.arange(1.0, 11.0))
    for bad in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            critical_value(cal, bad)


def test_critical_value_monotone_in_alpha():
    rng = np.random.default_rng(40)
    cal = _stub(np.sort(rng.standard_normal(500)))
    grid = (0.01, 0.05, 0.1, 0.25, 0.5, 0.9)
    crits = [critical_value(cal, a) for a in grid]
    assert crits == sorted(crits, reverse=True)


def test_p_value_examples():
    cal = _stub(np.arange(1.0, 101.0))
    assert p_value(cal, 0.5) == 1.0  # below every null value
    assert p_value(cal, 1000.0) == 1 / 101  # above every null value
    assert p_value(cal, 100.0) == 2 / 101  # ties counted via >=


def test_p_value_at_critical_value_is_level_consistent():
    # With distinct sample values, the critical value is the m-th order
    # statistic for m = ceil((1-alpha)n), so exactly n-m+1 values sit at or
    # above it and p = (n-m+2)/(n+1).  Bounding m on both sides pins p into
    # (alpha, (alpha*n + 2)/(n+1)]: never nominally significant at the
    # threshold itself, yet within two sample steps of alpha.
    rng = np.random.default_rng(41)
    cal = _stub(np.sort(rng.standard_normal(1000)))
    n = cal.n_phase2
    for alpha in (0.01, 0.05, 0.1):
        p = p_value(cal, critical_value(cal, alpha))
        assert alpha < p <= (alpha * n + 2) / (n + 1)


def test_null_calibration_invariant_gates():
    with pytest.raises(CorruptCalibrationError):
        _stub(np.arange(1.0, 11.0), v0=0.0)
    with pytest.raises(CorruptCalibrationError):
        _stub([3.0, 2.0, 1.0])  # not sorted
    with pytest.raises(CorruptCalibrationError):
        _stub([1.0, np.inf])
    with pytest.raises(CorruptCalibrationError):
        NullCalibration(
            dims=LayoutDims(2, 2, 1),
            method=AlignmentMethod.AVERAGE,
            e0_crad=0.0,
            v0_crad=1.0,
            e0_rcad=0.0,
            v0_rcad=1.0,
            null_sample=np.array([1.0, 2.0, 3.0]),
            n_phase1=2,
            n_phase2=7,  # declared length disagrees with the sample
            seed=0,
        )


def test_calibrate_null_is_deterministic():
    dims = LayoutDims(2, 2, 2)
    a = calibrate_null(dims, AlignmentMethod.AVERAGE, 1000, 1000, seed=123)
    b = calibrate_null(dims, AlignmentMethod.AVERAGE, 1000, 1000, seed=123)
    assert (a.e0_crad, a.v0_crad, a.e0_rcad, a.v0_rcad) == (
        b.e0_crad,
        b.v0_crad,
        b.e0_rcad,
        b.v0_rcad,
    )
    np.testing.assert_array_equal(a.null_sample, b.null_sample)
    c = calibrate_null(dims, AlignmentMethod.AVERAGE, 1000, 1000, seed=321)
    assert not np.array_equal(a.null_sample, c.null_sample)


def test_calibrate_null_is_worker_count_independent():
    dims = LayoutDims(3, 3, 2)
    # spans several chunks so the parallel path actually splits work
    one = calibrate_null(dims, AlignmentMethod.MEDIAN, 3000, 3000, seed=9, workers=1)
    two = calibrate_null(dims, AlignmentMethod.MEDIAN, 3000, 3000, seed=9, workers=2)
    assert (one.e0_crad, one.v0_crad, one.e0_rcad, one.v0_rcad) == (
        two.e0_crad,
        two.v0_crad,
        two.e0_rcad,
        two.v0_rcad,
    )
    np.testing.assert_array_equal(one.null_sample, two.null_sample)


def test_calibrate_null_argument_validation():
    dims = LayoutDims(2, 2, 1)
    with pytest.raises(ValueError):
        calibrate_null(dims, AlignmentMethod.AVERAGE, 1, 10, seed=0)
    with pytest.raises(ValueError):
        calibrate_null(dims, AlignmentMethod.AVERAGE, 10, 1, seed=0)
    with pytest.raises(ValueError):
        calibrate_null(dims, AlignmentMethod.AVERAGE, 10, 10, seed=-1)
    with pytest.raises(ValueError):
        calibrate_null(dims, AlignmentMethod.AVERAGE, 10, 10, seed=2**64)
    with pytest.raises(ValueError):
        calibrate_null(dims, AlignmentMethod.AVERAGE, 10, 10, seed=0, workers=0)


def test_calibrate_null_refuses_degenerate_layout():
    # With two rows and one replicate, column alignment forces the second
    # row to mirror the first, so the crossed dispersion is the same for
    # every continuous table and its null variance is exactly zero.
    with pytest.raises(CorruptCalibrationError):
        calibrate_null(LayoutDims(2, 2, 1), AlignmentMethod.AVERAGE, 100, 100, seed=0)


def test_calibration_moments_match_phase1_sample():
    # E0/V0 are the plain mean and n-1 variance of the phase-1 dispersions.
    from apcss.calibration import _null_dispersions

    dims = LayoutDims(3, 3, 2)
    cal = calibrate_null(dims, AlignmentMethod.AVERAGE, 500, 500, seed=77)
    phase1 = _null_dispersions(dims, AlignmentMethod.AVERAGE, 77, 0, 500, workers=1)
    assert cal.e0_crad == float(phase1[:, 0].mean())
    assert cal.v0_crad == float(phase1[:, 0].var(ddof=1))
    assert cal.e0_rcad == float(phase1[:, 1].mean())
    assert cal.v0_rcad == float(phase1[:, 1].var(ddof=1))


def test_save_load_round_trip_is_bit_identical(tmp_path):
    cal = calibrate_null(LayoutDims(2, 3, 2), AlignmentMethod.MEDIAN, 200, 200, seed=5)
    path = tmp_path / "cal.json"
    save_calibration(cal, path)
    loaded = load_calibration(path)
    assert loaded.dims == cal.dims
    assert loaded.method is cal.method
    assert loaded.e0_crad == cal.e0_crad
    assert loaded.v0_crad == cal.v0_crad
    assert loaded.e0_rcad == cal.e0_rcad
    assert loaded.v0_rcad == cal.v0_rcad
    assert loaded.n_phase1 == cal.n_phase1
    assert loaded.n_phase2 == cal.n_phase2
    assert loaded.seed == cal.seed
    np.testing.assert_array_equal(loaded.null_sample, cal.null_sample)


def test_save_is_byte_identical_across_runs(tmp_path):
    cal = calibrate_null(LayoutDims(2, 2, 2), AlignmentMethod.AVERAGE, 100, 100, seed=3)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_calibration(cal, p1)
    save_calibration(cal, p2)
    assert p1.read_bytes() == p2.read_bytes()


def _tamper(path, mutate):
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def _tamper_rechecksum(path, mutate):
    doc = json.loads(path.read_text())
    del doc["checksum"]
    mutate(doc)
    doc["checksum"] = _checksum(doc)
    path.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))


@pytest.fixture()
def saved_calibration(tmp_path):
    cal = calibrate_null(LayoutDims(2, 2, 2), AlignmentMethod.AVERAGE, 100, 100, seed=8)
    path = tmp_path / "cal.json"
    save_calibration(cal, path)
    return path


def test_load_rejects_tampered_payload(saved_calibration):
    _tamper(saved_calibration, lambda d: d.update(e0_crad=d["e0_crad"] + 1e-9))
    with pytest.raises(CalibrationChecksumError):
        load_calibration(saved_calibration)


def test_load_rejects_truncated_file(saved_calibration):
    text = saved_calibration.read_text()
    saved_calibration.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptCalibrationError):
        load_calibration(saved_calibration)


def test_load_rejects_unknown_version(saved_calibration):
    _tamper_rechecksum(
        saved_calibration, lambda d: d.update(format_version=FORMAT_VERSION + 1)
    )
    with pytest.raises(CalibrationVersionError):
        load_calibration(saved_calibration)


def test_load_rejects_wrong_format_marker(saved_calibration):
    _tamper_rechecksum(saved_calibration, lambda d: d.update(format="something-else"))
    with pytest.raises(CorruptCalibrationError):
        load_calibration(saved_calibration)


def test_load_rejects_invariant_violations_with_valid_checksum(saved_calibration):
    _tamper_rechecksum(saved_calibration, lambda d: d.update(v0_crad=0.0))
    with pytest.raises(CorruptCalibrationError):
        load_calibration(saved_calibration)


def test_load_rejects_sample_length_mismatch(saved_calibration):
    _tamper_rechecksum(
        saved_calibration, lambda d: d.update(n_phase2=d["n_phase2"] + 1)
    )
    with pytest.raises(CorruptCalibrationError):
        load_calibration(saved_calibration)


def test_load_rejects_missing_field(saved_calibration):
    def drop(d):
        del d["e0_rcad"]

    _tamper_rechecksum(saved_calibration, drop)
    with pytest.raises(CorruptCalibrationError):
        load_calibration(saved_calibration)


def test_load_rejects_non_json(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("definitely not json {")
    with pytest.raises(CorruptCalibrationError):
        load_calibration(path)
    path.write_text('["a", "list"]')
    with pytest.raises(CorruptCalibrationError):
        load_calibration(path)


def test_checksum_covers_every_payload_field(saved_calibration):
    doc = json.loads(saved_calibration.read_text())
    payload = {k: v for k, v in doc.items() if k != "checksum"}
    assert doc["checksum"] == _checksum(payload)
    payload["seed"] += 1
    assert doc["checksum"] != _checksum(payload)


def test_payload_round_trips_reals_exactly():
    cal = calibrate_null(LayoutDims(2, 2, 2), AlignmentMethod.AVERAGE, 50, 50, seed=2)
    payload = _payload(cal)
    again = json.loads(json.dumps(payload))
    assert again["e0_crad"] == cal.e0_crad
    assert again["v0_crad"] == cal.v0_crad
    assert np.array_equal(np.asarray(again["null_sample"]), cal.null_sample)


def test_symmetric_layout_null_moments_agree():
    # For I = J the two orientations are exchangeable under the null, so
    # the estimated moments differ only by Monte Carlo noise.
    n = 4000
    from apcss.calibration import _null_dispersions

    disp = _null_dispersions(
        LayoutDims(3, 3, 2), AlignmentMethod.AVERAGE, 13, 0, n, workers=1
    )
    crad, rcad = disp[:, 0], disp[:, 1]
    se_mean = math.sqrt(max(crad.var(ddof=1), rcad.var(ddof=1)) / n)
    assert abs(crad.mean() - rcad.mean()) <= 3 * math.sqrt(2) * se_mean
    m4 = max(((crad - crad.mean()) ** 4).mean(), ((rcad - rcad.mean()) ** 4).mean())
    v = max(crad.var(ddof=1), rcad.var(ddof=1))
    se_var = math.sqrt(max(m4 - v * v, 0.0) / n)
    assert abs(crad.var(ddof=1) - rcad.var(ddof=1)) <= 3 * math.sqrt(2) * se_var


def test_shipped_calibration_path_for_unknown_layout():
    with pytest.raises(FileNotFoundError):
        shipped_calibration_path(LayoutDims(6, 6, 5), AlignmentMethod.MEDIAN)


def test_shipped_calibrations_load_and_validate():
    for I, J, K in ((3, 3, 3), (3, 4, 2), (4, 4, 2)):
        for method in AlignmentMethod:
            path = shipped_calibration_path(LayoutDims(I, J, K), method)
            cal = load_calibration(path)
            assert cal.dims == LayoutDims(I, J, K)
            assert cal.method is method
            assert cal.n_phase1 == 100_000
            assert cal.n_phase2 == 100_000
