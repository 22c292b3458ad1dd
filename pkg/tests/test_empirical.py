import numpy as np
import pytest

from tipcast.empirical import (EmpiricalRecord, IngestError, export_record,
                               load_record, window_record)


@pytest.fixture
def cyan_csv(tmp_path):
    """Synthetic cyanobacteria-like record: irradiance stepping 23 units/day
    from 477, sampled every 0.0035 day."""
    t = np.arange(0.0, 28.0, 0.0035)
    irr = 477.0 + 23.0 * np.floor(t)
    state = 2.0 + 0.002 * irr + 0.01 * np.sin(t * 40.0)
    path = tmp_path / "cyan.csv"
    with open(path, "w") as fh:
        fh.write("irradiance,attenuation\n")
        for p, s in zip(irr, state):
            fh.write("%.17g,%.17g\n" % (p, s))
    return path


def test_load_well_formed(cyan_csv):
    rec = load_record(cyan_csv, "irradiance", "attenuation",
                      sort_by_param=True)
    assert len(rec.param) == len(rec.state)
    assert rec.param[0] <= rec.param[-1]


def test_missing_column(cyan_csv):
    with pytest.raises(IngestError, match="voltage"):
        load_record(cyan_csv, "voltage", "attenuation")


def test_nan_cell_named(tmp_path):
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("p,s\n")
        for i in range(600):
            fh.write(f"{i},{'NaN' if i == 37 else 1.0}\n")
    with pytest.raises(IngestError, match="row 39"):
        load_record(path, "p", "s")


def test_non_numeric_cell(tmp_path):
    path = tmp_path / "bad2.csv"
    with open(path, "w") as fh:
        fh.write("p,s\n")
        for i in range(600):
            fh.write(f"{i},{'oops' if i == 10 else 2.0}\n")
    with pytest.raises(IngestError, match="'s'"):
        load_record(path, "p", "s")


def test_too_few_rows(tmp_path):
    path = tmp_path / "short.csv"
    with open(path, "w") as fh:
        fh.write("p,s\n")
        for i in range(100):
            fh.write(f"{i},1.0\n")
    with pytest.raises(IngestError, match="500"):
        load_record(path, "p", "s")


def test_decreasing_direction(tmp_path):
    path = tmp_path / "age.csv"
    ages = np.linspace(160.0, 125.0, 1147)
    with open(path, "w") as fh:
        fh.write("age,mo\n")
        for a in ages:
            fh.write("%.17g,%.17g\n" % (a, 1.0 + 0.01 * a))
    rec = load_record(path, "age", "mo", direction="decreasing")
    assert np.all(np.diff(rec.param) < 0)


def test_roundtrip_bit_exact(cyan_csv, tmp_path):
    rec = load_record(cyan_csv, "irradiance", "attenuation",
                      sort_by_param=True)
    out = tmp_path / "echo.csv"
    export_record(rec, out)
    rec2 = load_record(out, "param", "state")
    assert np.array_equal(rec.param, rec2.param)
    assert np.array_equal(rec.state, rec2.state)


class TestWindowRecord:
    def test_light_window_day_span(self, cyan_csv):
        # irradiance 477..845 covers days 1..16 of the stepping protocol
        rec = load_record(cyan_csv, "irradiance", "attenuation",
                          sort_by_param=True)
        rng = np.random.default_rng(0)
        inst, mu_seq, state_seq = window_record(rec, 477.0, 845.0, rng=rng)
        assert len(mu_seq) == 400
        assert mu_seq.min() >= 477.0 and mu_seq.max() <= 845.0
        assert np.sum(inst.residual[:100] != 0.0) == 0  # 100-slot pad
        assert inst.mu_norm[-1] == 1.0

    def test_window_outside_range(self, cyan_csv):
        rec = load_record(cyan_csv, "irradiance", "attenuation",
                          sort_by_param=True)
        with pytest.raises(IngestError):
            window_record(rec, 100.0, 845.0, rng=np.random.default_rng(0))

    def test_fewer_points_uses_all(self):
        param = np.linspace(0.0, 1.0, 600)
        rec = EmpiricalRecord(param=param, state=np.sin(param * 9))
        inst, mu_seq, _ = window_record(rec, 0.0, 0.5, n=400,
                                        rng=np.random.default_rng(1))
        assert len(mu_seq) == 300  # all points inside the half-range window

    def test_truth_hint_normalizes_label(self):
        param = np.linspace(0.0, 1.0, 600)
        rec = EmpiricalRecord(param=param, state=np.cos(param * 7))
        inst, mu_seq, _ = window_record(rec, 0.0, 0.5, n=400,
                                        rng=np.random.default_rng(2),
                                        mu_c_hint=0.75)
        expect = (0.75 - mu_seq[0]) / (mu_seq[-1] - mu_seq[0])
        assert inst.label_norm == pytest.approx(expect, rel=1e-12)

    def test_no_hint_gives_nan_label(self):
        param = np.linspace(0.0, 1.0, 600)
        rec = EmpiricalRecord(param=param, state=np.cos(param * 7))
        inst, _, _ = window_record(rec, 0.0, 0.5, n=400,
                                   rng=np.random.default_rng(3))
        assert np.isnan(inst.label_norm)
