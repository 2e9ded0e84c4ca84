"""Tests for CSV/JSON writers and the convergence plot."""

import json

import pytest

from afem.exceptions import ValidationError
from afem.models.records import RUN_CSV_FIELDS, RateFit
from afem.services.export import format_csv, read_run_csv, write_json, write_run_csv
from afem.services.plotting import Series, plot_convergence
from tests.factories import make_record


def test_format_csv_blanks_missing_values():
    text = format_csv([{"a": 1, "b": None}], ["a", "b"])
    assert text == "a,b\n1,\n"


def test_run_csv_columns_and_values(tmp_path):
    records = [make_record(0, 100, 0.5, h1_err_sq=0.125, ref_h1_norm_sq=2.0), make_record(1, 180, 0.25)]
    path = tmp_path / "run.csv"
    write_run_csv(records, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(RUN_CSV_FIELDS)
    assert lines[2].split(",")[RUN_CSV_FIELDS.index("h1_err_sq")] == ""
    loaded = read_run_csv(path)
    assert [r.dofs for r in loaded] == [100, 180]
    assert loaded[0].h1_err_sq == 0.125
    assert loaded[1].h1_err_sq is None
    assert loaded[0].relative_error == pytest.approx(0.25)
    assert loaded[1].ref_h1_norm_sq is None


def test_read_run_csv_missing_column(tmp_path):
    path = tmp_path / "run.csv"
    path.write_text("k,dofs\n0,10\n", encoding="utf-8")
    with pytest.raises(ValidationError, match="lacks columns"):
        read_run_csv(path)


def test_read_run_csv_bad_row(tmp_path):
    path = tmp_path / "run.csv"
    write_run_csv([make_record(0, 100, 0.5)], path)
    path.write_text(path.read_text(encoding="utf-8").replace("100", "many"), encoding="utf-8")
    with pytest.raises(ValidationError, match=":2:"):
        read_run_csv(path)


def test_read_run_csv_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        read_run_csv(tmp_path / "none.csv")


def test_write_json(tmp_path):
    path = tmp_path / "out" / "summary.json"
    write_json({"slope": -0.5, "path": tmp_path}, path)
    assert json.loads(path.read_text(encoding="utf-8"))["slope"] == -0.5


def test_convergence_plot_is_reproducible(tmp_path):
    fit = RateFit(slope=-0.5, intercept=0.0, n_min=100.0, n_max=1000.0, n_points=6, residual=0.0)
    dofs = [100.0, 200.0, 400.0, 800.0]
    series = [Series("estimator", dofs, [n**-0.5 for n in dofs], fit=fit), Series("empty", [], [])]
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_convergence(series, first, title="example")
    plot_convergence(series, second, title="example")
    assert first.read_bytes() == second.read_bytes()
    assert b"<svg" in first.read_bytes()
