"""Tests for report file management."""

import json

import pytest

from kakeyalab.core.errors import ReportIOError, ValidationError
from kakeyalab.utils.file_manager import ROW_COLUMNS, ReportFileManager


@pytest.fixture
def manager(tmp_path):
    return ReportFileManager(tmp_path / "reports", "sample")


def test_for_report_strips_suffix(tmp_path):
    manager = ReportFileManager.for_report(tmp_path / "run.report.json")
    assert manager.stem == "run"
    assert manager.csv_path == tmp_path / "run.report.csv"
    assert ReportFileManager.for_report(tmp_path / "other.json").stem == "other"


def test_save_bundle(manager, sample_bundle):
    paths = manager.save_bundle(sample_bundle.to_dict(), sample_bundle.rows())
    assert paths == [manager.json_path, manager.csv_path]
    assert json.loads(manager.json_path.read_text())["exit_code"] == 2
    header = manager.csv_path.read_text().splitlines()[0].split(",")
    assert header[:6] == ROW_COLUMNS[:6]


def test_save_bundle_rejects_unknown_format(manager, sample_bundle):
    with pytest.raises(ValidationError):
        manager.save_bundle(sample_bundle.to_dict(), sample_bundle.rows(), ["parquet"])


def test_existing_report_is_backed_up(manager, sample_bundle):
    manager.save_json(sample_bundle.to_dict())
    manager.save_json(sample_bundle.to_dict())
    backups = list(manager.directory.glob("sample.report.json.backup.*"))
    assert len(backups) == 1


def test_empty_rows_keep_columns(manager):
    manager.save_rows([])
    assert manager.csv_path.read_text().strip().split(",") == ROW_COLUMNS


def test_series(manager):
    path = manager.save_series("doubling", [(0.125, 1.5), (0.0625, 1.75)], header="ratio\nmonotone=True")
    assert path.name == "sample.doubling.dat"
    assert path.read_text().splitlines() == ["# ratio", "# monotone=True", "0.125 1.5", "0.0625 1.75"]


def test_load_rows_falls_back_to_json(manager, sample_bundle):
    manager.save_bundle(sample_bundle.to_dict(), sample_bundle.rows(), ["json"])
    rows = manager.load_rows()
    assert rows["section"].tolist() == ["wolff", "cordoba"]


def test_load_missing_report(manager):
    with pytest.raises(ReportIOError):
        manager.load_json()


class TestQueryRows:
    """Tests for SQL row filters."""

    def test_filter(self, manager, sample_bundle):
        manager.save_bundle(sample_bundle.to_dict(), sample_bundle.rows())
        rows = manager.query_rows("section = 'cordoba'")
        assert rows["name"].tolist() == ["cordoba"]
        assert len(manager.query_rows()) == 2

    def test_invalid_filter(self, manager, sample_bundle):
        manager.save_bundle(sample_bundle.to_dict(), sample_bundle.rows())
        with pytest.raises(ValidationError):
            manager.query_rows("no_such_column > 1")
