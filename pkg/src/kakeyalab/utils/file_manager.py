"""Report files: JSON bundles, CSV inequality rows and .dat series."""

import json
import shutil
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import duckdb
import pandas as pd
from loguru import logger

from ..core.errors import ReportIOError, ValidationError
from .formatters import json_default

# Column order of the CSV report
ROW_COLUMNS = ["section", "name", "delta", "lhs", "rhs", "ratio", "passed", "provenance"]


class ReportFileManager:
    """Manage report files for one experiment stem."""

    def __init__(self, directory: Path, stem: str):
        """Initialize file manager.

        Args:
            directory: Output directory, created on first write
            stem: File name stem shared by all outputs
        """
        self.directory = Path(directory)
        self.stem = stem

    @classmethod
    def for_report(cls, report_path: Path) -> "ReportFileManager":
        """Manager for an existing `<stem>.report.json`."""
        report_path = Path(report_path)
        name = report_path.name
        stem = name[: -len(".report.json")] if name.endswith(".report.json") else report_path.stem
        return cls(report_path.parent, stem)

    @property
    def json_path(self) -> Path:
        return self.directory / f"{self.stem}.report.json"

    @property
    def csv_path(self) -> Path:
        return self.directory / f"{self.stem}.report.csv"

    def dat_path(self, series: str) -> Path:
        return self.directory / f"{self.stem}.{series}.dat"

    def backup_existing(self, path: Path) -> Optional[Path]:
        """Backup an existing file with a timestamp suffix.

        Returns:
            Path to backup file or None if no backup was created
        """
        if not path.exists():
            return None
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        backup_path = Path(f"{path}.backup.{timestamp}")
        try:
            shutil.copy2(path, backup_path)
        except OSError as e:
            raise ReportIOError(f"Could not back up report ({e})", path)
        logger.warning(f"Backed up existing report to: {backup_path}")
        return backup_path

    def _prepare(self, path: Path) -> None:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ReportIOError(f"Could not create report directory ({e})", self.directory)
        self.backup_existing(path)

    def save_json(self, data: dict) -> Path:
        """Write the report bundle as JSON after backing up an existing one."""
        self._prepare(self.json_path)
        try:
            self.json_path.write_text(json.dumps(data, indent=2, default=json_default))
        except (OSError, TypeError) as e:
            raise ReportIOError(f"Could not write report ({e})", self.json_path)
        logger.info(f"Report saved to: {self.json_path}")
        return self.json_path

    def save_rows(self, rows: Sequence[dict], path: Optional[Path] = None) -> Path:
        """Write inequality rows as CSV, one row per inequality."""
        path = path or self.csv_path
        self._prepare(path)
        df = pd.DataFrame(list(rows))
        if df.empty:
            df = pd.DataFrame(columns=ROW_COLUMNS)
        ordered = [c for c in ROW_COLUMNS if c in df.columns]
        df = df[ordered + [c for c in df.columns if c not in ordered]]
        try:
            df.to_csv(path, index=False)
        except OSError as e:
            raise ReportIOError(f"Could not write rows ({e})", path)
        logger.info(f"Rows saved to: {path}")
        return path

    def save_series(self, series: str, points: Sequence[Tuple[float, float]], header: str = "") -> Path:
        """Write a gnuplot-style two-column series."""
        path = self.dat_path(series)
        self._prepare(path)
        lines = [f"# {line}" for line in header.splitlines()]
        lines += [f"{x:.10g} {y:.10g}" for x, y in points]
        try:
            path.write_text("\n".join(lines) + "\n")
        except OSError as e:
            raise ReportIOError(f"Could not write series ({e})", path)
        logger.info(f"Series saved to: {path}")
        return path

    def save_bundle(self, bundle: dict, rows: Sequence[dict], formats: Sequence[str] = ("json", "csv")) -> List[Path]:
        """Write the requested report formats."""
        unknown = set(formats) - {"json", "csv"}
        if unknown:
            raise ValidationError(f"Unknown report formats: {sorted(unknown)}. Available: ['csv', 'json']")
        written = []
        if "json" in formats:
            written.append(self.save_json(bundle))
        if "csv" in formats:
            written.append(self.save_rows(rows))
        return written

    def load_json(self) -> dict:
        """Load the JSON report.

        Raises:
            ReportIOError: If the file is missing or not valid JSON
        """
        try:
            return json.loads(self.json_path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ReportIOError(f"Could not read report ({e})", self.json_path)

    def load_rows(self) -> pd.DataFrame:
        """Load the CSV rows, or rebuild them from the JSON report when no CSV exists."""
        if self.csv_path.exists():
            try:
                return pd.read_csv(self.csv_path)
            except (OSError, pd.errors.ParserError) as e:
                raise ReportIOError(f"Could not read rows ({e})", self.csv_path)
        rows = [
            {"section": section["name"], **row}
            for section in self.load_json().get("sections", [])
            for row in section.get("rows", [])
        ]
        return pd.DataFrame(rows, columns=None if rows else ROW_COLUMNS)

    def query_rows(self, where: Optional[str] = None) -> pd.DataFrame:
        """Filter report rows with a duckdb SQL condition.

        Args:
            where: SQL boolean expression over the row columns, e.g. "ratio < 1"

        Raises:
            ValidationError: If the condition is not valid SQL for these rows
        """
        rows = self.load_rows()
        if not where:
            return rows
        con = duckdb.connect()
        try:
            con.register("report_rows", rows)
            return con.execute(f"SELECT * FROM report_rows WHERE {where}").df()
        except duckdb.Error as e:
            raise ValidationError(f"Invalid row filter: {e}", "Columns: " + ", ".join(rows.columns))
        finally:
            con.close()
