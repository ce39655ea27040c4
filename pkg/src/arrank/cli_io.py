"""File ingestion, report serialization and the ``arrank`` command line.

Commands::

    arrank test --data d.csv --response y --regressors x1,x2 --ar-order 2
    arrank simulate --config study.toml --threads 4
    arrank scores --data d.csv --response y --ar-order 1

Exit status: 0 on success (including when ``H_0`` is rejected), 1 on
I/O or data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Union

import numpy as np
from numpy.typing import NDArray

from arrank.arscores import SCORE_KINDS
from arrank.asymptotics import InnovationDistribution
from arrank.errors import ArrankError, ConfigError, TableParseError
from arrank.model_data import build_ar_design, load_dataset
from arrank.qr_lp import RankScorePath, solve_rank_score_path
from arrank.simulation import SimulationConfig, StudyReport, run_study
from arrank.test_engine import TestReport, run_test

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SIG_DIGITS = 12


# ---------------------------------------------------------------------------
# Tables


class Table(Mapping):
    """Column-labelled numeric table with row order preserved."""

    def __init__(self, columns: list[str], data: dict[str, NDArray[np.float64]]):
        self.columns = tuple(columns)
        self._data = data

    def __getitem__(self, key: str) -> NDArray[np.float64]:
        return self._data[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self.columns)

    def __len__(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self._data[self.columns[0]]) if self.columns else 0


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_table(path: str | Path, delimiter: str = ",") -> Table:
    """Read a delimited numeric table with a mandatory header row.

    Raises
    ------
    TableParseError
        Missing or duplicate header, empty cell, wrong field count or
        non-numeric cell, with the 1-based line number.
    OSError
        File cannot be read.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    return parse_table(text, delimiter)


def parse_table(text: str, delimiter: str = ",") -> Table:
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise TableParseError("empty file, header row expected", line=1) from None
    header = [h.strip() for h in header]
    if not header or all(h == "" for h in header):
        raise TableParseError("empty header row", line=1)
    if all(_is_number(h) for h in header):
        raise TableParseError("missing header row (first line is numeric)", line=1)
    if any(h == "" for h in header):
        raise TableParseError("empty column name in header", line=1)
    seen = set()
    for h in header:
        if h in seen:
            raise TableParseError(f"duplicate column name {h!r}", line=1)
        seen.add(h)

    cols: list[list[float]] = [[] for _ in header]
    for row in reader:
        line = reader.line_num
        if not row or all(c.strip() == "" for c in row):
            continue
        if len(row) != len(header):
            raise TableParseError(f"expected {len(header)} fields, found {len(row)}", line=line)
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                raise TableParseError(f"empty cell in column {header[j]!r}", line=line)
            try:
                cols[j].append(float(cell))
            except ValueError:
                raise TableParseError(
                    f"non-numeric cell {cell!r} in column {header[j]!r}", line=line
                ) from None
    return Table(header, {h: np.array(c, dtype=np.float64) for h, c in zip(header, cols)})


# ---------------------------------------------------------------------------
# Simulation configs


_CONFIG_KEYS = {
    "n", "phi", "phi0", "beta0", "beta_x", "score", "level", "replications",
    "seed", "burn_in", "design", "design_file", "innovation",
}


def config_from_dict(raw: Mapping[str, Any], base_dir: Path | None = None) -> SimulationConfig:
    """Build a :class:`SimulationConfig` from the documented key-value schema."""
    extra = set(raw) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    kw: dict[str, Any] = {}
    for key in ("n", "replications", "seed", "burn_in"):
        if key in raw:
            kw[key] = int(raw[key])
    for key in ("phi0", "beta0", "level"):
        if key in raw:
            kw[key] = float(raw[key])
    for key in ("phi", "beta_x"):
        if key in raw:
            kw[key] = tuple(float(v) for v in np.atleast_1d(raw[key]))
    if "score" in raw:
        kw["score_kind"] = str(raw["score"])
    if "design" in raw:
        kw["design_gen"] = str(raw["design"])
    if "innovation" in raw:
        kw["innovation"] = InnovationDistribution.from_dict(dict(raw["innovation"]))
    if "design_file" in raw:
        p = Path(raw["design_file"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        t = read_table(p)
        kw["fixed_x"] = np.column_stack([t[c] for c in t.columns])
    return SimulationConfig(**kw)


def load_config(path: str | Path) -> SimulationConfig:
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None
    return config_from_dict(raw, path.parent)


# ---------------------------------------------------------------------------
# Reports


Report = Union[TestReport, StudyReport, RankScorePath]


def _round(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return None
        return float(f"{f:.{SIG_DIGITS}g}")
    if isinstance(v, np.ndarray):
        return [_round(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    return v


def report_to_dict(report: Report) -> dict:
    if isinstance(report, TestReport):
        return {
            "statistic": report.statistic,
            "dof": report.dof,
            "p_value": report.p_value,
            "reject": report.reject,
            "level": report.level,
            "score": report.score_kind,
            "n_effective": report.n_effective,
            "warnings": list(report.warnings),
            "s_n": np.asarray(report.s_n).tolist(),
            "q_condition": report.q_condition,
        }
    if isinstance(report, StudyReport):
        return report.to_dict()
    if isinstance(report, RankScorePath):
        return {
            "breakpoints": report.breakpoints.tolist(),
            "node_values": report.node_values.T.tolist(),
        }
    raise TypeError(f"cannot serialize {type(report).__name__}")


def _csv_rows(report: Report) -> list[list[Any]]:
    if isinstance(report, RankScorePath):
        n = report.n
        rows: list[list[Any]] = [["alpha"] + [f"a_{t + 1}" for t in range(n)]]
        for k, a in enumerate(report.breakpoints):
            rows.append([_round(a)] + [_round(v) for v in report.node_values[:, k]])
        return rows
    flat: list[list[Any]] = [["key", "value"]]

    def walk(prefix: str, v: Any) -> None:
        if isinstance(v, dict):
            for k, x in v.items():
                walk(f"{prefix}.{k}" if prefix else k, x)
        elif isinstance(v, list):
            flat.append([prefix, ";".join("" if x is None else str(x) for x in v)])
        else:
            flat.append([prefix, "" if v is None else v])

    walk("", _round(report_to_dict(report)))
    return flat


def format_report(report: Report, fmt: str = "json", timestamp: bool = False) -> str:
    if fmt == "json":
        d = _round(report_to_dict(report))
        if timestamp:
            d["generated_at"] = datetime.now(timezone.utc).isoformat()
        return json.dumps(d, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(_csv_rows(report))
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def write_report(report: Report, fmt: str = "json", path: str = "-", timestamp: bool = False) -> None:
    """Write ``report`` as JSON or CSV to ``path`` (``"-"`` for standard output)."""
    text = format_report(report, fmt, timestamp)
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_study_report(path: str | Path) -> StudyReport:
    """Load a StudyReport written by :func:`write_report` in JSON format."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    d.pop("generated_at", None)
    return StudyReport(
        config=d["config"],
        rejection_rate=d["rejection_rate"],
        predicted=d["predicted"],
        mc_stderr=d["mc_stderr"],
        p_values=np.array(d["p_values"], dtype=np.float64),
        statistics=np.array(d["statistics"], dtype=np.float64),
        ks_distance_to_chi2=d["ks_distance_to_chi2"],
        eta2=d["eta2"],
        n_replications=d["n_replications"],
        n_failures=d["n_failures"],
        failures=tuple(d["failures"]),
    )


# ---------------------------------------------------------------------------
# Command line


@dataclass(frozen=True)
class TestCommand:
    __test__ = False

    data_path: str
    response: str
    regressors: tuple[str, ...]
    ar_order: int
    score: str = "wilcoxon"
    level: float = 0.05
    presample_policy: str = "consume_head"
    presample: tuple[float, ...] | None = None
    output_path: str = "-"
    format: str = "json"
    delimiter: str = ","
    timestamp: bool = False


@dataclass(frozen=True)
class SimulateCommand:
    config_path: str
    output_path: str = "-"
    format: str = "json"
    threads: int = 1
    timestamp: bool = False


@dataclass(frozen=True)
class ScoresCommand:
    data_path: str
    response: str
    ar_order: int
    output_path: str = "-"
    format: str = "csv"
    delimiter: str = ","


Command = Union[TestCommand, SimulateCommand, ScoresCommand]


class UsageError(Exception):
    exit_status = 2

    def __init__(self, message: str, usage: str):
        self.usage = usage
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message, self.format_usage())


def _level(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _pos_int(text: str) -> int:
    v = _nonneg_int(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonempty(text: str) -> str:
    if not text:
        raise argparse.ArgumentTypeError("must not be empty")
    return text


def _names(text: str) -> tuple[str, ...]:
    names = tuple(t.strip() for t in text.split(","))
    if not names or any(not t for t in names):
        raise argparse.ArgumentTypeError(f"expected comma-separated column names, got {text!r}")
    return names


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _delimiter(text: str) -> str:
    mapping = {",": ",", "comma": ",", "tab": "\t", "\\t": "\t", "\t": "\t"}
    if text not in mapping:
        raise argparse.ArgumentTypeError("delimiter must be ',' or 'tab'")
    return mapping[text]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arrank", description="Autoregression rank-score tests of no regression.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test H0: no regression, under AR(p) errors")
    t.add_argument("--data", required=True, type=_nonempty)
    t.add_argument("--response", required=True, type=_nonempty)
    t.add_argument("--regressors", required=True, type=_names)
    t.add_argument("--ar-order", required=True, type=_nonneg_int)
    t.add_argument("--score", default="wilcoxon", choices=SCORE_KINDS)
    t.add_argument("--level", default=0.05, type=_level)
    t.add_argument("--presample-policy", default="consume_head", choices=("consume_head", "explicit"))
    t.add_argument("--presample", type=_floats, help="comma-separated y_{-p+1..0} (explicit policy)")
    t.add_argument("--output", default="-", type=_nonempty)
    t.add_argument("--format", default="json", choices=("json", "csv"))
    t.add_argument("--delimiter", default=",", type=_delimiter)
    t.add_argument("--timestamp", action="store_true", help="add generated_at to JSON output")

    s = sub.add_parser("simulate", help="run a Monte Carlo size/power study")
    s.add_argument("--config", required=True, type=_nonempty)
    s.add_argument("--output", default="-", type=_nonempty)
    s.add_argument("--format", default="json", choices=("json", "csv"))
    s.add_argument("--threads", default=1, type=_pos_int)
    s.add_argument("--timestamp", action="store_true")

    r = sub.add_parser("scores", help="dump the rank-score path")
    r.add_argument("--data", required=True, type=_nonempty)
    r.add_argument("--response", required=True, type=_nonempty)
    r.add_argument("--ar-order", required=True, type=_nonneg_int)
    r.add_argument("--output", default="-", type=_nonempty)
    r.add_argument("--format", default="csv", choices=("json", "csv"))
    r.add_argument("--delimiter", default=",", type=_delimiter)
    return parser


def parse_cli(argv: list[str]) -> Command:
    """Parse ``argv`` (without the program name) into a command.

    Raises
    ------
    UsageError
        Unknown flag, missing argument or out-of-range value; the message
        names the offending option and ``usage`` holds the synopsis.
    """
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "test":
        if ns.presample_policy == "explicit" and ns.presample is None:
            raise UsageError("--presample is required with --presample-policy explicit", parser.format_usage())
        if ns.presample_policy == "consume_head" and ns.presample is not None:
            raise UsageError("--presample requires --presample-policy explicit", parser.format_usage())
        return TestCommand(
            ns.data, ns.response, ns.regressors, ns.ar_order, ns.score, ns.level,
            ns.presample_policy, ns.presample, ns.output, ns.format, ns.delimiter, ns.timestamp,
        )
    if ns.command == "simulate":
        return SimulateCommand(ns.config, ns.output, ns.format, ns.threads, ns.timestamp)
    return ScoresCommand(ns.data, ns.response, ns.ar_order, ns.output, ns.format, ns.delimiter)


def execute(cmd: Command) -> None:
    if isinstance(cmd, TestCommand):
        table = read_table(cmd.data_path, cmd.delimiter)
        d = load_dataset(
            table, cmd.response, cmd.regressors, cmd.ar_order, cmd.presample_policy, cmd.presample
        )
        write_report(run_test(d, cmd.score, cmd.level), cmd.format, cmd.output_path, cmd.timestamp)
    elif isinstance(cmd, SimulateCommand):
        cfg = load_config(cmd.config_path)
        write_report(run_study(cfg, workers=cmd.threads), cmd.format, cmd.output_path, cmd.timestamp)
    else:
        table = read_table(cmd.data_path, cmd.delimiter)
        d = load_dataset(table, cmd.response, [], cmd.ar_order, "consume_head")
        path = solve_rank_score_path(build_ar_design(d))
        write_report(path, cmd.format, cmd.output_path)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_cli(argv)
    except UsageError as err:
        sys.stderr.write(err.usage)
        sys.stderr.write(f"arrank: error: {err}\n")
        return UsageError.exit_status
    try:
        execute(cmd)
    except OSError as err:
        sys.stderr.write(f"arrank: I/O error: {err}\n")
        return 1
    except ArrankError as err:
        sys.stderr.write(f"arrank: error: {err}\n")
        return 1
    return 0
