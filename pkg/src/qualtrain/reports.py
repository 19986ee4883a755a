"""Report files: per-run evaluation tables and the strategies x test-sets grid.

Everything is plain text.  TSV files start with provenance comment lines
(config hash, seeds, package version) so a grid can be traced back to its
run; the markdown grid mirrors the TSV numbers exactly and parses back to
the same values.
"""

import os

import numpy as np

from . import __version__
from .dataset import TEST_SET_NAMES
from .errors import DataError
from .trainer import EvalReport, Strategy

ACC_FMT = "{:.4f}"


def _provenance_lines(provenance: dict | None) -> list[str]:
    prov = {"version": __version__}
    prov.update(provenance or {})
    return [f"# {key}={prov[key]}" for key in sorted(prov)]


def write_eval_report(path: str, report: EvalReport, provenance: dict | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        fh.write("test_set\taccuracy\tsamples\n")
        for name in TEST_SET_NAMES:
            if name not in report.accuracies:
                continue
            n = len(report.predictions.get(name, ())) or ""
            fh.write(f"{name}\t{ACC_FMT.format(report.accuracies[name])}\t{n}\n")


def read_eval_report(path: str) -> dict[str, float]:
    if not os.path.exists(path):
        raise DataError(f"missing evaluation report: {path}")
    out = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("test_set"):
                continue
            name, acc, _ = line.rstrip("\n").split("\t")
            out[name] = float(acc)
    return out


def write_confidence_records(path: str, report: EvalReport,
                             provenance: dict | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        fh.write("test_set\tindex\tlabel\tprob_true\n")
        for rec in report.confidence:
            fh.write(f"{rec['set']}\t{rec['index']}\t{rec['label']}\t"
                     f"{rec['prob_true']:.6f}\n")


GRID_COLUMNS = ("strategy", "regularization", "training_set") + TEST_SET_NAMES


def write_grid_tsv(path: str, rows: list[tuple[Strategy, dict[str, float]]],
                   provenance: dict | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        fh.write("\t".join(GRID_COLUMNS) + "\n")
        for strat, accs in rows:
            reg, tset = strat.display
            cells = [str(strat.id), reg, tset]
            cells += [ACC_FMT.format(accs[name]) for name in TEST_SET_NAMES]
            fh.write("\t".join(cells) + "\n")


def write_grid_markdown(path: str, rows: list[tuple[Strategy, dict[str, float]]],
                        provenance: dict | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        prov = ", ".join(line[2:] for line in _provenance_lines(provenance))
        fh.write(f"Provenance: {prov}\n\n")
        fh.write("| " + " | ".join(GRID_COLUMNS) + " |\n")
        fh.write("|" + "|".join(["---"] * len(GRID_COLUMNS)) + "|\n")
        for strat, accs in rows:
            reg, tset = strat.display
            cells = [str(strat.id), reg, tset]
            cells += [ACC_FMT.format(accs[name]) for name in TEST_SET_NAMES]
            fh.write("| " + " | ".join(cells) + " |\n")


def _parse_grid_row(cells: list[str]) -> tuple[int, dict[str, float]]:
    sid = int(cells[0])
    accs = {name: float(cells[3 + i]) for i, name in enumerate(TEST_SET_NAMES)}
    return sid, accs


def read_grid_tsv(path: str) -> dict[int, dict[str, float]]:
    out = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("strategy\t"):
                continue
            sid, accs = _parse_grid_row(line.rstrip("\n").split("\t"))
            out[sid] = accs
    return out


def read_grid_markdown(path: str) -> dict[int, dict[str, float]]:
    out = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if not line.startswith("|"):
                continue
            cells = [c.strip() for c in line.strip().strip("|").split("|")]
            if not cells or not cells[0].isdigit():
                continue
            sid, accs = _parse_grid_row(cells)
            out[sid] = accs
    return out
