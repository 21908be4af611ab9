"""MSE metrics, stability flags, and report emission."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

STABILITY_GAP = 5.0  # |test - val| MSE*100 above this flags a model unstable

GROUP_TITLES = {
    "A": "Naive Models on One Hot Encoded Input (A)",
    "B": "Naive Models on Psychological Feature Input (B)",
    "ensemble": "Ensemble Models",
}


def mse(preds, targets) -> float:
    preds = np.asarray(preds, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    if preds.shape != targets.shape or preds.size == 0:
        raise ValidationError(
            f"length mismatch: {preds.shape} vs {targets.shape}"
        )
    return float(np.mean((preds - targets) ** 2))


def mse_x100(preds, targets) -> float:
    return 100.0 * mse(preds, targets)


@dataclass(frozen=True)
class ReportRow:
    model_name: str
    input_type: str  # "A", "B", or "ensemble"
    test_mse_x100: float
    val_mse_x100: float
    hyperparameters: str
    seed: int
    coefficients: tuple = ()  # blend coefficient breakdown, if any

    def __post_init__(self):
        if self.test_mse_x100 < 0 or self.val_mse_x100 < 0:
            raise ValidationError("MSE cannot be negative")
        if self.input_type not in GROUP_TITLES:
            raise ValidationError(f"unknown input type {self.input_type!r}")

    @property
    def gap(self) -> float:
        return abs(self.test_mse_x100 - self.val_mse_x100)

    @property
    def stable(self) -> bool:
        return self.gap <= STABILITY_GAP

    @property
    def test_rmse(self) -> float:
        return math.sqrt(self.test_mse_x100 / 100.0)


@dataclass(frozen=True)
class EvalReport:
    rows: tuple  # of ReportRow

    def __post_init__(self):
        if not self.rows:
            raise ValidationError("report has no rows")


def stability_report(model_rows) -> EvalReport:
    """Wrap (name, input_type, test_mse_x100, val_mse_x100, hyper, seed[, coefs])
    tuples or ReportRows into an EvalReport carrying the val/test gaps."""
    rows = tuple(
        r if isinstance(r, ReportRow) else ReportRow(*r) for r in model_rows
    )
    return EvalReport(rows)


def _fmt(x: float) -> str:
    return format(x, ".4f")


def render_report(report: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "input", "test_mse_x100", "val_mse_x100",
                         "gap", "test_rmse", "stable", "coefficients",
                         "hyperparameters", "seed"])
        for row in report.rows:
            writer.writerow([
                row.model_name, row.input_type, _fmt(row.test_mse_x100),
                _fmt(row.val_mse_x100), _fmt(row.gap), _fmt(row.test_rmse),
                "yes" if row.stable else "no",
                " ".join(_fmt(c) for c in row.coefficients),
                row.hyperparameters, row.seed,
            ])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValidationError(f"unknown report format {fmt!r}")

    lines = ["# Model evaluation", ""]
    for group in ("A", "B", "ensemble"):
        rows = [r for r in report.rows if r.input_type == group]
        if not rows:
            continue
        lines.append(f"## {GROUP_TITLES[group]}")
        lines.append("")
        lines.append("| Model | Test MSE*100 | Val MSE*100 | Gap | Test RMSE "
                     "| Stable | Coefficients | Hyperparameters | Seed |")
        lines.append("|---|---|---|---|---|---|---|---|---|")
        for row in rows:
            coefs = (" ".join(_fmt(c) for c in row.coefficients)
                     if row.coefficients else "-")
            lines.append(
                f"| {row.model_name} | {_fmt(row.test_mse_x100)} "
                f"| {_fmt(row.val_mse_x100)} | {_fmt(row.gap)} "
                f"| {_fmt(row.test_rmse)} "
                f"| {'yes' if row.stable else 'no'} | {coefs} "
                f"| {row.hyperparameters} | {row.seed} |"
            )
        lines.append("")
    return "\n".join(lines)


def emit_report(report: EvalReport, path, fmt: str = "markdown"):
    text = render_report(report, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
