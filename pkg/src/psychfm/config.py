"""Flat run configuration: "key = value" lines, '#' comments.

Unknown keys are rejected so typos fail loudly.  Every run writes the
fully-resolved configuration next to its artifacts.  The master seed fans
out to per-component seeds via a labeled hash so components can be re-run
in isolation and still reproduce.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ValidationError
from .fm import FMTrainConfig, Solver

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _parse_bool(text):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def _parse_float_or_auto(text):
    t = text.strip().lower()
    if t == "auto":
        return "auto"
    return float(text)


# key -> (parser, default)
SCHEMA = {
    "seed": (int, 0),
    "clip_predictions": (_parse_bool, False),
    "fm.solver": (lambda t: Solver(t.strip().lower()), Solver.SGD),
    "fm.k": (int, 8),
    "fm.lr": (float, 0.01),
    "fm.epochs": (int, 200),
    "fm.reg_w": (float, 1e-3),
    "fm.reg_v": (float, 1e-3),
    "fm.init_sd": (float, 0.01),
    "ridge.lambda": (_parse_float_or_auto, "auto"),
    "lasso.lambda": (_parse_float_or_auto, "auto"),
    "lasso.tol": (float, 1e-6),
    "lasso.max_iter": (int, 1000),
    "blend.lambda": (float, 1e-3),
    "blend.intercept": (_parse_bool, False),
    "split.test_per_subject": (int, 5),
    "split.val_frac": (float, 0.10),
    "features.standardize": (_parse_bool, True),
    "synth.subjects": (int, 40),
    "synth.games": (int, 40),
    "synth.trials": (int, 25),
    "synth.games_per_subject": (int, 30),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        resolved = {k: default for k, (_, default) in SCHEMA.items()}
        for k, v in self.values.items():
            if k not in SCHEMA:
                raise ValidationError(f"unknown config key {k!r}")
            resolved[k] = v
        self.values = resolved

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, raw_value):
        if key not in SCHEMA:
            raise ValidationError(f"unknown config key {key!r}")
        parser = SCHEMA[key][0]
        self.values[key] = (raw_value if not isinstance(raw_value, str)
                            else parser(raw_value))

    def component_seed(self, label: str) -> int:
        digest = hashlib.sha256(f"{self['seed']}:{label}".encode()).digest()
        return int.from_bytes(digest[:4], "big")

    def fm_config(self) -> FMTrainConfig:
        return FMTrainConfig(
            k=self["fm.k"], learning_rate=self["fm.lr"],
            epochs=self["fm.epochs"], reg_w=self["fm.reg_w"],
            reg_v=self["fm.reg_v"], init_sd=self["fm.init_sd"],
            seed=self.component_seed("fm"), solver=self["fm.solver"],
        )

    def resolved_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, Solver):
                val = val.value
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    cfg = RunConfig()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"line {line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            try:
                cfg.set(key, value)
            except ValidationError:
                raise
            except ValueError as exc:
                raise ValidationError(f"line {line_no}: {exc}") from exc
    return cfg
