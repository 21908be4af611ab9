"""Command-line front end: synth/ingest -> featurize/split -> train -> blend -> eval.

Every subcommand reads and writes versioned artifacts under the --out
directory, so downstream steps never need parameters re-specified.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import data
from .config import RunConfig, load_config
from .ensemble import (
    BlendModel,
    MemberSpec,
    PipelineConfig,
    TrainedMember,
    blend_display_name,
    blend_fit,
    blend_load,
    blend_predict,
    blend_save,
    build_designs,
    train_member,
)
from .data import expand_gamble_a, expand_gamble_b
from .errors import PsychFMError, ValidationError
from .features import FEATURE_NAMES, psych_features
from .fm import fm_load, fm_save
from .linear import linear_load, linear_save
from .metrics import EvalReport, ReportRow, emit_report, mse_x100


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="psychfm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, raw=False, model=False, members=False, fmt=False):
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--config", help="config file of 'key = value' lines")
        p.add_argument("--seed", type=int, help="master seed override")
        if raw:
            p.add_argument("--raw", help="trial-level raw CSV path")
        if model:
            p.add_argument("--model", choices=["fm", "ridge", "lasso"],
                           required=True)
            p.add_argument("--input", choices=["onehot", "psych"],
                           required=True)
        if members:
            p.add_argument("--members", default="fm:onehot,ridge:psych",
                           help="comma list of model:input member specs")
            p.add_argument("--intercept", action="store_true",
                           help="fit a blend intercept")
            p.add_argument("--clip", action="store_true",
                           help="clip predictions to [0,1]")
        if fmt:
            p.add_argument("--format", choices=["markdown", "csv"],
                           default="markdown")
        return p

    p = common(sub.add_parser("synth", help="generate synthetic raw data"))
    p.add_argument("--synth", nargs="*", metavar="KEY=VALUE",
                   help="overrides: subjects=, games=, trials=")
    p = common(sub.add_parser("ingest", help="raw CSV -> problems + rates"),
               raw=True)
    common(sub.add_parser("featurize", help="emit the feature matrix CSV"))
    common(sub.add_parser("split", help="write the train/val/test split"))
    common(sub.add_parser("train", help="train one member model"), model=True)
    common(sub.add_parser("blend", help="fit the blend over member models"),
           members=True)
    common(sub.add_parser("eval", help="emit the evaluation report"), fmt=True)
    p = common(sub.add_parser("run-all", help="full pipeline in one shot"),
               raw=True, members=True, fmt=True)
    p.add_argument("--synth", nargs="*", metavar="KEY=VALUE",
                   help="generate synthetic data (subjects=, games=, trials=)")
    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.set("seed", args.seed)
    return cfg


def _pipeline_config(cfg: RunConfig, args=None) -> PipelineConfig:
    intercept = cfg["blend.intercept"] or bool(getattr(args, "intercept", False))
    clip = cfg["clip_predictions"] or bool(getattr(args, "clip", False))
    return PipelineConfig(
        fm=cfg.fm_config(),
        ridge_lambda=cfg["ridge.lambda"],
        lasso_lambda=cfg["lasso.lambda"],
        lasso_tol=cfg["lasso.tol"],
        lasso_max_iter=cfg["lasso.max_iter"],
        blend_lambda=cfg["blend.lambda"],
        blend_intercept=intercept,
        clip=clip,
        standardize_psych=cfg["features.standardize"],
        seed=cfg["seed"],
    )


def _apply_synth_overrides(cfg: RunConfig, tokens):
    aliases = {"subjects": "synth.subjects", "games": "synth.games",
               "trials": "synth.trials",
               "games_per_subject": "synth.games_per_subject"}
    for tok in tokens or []:
        if "=" not in tok:
            raise ValidationError(f"--synth expects key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        cfg.set(aliases.get(key.strip(), key.strip()), value.strip())


# ---------------------------------------------------------------------------
# Artifact helpers

def _path(args, name):
    return os.path.join(args.out, name)


def _require(args, name):
    path = _path(args, name)
    if not os.path.exists(path):
        raise ValidationError(
            f"missing artifact {name} in {args.out}; run the producing "
            "subcommand first"
        )
    return path


def _load_dataset(args):
    problems = data.read_problems_csv(_require(args, "problems.csv"))
    points = data.read_rates_csv(_require(args, "rates.csv"))
    return problems, points


def _write_feature_csv(path, problems, points):
    feats = {}
    for p in problems:
        vec = psych_features(p, expand_gamble_a(p), expand_gamble_b(p))
        feats[p.game_id] = vec.to_array()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["SubjID", "GameID"] + FEATURE_NAMES)
        for pt in sorted(points, key=lambda q: (q.subj_id, q.game_id)):
            row = feats[pt.game_id]
            writer.writerow([pt.subj_id, pt.game_id]
                            + [format(v, ".17g") for v in row])


def _model_path(args, spec: MemberSpec):
    return _path(args, os.path.join("models", spec.member_id + ".model"))


def _save_member(args, member: TrainedMember):
    os.makedirs(_path(args, "models"), exist_ok=True)
    path = _model_path(args, member.spec)
    if member.spec.model == "fm":
        fm_save(member.model, path)
    else:
        linear_save(member.model, path)
    with open(path + ".hyper", "w", encoding="utf-8") as fh:
        fh.write(member.hyper + "\n")


def _load_member(args, spec: MemberSpec) -> TrainedMember:
    path = _model_path(args, spec)
    model = fm_load(path) if spec.model == "fm" else linear_load(path)
    hyper = ""
    if os.path.exists(path + ".hyper"):
        with open(path + ".hyper", encoding="utf-8") as fh:
            hyper = fh.read().strip()
    return TrainedMember(spec, model, hyper)


def _write_preds_csv(path, keys, y, member_ids, member_preds, blend_preds):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["SubjID", "GameID", "BRate"] + list(member_ids)
                        + ["blend"])
        for j, (s, g) in enumerate(keys):
            writer.writerow(
                [s, g, format(y[j], ".17g")]
                + [format(member_preds[j, i], ".17g")
                   for i in range(member_preds.shape[1])]
                + [format(blend_preds[j], ".17g")]
            )


def _read_preds_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        member_ids = [c for c in cols if c not in ("SubjID", "GameID", "BRate",
                                                   "blend")]
        y, blend, members = [], [], []
        for row in reader:
            y.append(float(row["BRate"]))
            blend.append(float(row["blend"]))
            members.append([float(row[c]) for c in member_ids])
    return member_ids, np.array(y), np.array(members), np.array(blend)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args):
    cfg = _load_run_config(args)
    _apply_synth_overrides(cfg, getattr(args, "synth", None))
    os.makedirs(args.out, exist_ok=True)
    problems, trials = data.synth_generate(
        cfg["synth.subjects"], cfg["synth.games"], cfg["synth.trials"],
        cfg.component_seed("synth"),
        games_per_subject=cfg["synth.games_per_subject"],
    )
    data.write_raw_csv(_path(args, "raw.csv"), problems, trials)


def cmd_ingest(args):
    if not args.raw:
        raise ValidationError("ingest needs --raw")
    os.makedirs(args.out, exist_ok=True)
    problems, trials = data.parse_raw_csv(args.raw)
    points = data.aggregate_b_rates(trials)
    data.write_problems_csv(_path(args, "problems.csv"), problems)
    data.write_rates_csv(_path(args, "rates.csv"), points)


def cmd_featurize(args):
    problems, points = _load_dataset(args)
    _write_feature_csv(_path(args, "features.csv"), problems, points)


def cmd_split(args):
    cfg = _load_run_config(args)
    points = data.read_rates_csv(_require(args, "rates.csv"))
    split = data.split_dataset(
        points, cfg.component_seed("split"),
        test_per_subject=cfg["split.test_per_subject"],
        val_frac=cfg["split.val_frac"],
    )
    data.write_split(_path(args, "split.txt"), split)


def _load_folds(args, cfg: RunConfig, pcfg: PipelineConfig):
    problems, points = _load_dataset(args)
    split = data.read_split(_require(args, "split.txt"),
                            seed=cfg.component_seed("split"))
    return build_designs(problems, points, split,
                         standardize_psych=pcfg.standardize_psych)


def cmd_train(args):
    cfg = _load_run_config(args)
    pcfg = _pipeline_config(cfg, args)
    spec = MemberSpec(args.model, args.input)
    folds = _load_folds(args, cfg, pcfg)
    member = train_member(spec, folds, pcfg)
    _save_member(args, member)


def cmd_blend(args):
    cfg = _load_run_config(args)
    pcfg = _pipeline_config(cfg, args)
    specs = [MemberSpec.parse(s) for s in args.members.split(",")]
    folds = _load_folds(args, cfg, pcfg)
    members = []
    for spec in specs:
        if os.path.exists(_model_path(args, spec)):
            members.append(_load_member(args, spec))
        else:
            member = train_member(spec, folds, pcfg)
            _save_member(args, member)
            members.append(member)

    def clip(a):
        return np.clip(a, 0.0, 1.0) if pcfg.clip else a

    val_preds = np.column_stack([clip(m.predict(folds["val"])) for m in members])
    test_preds = np.column_stack([clip(m.predict(folds["test"])) for m in members])
    blend = blend_fit(val_preds, folds["val"].y, pcfg.blend_lambda,
                      intercept=pcfg.blend_intercept,
                      member_ids=[m.spec.member_id for m in members])
    blend_save(blend, _path(args, "blend.model"))
    _write_preds_csv(_path(args, "val_preds.csv"), folds["val"].keys,
                     folds["val"].y, [m.spec.member_id for m in members],
                     val_preds, clip(blend_predict(blend, val_preds)))
    _write_preds_csv(_path(args, "test_preds.csv"), folds["test"].keys,
                     folds["test"].y, [m.spec.member_id for m in members],
                     test_preds, clip(blend_predict(blend, test_preds)))
    with open(_path(args, "members.txt"), "w", encoding="utf-8") as fh:
        for m in members:
            fh.write(f"{m.spec.member_id}\t{m.spec.display}\t"
                     f"{'A' if m.spec.input == 'onehot' else 'B'}\t{m.hyper}\n")
        fh.write(f"__blend__\t{blend_display_name(specs)}\tensemble\t"
                 f"blend_lambda={pcfg.blend_lambda:g} "
                 f"intercept={'on' if pcfg.blend_intercept else 'off'}\n")


def cmd_eval(args):
    cfg = _load_run_config(args)
    val_ids, y_val, val_members, val_blend = _read_preds_csv(
        _require(args, "val_preds.csv"))
    test_ids, y_test, test_members, test_blend = _read_preds_csv(
        _require(args, "test_preds.csv"))
    if val_ids != test_ids:
        raise ValidationError("val and test prediction files disagree on members")
    blend = blend_load(_require(args, "blend.model"))
    meta = {}
    order = []
    with open(_require(args, "members.txt"), encoding="utf-8") as fh:
        for line in fh:
            member_id, display, input_type, hyper = line.rstrip("\n").split("\t")
            meta[member_id] = (display, input_type, hyper)
            order.append(member_id)
    rows = []
    for i, member_id in enumerate(val_ids):
        display, input_type, hyper = meta.get(member_id,
                                              (member_id, "A", ""))
        rows.append(ReportRow(display, input_type,
                              mse_x100(test_members[:, i], y_test),
                              mse_x100(val_members[:, i], y_val),
                              hyper, cfg["seed"]))
    display, input_type, hyper = meta.get("__blend__",
                                          ("Blend", "ensemble", ""))
    rows.append(ReportRow(display, input_type,
                          mse_x100(test_blend, y_test),
                          mse_x100(val_blend, y_val),
                          hyper, cfg["seed"],
                          coefficients=tuple(float(c) for c in blend.coef)))
    ext = "md" if args.format == "markdown" else "csv"
    emit_report(EvalReport(tuple(rows)), _path(args, f"report.{ext}"),
                args.format)


def cmd_run_all(args):
    cfg = _load_run_config(args)
    os.makedirs(args.out, exist_ok=True)
    if args.synth is not None:
        cmd_synth(args)
        args.raw = _path(args, "raw.csv")
    if not args.raw:
        raise ValidationError("run-all needs --raw or --synth")
    cmd_ingest(args)
    cmd_featurize(args)
    cmd_split(args)
    cmd_blend(args)
    cmd_eval(args)
    with open(_path(args, "config_resolved.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.resolved_text())


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "featurize": cmd_featurize,
    "split": cmd_split,
    "train": cmd_train,
    "blend": cmd_blend,
    "eval": cmd_eval,
    "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PsychFMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
