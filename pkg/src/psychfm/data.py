"""Dataset ingestion, gamble expansion, B-rate aggregation, and splits.

A choice problem pits gamble A (a two-outcome lottery) against gamble B
(a high branch plus a shaped multi-outcome lottery branch).  Raw trial-level
CSV rows are aggregated into per-(subject, game) B-rates, which are the
regression targets everywhere downstream.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RowParseError, SchemaError, ValidationError

PROB_TOL = 1e-12
MEAN_TOL = 1e-9


class LotShape(enum.Enum):
    NONE = "-"
    SYMM = "Symm"
    RSKEW = "R-skew"
    LSKEW = "L-skew"

    @classmethod
    def from_label(cls, label: str) -> "LotShape":
        for shape in cls:
            if shape.value == label:
                return shape
        raise ValidationError(f"unknown LotShape {label!r}")


@dataclass(frozen=True)
class ChoiceProblem:
    """One A-vs-B gamble problem (the 11 CPC parameters, feedback dropped)."""

    game_id: int
    ha: float
    p_ha: float
    la: float
    hb: float
    p_hb: float
    lot_val: float  # aliases the Lb column when lot_num == 1
    lot_num: int
    lot_shape: LotShape
    corr: int
    amb: int

    def __post_init__(self):
        if not (0.0 <= self.p_ha <= 1.0):
            raise ValidationError(f"pHa {self.p_ha} outside [0,1]")
        if not (0.0 <= self.p_hb <= 1.0):
            raise ValidationError(f"pHb {self.p_hb} outside [0,1]")
        if self.lot_num < 1:
            raise ValidationError(f"LotNum {self.lot_num} < 1")
        if (self.lot_num == 1) != (self.lot_shape is LotShape.NONE):
            raise ValidationError(
                f"LotNum {self.lot_num} inconsistent with LotShape "
                f"{self.lot_shape.value!r} (LotNum=1 iff shape '-')"
            )
        if self.lot_shape is LotShape.SYMM and self.lot_num % 2 == 0:
            raise ValidationError(
                f"Symm lottery needs odd LotNum, got {self.lot_num}"
            )
        if self.corr not in (-1, 0, 1):
            raise ValidationError(f"Corr {self.corr} not in {{-1,0,1}}")
        if self.amb not in (0, 1):
            raise ValidationError(f"Amb {self.amb} not in {{0,1}}")


@dataclass(frozen=True)
class TrialRecord:
    subj_id: int
    game_id: int
    block: int
    trial: int
    chose_b: int
    feedback: int

    def __post_init__(self):
        if self.chose_b not in (0, 1):
            raise ValidationError(f"B choice flag {self.chose_b} not in {{0,1}}")
        if not (1 <= self.block <= 5):
            raise ValidationError(f"block {self.block} outside 1-5")
        if not (1 <= self.trial <= 25):
            raise ValidationError(f"trial {self.trial} outside 1-25")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Finite payoff distribution: ascending values, merged duplicates."""

    outcomes: tuple  # of (value, prob)

    @classmethod
    def from_pairs(cls, pairs) -> "OutcomeDistribution":
        merged = {}
        for value, prob in pairs:
            if prob < 0:
                raise ValidationError(f"negative probability {prob}")
            if prob > 0:
                merged[float(value)] = merged.get(float(value), 0.0) + prob
        if not merged:
            raise ValidationError("distribution has no mass")
        total = math.fsum(merged.values())
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"probabilities sum to {total}, not 1")
        outcomes = tuple(sorted(merged.items()))
        return cls(outcomes)

    @property
    def values(self):
        return tuple(v for v, _ in self.outcomes)

    @property
    def probs(self):
        return tuple(p for _, p in self.outcomes)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in self.outcomes)

    def sd(self) -> float:
        mu = self.mean()
        return math.sqrt(max(0.0, math.fsum(p * (v - mu) ** 2 for v, p in self.outcomes)))

    def vmin(self) -> float:
        return self.outcomes[0][0]

    def vmax(self) -> float:
        return self.outcomes[-1][0]


@dataclass(frozen=True)
class RatePoint:
    subj_id: int
    game_id: int
    b_rate: float
    n_trials: int

    def __post_init__(self):
        if not (0.0 <= self.b_rate <= 1.0):
            raise ValidationError(f"bRate {self.b_rate} outside [0,1]")
        if self.n_trials < 1:
            raise ValidationError("nTrials < 1")


@dataclass(frozen=True)
class SplitAssignment:
    train_ids: frozenset  # of (subj_id, game_id)
    val_ids: frozenset
    test_ids: frozenset
    seed: int

    def fold_of(self, key):
        if key in self.train_ids:
            return "train"
        if key in self.val_ids:
            return "val"
        if key in self.test_ids:
            return "test"
        raise KeyError(key)


# ---------------------------------------------------------------------------
# Gamble expansion

def expand_gamble_a(p: ChoiceProblem) -> OutcomeDistribution:
    """A pays Ha with pHa and La otherwise."""
    return OutcomeDistribution.from_pairs(
        [(p.ha, p.p_ha), (p.la, 1.0 - p.p_ha)]
    )


def _lottery_outcomes(lot_val, lot_num, lot_shape, branch_mass):
    """Outcomes of B's lottery branch, total mass branch_mass, mean lot_val.

    Symm with lot_num = k+1 outcomes puts Binomial(k, 1/2) mass on
    lot_val - k/2 .. lot_val + k/2.  R-skew puts geometrically halving mass
    on lot_val - (lot_num+1) + 2^i for i = 1..lot_num (last mass doubled so
    the branch sums and the mean lands exactly on lot_val); L-skew mirrors.
    """
    if lot_num == 1:
        return [(lot_val, branch_mass)]
    if lot_shape is LotShape.SYMM:
        k = lot_num - 1
        half = k // 2
        return [
            (lot_val + j, branch_mass * math.comb(k, j + half) * 0.5 ** k)
            for j in range(-half, half + 1)
        ]
    if lot_shape in (LotShape.RSKEW, LotShape.LSKEW):
        sign = 1.0 if lot_shape is LotShape.RSKEW else -1.0
        base = lot_val - sign * (lot_num + 1)
        out = []
        for i in range(1, lot_num + 1):
            mass = branch_mass * 2.0 ** (-i)
            if i == lot_num:
                mass *= 2.0
            out.append((base + sign * 2.0 ** i, mass))
        return out
    raise ValidationError(
        f"LotShape {lot_shape.value!r} with LotNum {lot_num} has no expansion"
    )


def _expand_b(hb, p_hb, lot_val, lot_num, lot_shape) -> OutcomeDistribution:
    pairs = [(hb, p_hb)]
    branch_mass = 1.0 - p_hb
    if branch_mass > 0.0:
        pairs.extend(_lottery_outcomes(lot_val, lot_num, lot_shape, branch_mass))
    dist = OutcomeDistribution.from_pairs(pairs)
    if branch_mass > 0.0:
        lottery_mean = math.fsum(
            v * m for v, m in _lottery_outcomes(lot_val, lot_num, lot_shape, 1.0)
        )
        if abs(lottery_mean - lot_val) > MEAN_TOL:
            raise ValidationError(
                f"lottery mean {lottery_mean} != LotVal {lot_val}"
            )
    return dist


def expand_gamble_b(p: ChoiceProblem) -> OutcomeDistribution:
    """B pays Hb with pHb, otherwise a LotNum-outcome lottery with mean LotVal."""
    return _expand_b(p.hb, p.p_hb, p.lot_val, p.lot_num, p.lot_shape)


def joint_distribution(a: OutcomeDistribution, b: OutcomeDistribution, corr: int):
    """Joint support of (va, vb) under the declared payoff correlation.

    corr=0 is the product measure; corr=+1 pairs ascending quantiles of both
    marginals (comonotone); corr=-1 pairs a's ascending with b's descending
    quantiles (antithetic).  Mass at quantile boundaries is split.
    """
    if corr == 0:
        return [
            (va, vb, pa * pb)
            for va, pa in a.outcomes
            for vb, pb in b.outcomes
        ]
    if corr not in (-1, 1):
        raise ValidationError(f"Corr {corr} not in {{-1,0,1}}")
    a_items = list(a.outcomes)
    b_items = list(b.outcomes) if corr == 1 else list(reversed(b.outcomes))
    out = []
    i = j = 0
    ra, rb = a_items[0][1], b_items[0][1]
    while True:
        m = min(ra, rb)
        if m > 0:
            out.append((a_items[i][0], b_items[j][0], m))
        ra -= m
        rb -= m
        if ra <= PROB_TOL:
            i += 1
            if i == len(a_items):
                break
            ra = a_items[i][1]
        if rb <= PROB_TOL:
            j += 1
            if j == len(b_items):
                break
            rb = b_items[j][1]
    return out


# ---------------------------------------------------------------------------
# Aggregation and splitting

def aggregate_b_rates(trials) -> list:
    """One RatePoint per (subject, game): mean of the B flag over all trials."""
    groups = {}
    for t in trials:
        groups.setdefault((t.subj_id, t.game_id), []).append(t.chose_b)
    points = []
    for (subj, game), flags in sorted(groups.items()):
        n = len(flags)
        points.append(RatePoint(subj, game, sum(flags) / n, n))
    return points


def split_dataset(points, seed: int, test_per_subject: int = 5,
                  val_frac: float = 0.10) -> SplitAssignment:
    """Deterministic per-subject test holdout plus a uniform validation draw.

    Test games are sampled per subject from a stream keyed on (seed, subject)
    so the assignment is insensitive to subject ordering.
    """
    by_subj = {}
    for pt in points:
        by_subj.setdefault(pt.subj_id, []).append(pt.game_id)
    test = set()
    for subj in sorted(by_subj):
        games = sorted(by_subj[subj])
        if test_per_subject > 0 and len(games) <= test_per_subject:
            raise ValidationError(
                f"subject {subj} has only {len(games)} points; "
                f"need more than {test_per_subject}"
            )
        if test_per_subject > 0:
            rng = np.random.default_rng([seed, subj])
            chosen = rng.choice(len(games), size=test_per_subject, replace=False)
            test.update((subj, games[i]) for i in chosen)
    pool = sorted(
        (pt.subj_id, pt.game_id)
        for pt in points
        if (pt.subj_id, pt.game_id) not in test
    )
    n_val = int(round(val_frac * len(pool)))
    val = set()
    if n_val > 0:
        rng = np.random.default_rng([seed, 0x76616C])  # stream label "val"
        chosen = rng.choice(len(pool), size=n_val, replace=False)
        val = {pool[i] for i in chosen}
    train = {k for k in pool if k not in val}
    return SplitAssignment(frozenset(train), frozenset(val), frozenset(test), seed)


# ---------------------------------------------------------------------------
# Synthetic data

def _sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def synth_generate(n_subjects: int, n_games: int, trials_per_cell: int,
                   seed: int, games_per_subject: int = 30):
    """Desk-scale synthetic stand-in for the raw dataset.

    Gamble parameters are drawn from CPC-like ranges; each subject is
    assigned min(games_per_subject, n_games) games.  Choices come from a
    planted model, logistic in (EV_B - EV_A) plus a per-subject bias, so
    downstream models have real signal to find.
    """
    if min(n_subjects, n_games, trials_per_cell) < 1:
        raise ValidationError("all synth counts must be >= 1")
    if trials_per_cell > 25:
        raise ValidationError("trials_per_cell > 25 breaks the block layout")

    rng = np.random.default_rng([seed, 0x67656E])  # stream label "gen"
    problems = []
    for game in range(1, n_games + 1):
        ha = int(rng.integers(-5, 31))
        la = int(rng.integers(-10, ha + 1))
        p_ha = int(rng.integers(1, 101)) / 100.0
        shape = [LotShape.NONE, LotShape.NONE, LotShape.SYMM,
                 LotShape.RSKEW, LotShape.LSKEW][int(rng.integers(0, 5))]
        if shape is LotShape.NONE:
            lot_num = 1
        elif shape is LotShape.SYMM:
            lot_num = int(rng.choice([3, 5, 7, 9]))
        else:
            lot_num = int(rng.integers(2, 8))
        lot_val = int(rng.integers(-10, 31))
        hb = int(rng.integers(lot_val, lot_val + 41))
        p_hb = int(rng.integers(0, 101)) / 100.0
        if lot_num > 1 and p_hb == 1.0:
            p_hb = 0.95
        corr = int(rng.choice([-1, 0, 1]))
        amb = int(rng.random() < 0.1)
        problems.append(ChoiceProblem(
            game_id=game, ha=ha, p_ha=p_ha, la=la, hb=hb, p_hb=p_hb,
            lot_val=lot_val, lot_num=lot_num, lot_shape=shape,
            corr=corr, amb=amb,
        ))

    dev = {
        p.game_id: expand_gamble_b(p).mean() - expand_gamble_a(p).mean()
        for p in problems
    }
    per_subj = min(games_per_subject, n_games)
    trials = []
    for subj in range(1, n_subjects + 1):
        srng = np.random.default_rng([seed, 0x73756266, subj])  # "subj" stream
        bias = srng.normal(0.0, 1.0)
        games = srng.choice(n_games, size=per_subj, replace=False)
        for gi in sorted(int(g) + 1 for g in games):
            p_choose_b = _sigmoid(0.15 * dev[gi] + bias)
            for t in range(trials_per_cell):
                block = t // 5 + 1
                trials.append(TrialRecord(
                    subj_id=subj, game_id=gi, block=block, trial=t + 1,
                    chose_b=int(srng.random() < p_choose_b),
                    feedback=0 if block == 1 else 1,
                ))
    return problems, trials


# ---------------------------------------------------------------------------
# CSV I/O

RAW_COLUMNS = ["SubjID", "GameID", "Ha", "pHa", "La", "Hb", "pHb", "Lb",
               "LotNum", "LotShape", "Corr", "Amb", "Block", "Trial", "B",
               "Feedback"]
PROBLEM_COLUMNS = ["GameID", "Ha", "pHa", "La", "Hb", "pHb", "Lb", "LotNum",
                   "LotShape", "Corr", "Amb"]


def _problem_from_row(row, line_no) -> ChoiceProblem:
    try:
        return ChoiceProblem(
            game_id=int(row["GameID"]),
            ha=float(row["Ha"]), p_ha=float(row["pHa"]), la=float(row["La"]),
            hb=float(row["Hb"]), p_hb=float(row["pHb"]),
            lot_val=float(row["Lb"]), lot_num=int(row["LotNum"]),
            lot_shape=LotShape.from_label(row["LotShape"].strip()),
            corr=int(row["Corr"]), amb=int(row["Amb"]),
        )
    except ValidationError:
        raise
    except (KeyError, ValueError) as exc:
        raise RowParseError(line_no, str(exc)) from exc


def parse_raw_csv(path):
    """Read trial-level rows; returns (problems, trials).

    One ChoiceProblem per distinct GameID; later rows must agree with the
    first definition of their game.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in RAW_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        problems = {}
        trials = []
        for line_no, row in enumerate(reader, start=2):
            prob = _problem_from_row(row, line_no)
            known = problems.get(prob.game_id)
            if known is None:
                problems[prob.game_id] = prob
            elif known != prob:
                raise RowParseError(
                    line_no, f"conflicting definition of game {prob.game_id}"
                )
            try:
                trials.append(TrialRecord(
                    subj_id=int(row["SubjID"]), game_id=prob.game_id,
                    block=int(row["Block"]), trial=int(row["Trial"]),
                    chose_b=int(row["B"]), feedback=int(row["Feedback"]),
                ))
            except ValidationError:
                raise
            except ValueError as exc:
                raise RowParseError(line_no, str(exc)) from exc
    return [problems[g] for g in sorted(problems)], trials


def _shape_label(p: ChoiceProblem) -> str:
    return p.lot_shape.value


def write_raw_csv(path, problems, trials):
    by_game = {p.game_id: p for p in problems}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_COLUMNS)
        for t in trials:
            p = by_game[t.game_id]
            writer.writerow([
                t.subj_id, t.game_id, p.ha, p.p_ha, p.la, p.hb, p.p_hb,
                p.lot_val, p.lot_num, _shape_label(p), p.corr, p.amb,
                t.block, t.trial, t.chose_b, t.feedback,
            ])


def write_problems_csv(path, problems):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROBLEM_COLUMNS)
        for p in sorted(problems, key=lambda q: q.game_id):
            writer.writerow([
                p.game_id, p.ha, p.p_ha, p.la, p.hb, p.p_hb, p.lot_val,
                p.lot_num, _shape_label(p), p.corr, p.amb,
            ])


def read_problems_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in PROBLEM_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        return [
            _problem_from_row(row, line_no)
            for line_no, row in enumerate(reader, start=2)
        ]


def write_rates_csv(path, points):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["SubjID", "GameID", "BRate", "N"])
        for pt in sorted(points, key=lambda q: (q.subj_id, q.game_id)):
            writer.writerow([pt.subj_id, pt.game_id,
                             format(pt.b_rate, ".17g"), pt.n_trials])


def read_rates_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ["SubjID", "GameID", "BRate", "N"] if c not in header]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}")
        return [
            RatePoint(int(r["SubjID"]), int(r["GameID"]),
                      float(r["BRate"]), int(r["N"]))
            for r in reader
        ]


def write_split(path, split: SplitAssignment):
    lines = []
    for fold, keys in (("train", split.train_ids), ("val", split.val_ids),
                       ("test", split.test_ids)):
        lines.extend((s, g, fold) for s, g in keys)
    lines.sort()
    with open(path, "w", encoding="utf-8") as fh:
        for s, g, fold in lines:
            fh.write(f"{s},{g},{fold}\n")


def read_split(path, seed: int = 0) -> SplitAssignment:
    folds = {"train": set(), "val": set(), "test": set()}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                s, g, fold = line.split(",")
                folds[fold].add((int(s), int(g)))
            except (ValueError, KeyError) as exc:
                raise RowParseError(line_no, str(exc)) from exc
    return SplitAssignment(frozenset(folds["train"]), frozenset(folds["val"]),
                           frozenset(folds["test"]), seed)
