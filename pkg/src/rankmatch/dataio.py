"""CSV ingestion, synthetic SSLDL tasks and labeled/unlabeled splitting.

CSV dialect: UTF-8, LF line endings, comma separated, one header row
``f0,...,f{dim-1}`` optionally followed by ``y0,...,y{c-1}``. Numbers are
written with 17 significant digits so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    Dataset,
    EmptyInput,
    InconsistentWidth,
    InvalidDistribution,
    LabeledExample,
    ParseError,
    RankMatchError,
    UnlabeledExample,
    labeled_example,
    unlabeled_example,
)
from .model import ModelParams, predict

MIX_WEIGHT = 0.1
TEACHER_SCALE = 2.0


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _read_rows(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "missing header row") from None
        rows = [(reader.line_num, row) for row in reader if row]
    return [h.strip() for h in header], rows


def _split_header(header: list[str]) -> tuple[int, int]:
    dim = sum(1 for h in header if h.startswith("f"))
    c = sum(1 for h in header if h.startswith("y"))
    expected = [f"f{i}" for i in range(dim)] + [f"y{j}" for j in range(c)]
    if header != expected or dim < 1:
        raise ParseError(1, f"header must be f0..f{{dim-1}}[,y0..y{{c-1}}], got {header}")
    return dim, c


def _floats(lineno: int, cells: Sequence[str]) -> list[float]:
    try:
        return [float(cell) for cell in cells]
    except ValueError:
        raise ParseError(lineno, f"non-numeric cell in {list(cells)}") from None


def load_labeled_csv(path) -> list[LabeledExample]:
    header, rows = _read_rows(path)
    dim, c = _split_header(header)
    if c < 2:
        raise ParseError(1, "labeled files need at least two y columns")
    out = []
    for lineno, row in rows:
        if len(row) != dim + c:
            raise InconsistentWidth(lineno, f"expected {dim + c} cells, got {len(row)}")
        vals = _floats(lineno, row)
        try:
            out.append(labeled_example(vals[:dim], vals[dim:]))
        except RankMatchError as exc:
            raise InvalidDistribution(lineno, str(exc)) from exc
    return out


def load_unlabeled_csv(path) -> list[UnlabeledExample]:
    header, rows = _read_rows(path)
    dim, c = _split_header(header)
    if c:
        raise ParseError(1, "unlabeled files must not carry y columns")
    out = []
    for lineno, row in rows:
        if len(row) != dim:
            raise InconsistentWidth(lineno, f"expected {dim} cells, got {len(row)}")
        vals = _floats(lineno, row)
        try:
            out.append(unlabeled_example(vals))
        except RankMatchError as exc:
            raise ParseError(lineno, str(exc)) from exc
    return out


def _write(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_labeled_csv(path, examples: Sequence[LabeledExample], feature_dim: int, num_labels: int) -> None:
    header = [f"f{i}" for i in range(feature_dim)] + [f"y{j}" for j in range(num_labels)]
    _write(path, header, (np.concatenate([ex.features.values, ex.target.values]) for ex in examples))


def write_unlabeled_csv(path, examples: Sequence[UnlabeledExample], feature_dim: int) -> None:
    _write(path, [f"f{i}" for i in range(feature_dim)], (ex.features.values for ex in examples))


def load_dataset(labeled_path, unlabeled_path=None) -> Dataset:
    labeled = load_labeled_csv(labeled_path)
    unlabeled = load_unlabeled_csv(unlabeled_path) if unlabeled_path else []
    if not labeled:
        dims = _split_header(_read_rows(labeled_path)[0])
        return Dataset((), tuple(unlabeled), num_labels=dims[1], feature_dim=dims[0])
    return Dataset(tuple(labeled), tuple(unlabeled))


def _renormalize(p: np.ndarray) -> np.ndarray:
    # exact simplex sums are not guaranteed after mixing; fsum keeps it tight
    return p / math.fsum(p.tolist())


def synth_generate(
    n_labeled: int,
    m_unlabeled: int,
    n_test: int,
    dim: int,
    num_labels: int,
    noise_alpha: float = 0.0,
    seed: int = 1,
) -> tuple[Dataset, Dataset, ModelParams]:
    """Sample a random linear-softmax teacher and data labeled by it.

    Features are standard normal. With ``noise_alpha > 0`` each target is
    mixed with a Dirichlet(noise_alpha) draw at weight 0.1; with
    ``noise_alpha == 0`` targets are exactly the teacher's outputs.
    """
    if min(n_labeled, m_unlabeled, n_test) < 0:
        raise ValueError("counts must be >= 0")
    if dim < 1 or num_labels < 2:
        raise ValueError("need dim >= 1 and num_labels >= 2")
    if noise_alpha < 0:
        raise ValueError("noise_alpha must be >= 0")
    rng = np.random.default_rng(seed)
    teacher = ModelParams(
        rng.normal(0.0, TEACHER_SCALE / math.sqrt(dim), size=(num_labels, dim)),
        rng.normal(0.0, 0.5, size=num_labels),
    )
    total = n_labeled + m_unlabeled + n_test
    X = rng.standard_normal((total, dim))
    T = predict(teacher, X) if total else np.zeros((0, num_labels))
    if noise_alpha > 0 and total:
        noise = rng.dirichlet(np.full(num_labels, noise_alpha), size=total)
        T = (1 - MIX_WEIGHT) * T + MIX_WEIGHT * noise
        T = np.array([_renormalize(row) for row in T])

    def labeled(lo, hi):
        return tuple(labeled_example(X[i], T[i]) for i in range(lo, hi))

    train = Dataset(
        labeled(0, n_labeled),
        tuple(unlabeled_example(X[i]) for i in range(n_labeled, n_labeled + m_unlabeled)),
        num_labels=num_labels,
        feature_dim=dim,
    )
    test = Dataset(labeled(n_labeled + m_unlabeled, total), (), num_labels=num_labels, feature_dim=dim)
    return train, test, teacher


def split_labeled_fraction(
    full: Sequence[LabeledExample], fraction: float, seed: int
) -> tuple[list[LabeledExample], list[UnlabeledExample]]:
    """Keep labels on a seeded ``ceil(fraction * N)`` subset, strip the rest."""
    if not full:
        raise EmptyInput("nothing to split")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    order = np.random.default_rng(seed).permutation(len(full))
    keep = math.ceil(fraction * len(full) - 1e-9)
    labeled = [full[i] for i in order[:keep]]
    unlabeled = [UnlabeledExample(full[i].features) for i in order[keep:]]
    return labeled, unlabeled


def write_manifest(path, config: dict) -> None:
    Path(path).write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
