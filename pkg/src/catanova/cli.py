"""
Command-line front end.

    catanova decompose data.csv --target y --out run/
    catanova explain run/decomposition.json queries.csv
    catanova importance run/decomposition.json
    catanova validate --seed 0

Input tables are delimiter-separated text with a header row. Every column
other than the target (and the optional weight column) is a categorical
feature whose labels are arbitrary strings; within a feature the labels are
coded in sorted order, so the last label in sort order is the reference
category of the basis.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure,
4 validation failure. ``CATANOVA_NUM_THREADS`` caps the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .anova import (Decomposition, assemble, component_norms, decompose, global_importances,
                    metrics, shapley)
from .basis import IndexKey
from .distribution import EmpiricalDistribution, HyperGrid, from_dataset
from .exceptions import (CatAnovaError, ConsistencyError, DataError, NumericalError,
                         OutOfSupportError)
from .gram import CoefficientVector
from .selection import Canonical, Neighborhood, SelectionConfig, VarianceRanked
from .validation import ValidationSizes, run_validation

logger = logging.getLogger(__name__)

SCHEMA = "catanova.decomposition/1"
THREADS_ENV = "CATANOVA_NUM_THREADS"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3, 4

ORDERINGS = ("canonical", "variance", "neighborhood")
FORMATS = ("report", "table")


# ---------------------------------------------------------------------------
# configuration and encoding
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    input: Path
    target: str
    output_dir: Path = Path(".")
    weight: Optional[str] = None
    max_order: Optional[int] = None
    rank_budget: Optional[int] = None
    rank_tolerance: float = 1e-9
    ordering: str = "canonical"
    adjacency: Optional[Path] = None
    prune_inactive: bool = False
    prune_threshold: float = 0.0
    output_format: str = "report"
    delimiter: str = ","
    hierarchical: bool = True

    def __post_init__(self):
        if self.ordering not in ORDERINGS:
            raise DataError(f"unknown ordering {self.ordering!r}; choose from {ORDERINGS}")
        if self.output_format not in FORMATS:
            raise DataError(f"unknown output format {self.output_format!r}; choose from {FORMATS}")
        if self.ordering == "neighborhood" and self.adjacency is None:
            raise DataError("the neighborhood ordering needs an adjacency file")
        # range checks shared with the library
        SelectionConfig(max_order=self.max_order, rank_budget=self.rank_budget,
                        rank_tolerance=self.rank_tolerance, prune_threshold=self.prune_threshold)

    def selection_config(self, features: Sequence[str]) -> SelectionConfig:
        if self.ordering == "canonical":
            ordering = Canonical()
        elif self.ordering == "variance":
            ordering = VarianceRanked()
        else:
            ordering = Neighborhood(read_adjacency(self.adjacency, features))
        return SelectionConfig(
            max_order=self.max_order,
            rank_budget=self.rank_budget,
            rank_tolerance=self.rank_tolerance,
            ordering=ordering,
            prune_inactive=self.prune_inactive,
            prune_threshold=self.prune_threshold,
            hierarchical=self.hierarchical,
        )

    def as_dict(self) -> dict:
        out = asdict(self)
        for k in ("input", "output_dir", "adjacency"):
            out[k] = None if out[k] is None else str(out[k])
        return out


@dataclass
class CategoryCodebook:
    """Per-feature bijection between labels and dense codes ``0 .. N_i - 1``."""

    features: List[str]
    labels: List[List[str]]
    _codes: List[Dict[str, int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise DataError("one label list per feature is required")
        self._codes = []
        for name, labs in zip(self.features, self.labels):
            codes = {lab: k for k, lab in enumerate(labs)}
            if len(codes) != len(labs):
                raise DataError(f"duplicate labels for feature {name!r}")
            self._codes.append(codes)

    @classmethod
    def fit(cls, features: Sequence[str], columns: Sequence[Sequence[str]]) -> "CategoryCodebook":
        return cls(list(features), [sorted(set(col)) for col in columns])

    @property
    def grid(self) -> HyperGrid:
        return HyperGrid(tuple(len(labs) for labs in self.labels))

    def encode_row(self, row: Sequence[str]) -> Tuple[int, ...]:
        out = []
        for i, lab in enumerate(row):
            try:
                out.append(self._codes[i][lab])
            except KeyError:
                raise DataError(f"unknown label {lab!r} for feature {self.features[i]!r}") from None
        return tuple(out)

    def decode_row(self, codes: Sequence[int]) -> Tuple[str, ...]:
        return tuple(self.labels[i][int(c)] for i, c in enumerate(codes))

    def as_dict(self) -> dict:
        return {"features": self.features, "labels": self.labels}


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------


@dataclass
class Table:
    header: List[str]
    rows: List[List[str]]
    lines: List[int]   # 1-based line number of each data row


def read_table(path, delimiter: str = ",") -> Table:
    """Read a delimited file with a header row; ragged rows are data errors."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = None
    rows, lines = [], []
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        row = [cell.strip() for cell in row]
        if header is None:
            header = row
            if len(set(header)) != len(header):
                raise DataError(f"{path}: duplicate column names in header")
            continue
        if len(row) != len(header):
            raise DataError(f"{path}, line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
        rows.append(row)
        lines.append(reader.line_num)
    if header is None:
        raise DataError(f"{path}: empty file")
    return Table(header, rows, lines)


def _numeric_column(table: Table, name: str, path) -> np.ndarray:
    j = table.header.index(name)
    out = np.empty(len(table.rows))
    for k, (row, line) in enumerate(zip(table.rows, table.lines)):
        try:
            out[k] = float(row[j])
        except ValueError:
            raise DataError(f"{path}, line {line}: column {name!r} value {row[j]!r} is not numeric") from None
        if not np.isfinite(out[k]):
            raise DataError(f"{path}, line {line}: column {name!r} value {row[j]!r} is not finite")
    return out


def read_adjacency(path, features: Sequence[str]) -> Dict[int, List[int]]:
    """
    One line per feature: ``name: neighbor neighbor ...`` (commas or blanks
    separate neighbors; ``#`` starts a comment).
    """
    index = {name: i for i, name in enumerate(features)}
    out: Dict[int, List[int]] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read adjacency file {path}: {exc}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(":") if ":" in line else line.partition(" ")
        names = [head.strip()] + rest.replace(",", " ").split()
        for name in names:
            if name not in index:
                raise DataError(f"{path}, line {num}: unknown feature {name!r}")
        out.setdefault(index[names[0]], []).extend(index[n] for n in names[1:])
    return out


@dataclass
class Dataset:
    codebook: CategoryCodebook
    dist: EmpiricalDistribution
    f_values: np.ndarray
    target: str


def load_dataset(path, target: str, weight: Optional[str] = None, delimiter: str = ",") -> Dataset:
    """
    Encode a table into an empirical distribution and per-support-row target.

    Duplicate rows are merged; when their targets disagree the weighted mean
    is used and a warning is logged.
    """
    table = read_table(path, delimiter)
    if target not in table.header:
        raise DataError(f"{path}: no target column {target!r}")
    if weight is not None and weight not in table.header:
        raise DataError(f"{path}: no weight column {weight!r}")
    if not table.rows:
        raise DataError(f"{path}: no data rows")
    y = _numeric_column(table, target, path)
    sw = _numeric_column(table, weight, path) if weight else np.ones(len(table.rows))
    if np.any(sw < 0):
        k = int(np.argmax(sw < 0))
        raise DataError(f"{path}, line {table.lines[k]}: negative weight")
    skip = {target} | ({weight} if weight else set())
    cols = [j for j, name in enumerate(table.header) if name not in skip]
    if not cols:
        raise DataError(f"{path}: no feature columns")
    features = [table.header[j] for j in cols]
    codebook = CategoryCodebook.fit(features, [[row[j] for row in table.rows] for j in cols])
    X = np.array([codebook.encode_row([row[j] for j in cols]) for row in table.rows], dtype=np.int64)
    dist = from_dataset(X, codebook.grid, sw)
    idx = np.array([dist.row_index.get(tuple(x), -1) for x in X.tolist()])
    keep = idx >= 0   # rows with zero weight drop out of the support
    total = np.bincount(idx[keep], weights=sw[keep], minlength=dist.r)
    f = np.bincount(idx[keep], weights=sw[keep] * y[keep], minlength=dist.r) / total
    spread = np.zeros(dist.r)
    np.maximum.at(spread, idx[keep], np.abs(y[keep] - f[idx[keep]]))
    if np.any(spread > 1e-12 * (1.0 + np.abs(f))):
        logger.warning("duplicate rows carry different targets; using their weighted mean")
    return Dataset(codebook, dist, f, target)


# ---------------------------------------------------------------------------
# decomposition files
# ---------------------------------------------------------------------------


def _hex(values) -> List[str]:
    return [float(v).hex() for v in np.asarray(values, dtype=np.float64).ravel()]


def _unhex(values) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values], dtype=np.float64)


def support_digest(dist: EmpiricalDistribution) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(dist.grid.cardinalities, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(dist.support, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(dist.weights, dtype="<f8").tobytes())
    return h.hexdigest()


def subset_label(A, features: Sequence[str]) -> str:
    return "{" + ",".join(features[i] for i in A) + "}"


def decomposition_document(dec: Decomposition, codebook: CategoryCodebook, target: str,
                           config: Optional[dict] = None) -> dict:
    dist = dec.dist
    return {
        "schema": SCHEMA,
        "target": target,
        "codebook": codebook.as_dict(),
        "grid": list(dist.grid.cardinalities),
        "support": dist.support.tolist(),
        "weights_hex": _hex(dist.weights),
        "support_sha256": support_digest(dist),
        "hierarchical": dec.hierarchical,
        "method": dec.coefficients.method,
        "keys": [{"A": list(k.A), "z": list(k.z)} for k in dec.keys],
        "coefficients_hex": _hex(dec.coefficients.c),
        "coefficients": [float(v) for v in dec.coefficients.c],
        "config": config or {},
    }


def write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_decomposition(path) -> Tuple[Decomposition, CategoryCodebook, dict]:
    """Rebuild a decomposition from its file; no access to the dataset is needed."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read decomposition file {path}: {exc}") from None
    if doc.get("schema") != SCHEMA:
        raise DataError(f"{path}: unsupported schema {doc.get('schema')!r}")
    try:
        codebook = CategoryCodebook(doc["codebook"]["features"], doc["codebook"]["labels"])
        dist = EmpiricalDistribution(HyperGrid(tuple(doc["grid"])), np.array(doc["support"], dtype=np.int64),
                                     _unhex(doc["weights_hex"]))
        keys = tuple(IndexKey(tuple(k["A"]), tuple(k["z"])) for k in doc["keys"])
        c = _unhex(doc["coefficients_hex"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed decomposition file ({exc})") from None
    if support_digest(dist) != doc.get("support_sha256"):
        raise DataError(f"{path}: support digest mismatch")
    for k in keys:
        k.check(dist.grid)
    coef = CoefficientVector(keys, c, doc.get("method", "qr"))
    dec = assemble(dist, keys, c, coefficients=coef, hierarchical=bool(doc.get("hierarchical", True)))
    return dec, codebook, doc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path_or_stream, header, rows) -> None:
    if hasattr(path_or_stream, "write"):
        w = csv.writer(path_or_stream, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_stream, "w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, header, rows)


def norm_table(dec: Decomposition, features: Sequence[str]) -> List[Tuple[str, int, float]]:
    """``(subset, order, ||f_A||^2)`` sorted by decreasing norm, then by subset."""
    norms = component_norms(dec)
    rows = [(subset_label(A, features), len(A), v, A) for A, v in norms.items()]
    rows.sort(key=lambda t: (-t[2], t[1], t[3]))
    return [(label, order, v) for label, order, v, _ in rows]


def cmd_decompose(config: RunConfig) -> dict:
    """Fit and write ``decomposition.json``, diagnostics, ``norms.csv`` and ``timings.json``."""
    t0 = time.perf_counter()
    data = load_dataset(config.input, config.target, config.weight, config.delimiter)
    t_load = time.perf_counter() - t0
    sel = config.selection_config(data.codebook.features)
    dec = decompose(data.dist, data.f_values, sel)
    t1 = time.perf_counter()
    diag = metrics(dec, data.f_values)
    t_metrics = time.perf_counter() - t1

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    features = data.codebook.features
    doc = decomposition_document(dec, data.codebook, data.target, config.as_dict())
    write_json(out / "decomposition.json", doc)

    table = norm_table(dec, features)
    summary = {
        "r": data.dist.r,
        "d": data.dist.d,
        "achieved_rank": diag.achieved_rank,
        "r_squared": diag.r_squared if diag.r_squared_defined else None,
        "mse": diag.mse,
        "relative_mse": diag.relative_mse if np.isfinite(diag.relative_mse) else None,
        "orthogonality_metric": diag.orthogonality_metric,
        "solver": dec.coefficients.method,
        "hierarchical": dec.hierarchical,
        "pruned_features": [features[i] for i in sorted(dec.selection.pruned_features)],
        "component_norms": [{"subset": s, "order": o, "squared_norm": v} for s, o, v in table],
    }
    if config.output_format == "report":
        write_json(out / "diagnostics.json", summary)
    else:
        flat = [(k, "" if v is None else v) for k, v in summary.items()
                if k not in ("component_norms", "pruned_features")]
        flat.append(("pruned_features", " ".join(summary["pruned_features"])))
        _write_csv(out / "diagnostics.csv", ["metric", "value"], flat)
    _write_csv(out / "norms.csv", ["subset", "order", "squared_norm"],
               [(s, o, _fmt(v)) for s, o, v in table])
    write_json(out / "timings.json", {"load_seconds": t_load, "decompose_seconds": dec.wall_time,
                                      "metrics_seconds": t_metrics})
    return summary


def cmd_explain(decomposition_path, queries_path, output=None, delimiter: str = ",") -> int:
    """
    Attribute every row of ``queries_path``; returns the number of rows that
    failed. Extra columns (for example the target) are ignored; failing rows
    get an error record and the others are still processed.
    """
    dec, codebook, doc = load_decomposition(decomposition_path)
    table = read_table(queries_path, delimiter)
    missing = [f for f in codebook.features if f not in table.header]
    if missing:
        raise DataError(f"{queries_path}: missing feature columns {missing}")
    cols = [table.header.index(f) for f in codebook.features]
    header = (["line", "status", "error", "baseline"] + [f"shap_{f}" for f in codebook.features]
              + ["fitted", "efficiency_gap"])
    rows, failures = [], 0
    for row, line in zip(table.rows, table.lines):
        try:
            x = codebook.encode_row([row[j] for j in cols])
            att = shapley(dec, x)
        except (DataError, OutOfSupportError) as exc:
            failures += 1
            msg = str(exc)
            if isinstance(exc, OutOfSupportError):
                msg = f"combination {tuple(row[j] for j in cols)} is not in the support"
            rows.append([line, "error", msg, "", *[""] * len(cols), "", ""])
            continue
        rows.append([line, "ok", "", _fmt(att.baseline), *map(_fmt, att.shap), _fmt(att.fitted),
                     _fmt(att.efficiency_gap)])
    if output is None:
        _write_csv(sys.stdout, header, rows)
    else:
        _write_csv(output, header, rows)
    return failures


def cmd_importance(decomposition_path, output=None) -> List[Tuple[str, float]]:
    """Features ranked by ``||f_i||_1``, largest first (ties keep column order)."""
    dec, codebook, _ = load_decomposition(decomposition_path)
    imp = global_importances(dec)
    order = sorted(range(len(imp)), key=lambda i: (-imp[i], i))
    ranked = [(codebook.features[i], float(imp[i])) for i in order]
    rows = [(name, _fmt(v)) for name, v in ranked]
    if output is None:
        _write_csv(sys.stdout, ["feature", "importance"], rows)
    else:
        _write_csv(output, ["feature", "importance"], rows)
    return ranked


def cmd_validate(sizes: ValidationSizes, seed: int, output=None, corrupt: bool = False) -> bool:
    bundle = run_validation(seed, sizes, corrupt=corrupt)
    payload = bundle.as_dict()
    if output is None:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        write_json(output, payload)
    for rep in bundle.reports:
        logger.info("%s %s max deviation %.3e (tol %.1e)", rep.name,
                    "pass" if rep.passed else "FAIL", rep.max_abs_deviation, rep.tolerance)
    return bundle.passed


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="catanova", description="Functional ANOVA and Shapley attributions for categorical data.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("decompose", help="fit a decomposition from a data file")
    d.add_argument("input", type=Path)
    d.add_argument("--target", required=True)
    d.add_argument("--weight")
    d.add_argument("--out", dest="output_dir", type=Path, default=Path("."))
    d.add_argument("--max-order", type=int)
    d.add_argument("--rank-budget", type=int)
    d.add_argument("--rank-tolerance", type=float, default=1e-9)
    d.add_argument("--ordering", choices=ORDERINGS, default="canonical")
    d.add_argument("--adjacency", type=Path)
    d.add_argument("--prune-inactive", action="store_true")
    d.add_argument("--prune-threshold", type=float, default=0.0)
    d.add_argument("--format", dest="output_format", choices=FORMATS, default="report")
    d.add_argument("--delimiter", default=",")
    d.add_argument("--no-hierarchical", dest="hierarchical", action="store_false",
                   help="use the plain basis columns without the hierarchical projection")

    e = sub.add_parser("explain", help="attribute query rows")
    e.add_argument("decomposition", type=Path)
    e.add_argument("queries", type=Path)
    e.add_argument("--output", type=Path)
    e.add_argument("--delimiter", default=",")

    i = sub.add_parser("importance", help="rank features by mean absolute main effect")
    i.add_argument("decomposition", type=Path)
    i.add_argument("--output", type=Path)

    v = sub.add_parser("validate", help="check the pipeline against brute-force oracles")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n-product", type=int, default=ValidationSizes.n_product)
    v.add_argument("--product-max-d", type=int, default=ValidationSizes.product_max_d)
    v.add_argument("--max-card", type=int, default=ValidationSizes.max_card)
    v.add_argument("--boolean-dims", type=int, nargs="*", default=list(ValidationSizes.boolean_dims))
    v.add_argument("--n-sparse", type=int, default=ValidationSizes.n_sparse)
    v.add_argument("--sparse-max-d", type=int, default=ValidationSizes.sparse_max_d)
    v.add_argument("--n-rank", type=int, default=ValidationSizes.n_rank)
    v.add_argument("--output", type=Path)
    v.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    return p


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return contextlib.nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _run(args) -> int:
    if args.command == "decompose":
        try:
            config = _run_config(args)
        except DataError as exc:
            raise UsageError(str(exc)) from None
        summary = cmd_decompose(config)
        logger.info("rank %d of r=%d, R^2 %s", summary["achieved_rank"], summary["r"], summary["r_squared"])
        return EXIT_OK
    if args.command == "explain":
        failures = cmd_explain(args.decomposition, args.queries, args.output, args.delimiter)
        if failures:
            logger.warning("%d query rows could not be explained", failures)
        return EXIT_OK
    if args.command == "importance":
        cmd_importance(args.decomposition, args.output)
        return EXIT_OK
    try:
        sizes = ValidationSizes(args.n_product, args.product_max_d, args.max_card, tuple(args.boolean_dims),
                                args.n_sparse, args.sparse_max_d, args.n_rank)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ok = cmd_validate(sizes, args.seed, args.output, args.corrupt)
    return EXIT_OK if ok else EXIT_VALIDATION


def _run_config(args) -> RunConfig:
    return RunConfig(
        input=args.input, target=args.target, output_dir=args.output_dir, weight=args.weight,
        max_order=args.max_order, rank_budget=args.rank_budget, rank_tolerance=args.rank_tolerance,
        ordering=args.ordering, adjacency=args.adjacency, prune_inactive=args.prune_inactive,
        prune_threshold=args.prune_threshold, output_format=args.output_format,
        delimiter=args.delimiter, hierarchical=args.hierarchical,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit():
            return _run(args)
    except UsageError as exc:
        print(f"catanova: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ConsistencyError) as exc:
        print(f"catanova: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OutOfSupportError, CatAnovaError) as exc:
        print(f"catanova: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
