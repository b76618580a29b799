"""Matrix and model persistence.

Dense matrices travel as comma-separated text with 17 significant digits,
which round-trips every float64 exactly.  Sparse count data can be read
from MatrixMarket coordinate files.  A model directory holds ``W.csv``,
``HX.csv``, ``HY.csv`` and a ``manifest.json`` describing the run.
"""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import BcnmfError, FactorModel, LikelihoodSpec, TrainConfig, TrainReport, as_nonneg

MODEL_FILES = ("W.csv", "HX.csv", "HY.csv")
MANIFEST = "manifest.json"


class ParseError(BcnmfError, ValueError):
    """Malformed input; ``line`` and ``column`` are 1-based (``column`` may be None)."""

    code = "ParseError"

    def __init__(self, message, path=None, line=None, column=None):
        where = ":".join(str(v) for v in (path, line, column) if v is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.line, self.column = path, line, column


class IoError(BcnmfError, OSError):
    code = "IoError"


class ManifestMismatch(BcnmfError, ValueError):
    code = "ManifestMismatch"


# --------------------------------------------------------------------------
# atomic text output


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def format_float(x) -> str:
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# dense CSV


def matrix_to_csv(A) -> str:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in A)


def write_matrix(path, A) -> None:
    atomic_write_text(path, matrix_to_csv(A))


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_csv(text: str, path=None) -> np.ndarray:
    """Parse a numeric CSV; a first row containing any non-numeric cell is a header."""
    rows = [r for r in csv.reader(_io.StringIO(text))]
    lines = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if lines and not all(_is_number(c.strip()) for c in lines[0][1]):
        lines = lines[1:]
    if not lines:
        raise ParseError("no numeric rows", path)
    width = len(lines[0][1])
    out = np.empty((len(lines), width))
    for r, (lineno, cells) in enumerate(lines):
        if len(cells) != width:
            raise ParseError(f"expected {width} fields, found {len(cells)}", path, lineno)
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell.strip())
            except ValueError:
                raise ParseError(f"not a number: {cell!r}", path, lineno, c + 1) from None
    return out


# --------------------------------------------------------------------------
# MatrixMarket coordinate


def parse_mtx(text: str, path=None) -> np.ndarray:
    """Densify a ``coordinate real|integer general`` MatrixMarket file; duplicates add up."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    header = lines[0].lower().split()
    if len(header) != 5 or header[0] != "%%matrixmarket" or header[1] != "matrix":
        raise ParseError("missing %%MatrixMarket matrix header", path, 1)
    if header[2] != "coordinate" or header[3] not in ("real", "integer") or header[4] != "general":
        raise ParseError(f"unsupported MatrixMarket variant: {' '.join(header[2:])}", path, 1)

    body = ((i + 1, ln) for i, ln in enumerate(lines) if i > 0 and ln.strip() and not ln.lstrip().startswith("%"))
    try:
        lineno, size = next(body)
    except StopIteration:
        raise ParseError("missing size line", path, len(lines)) from None
    fields = size.split()
    if len(fields) != 3:
        raise ParseError("size line needs 'rows cols entries'", path, lineno)
    dims = []
    for c, f in enumerate(fields):
        try:
            dims.append(int(f))
        except ValueError:
            raise ParseError(f"not an integer: {f!r}", path, lineno, c + 1) from None
    m, n, nnz = dims
    if m < 1 or n < 1 or nnz < 0:
        raise ParseError(f"invalid size {m} x {n} with {nnz} entries", path, lineno)

    dense = np.zeros((m, n))
    count = 0
    for lineno, ln in body:
        fields = ln.split()
        if len(fields) != 3:
            raise ParseError("entry line needs 'row col value'", path, lineno)
        try:
            i = int(fields[0])
        except ValueError:
            raise ParseError(f"not an integer: {fields[0]!r}", path, lineno, 1) from None
        try:
            j = int(fields[1])
        except ValueError:
            raise ParseError(f"not an integer: {fields[1]!r}", path, lineno, 2) from None
        try:
            v = float(fields[2])
        except ValueError:
            raise ParseError(f"not a number: {fields[2]!r}", path, lineno, 3) from None
        if not 1 <= i <= m:
            raise ParseError(f"row index {i} outside 1..{m}", path, lineno, 1)
        if not 1 <= j <= n:
            raise ParseError(f"column index {j} outside 1..{n}", path, lineno, 2)
        dense[i - 1, j - 1] += v
        count += 1
    if count != nnz:
        raise ParseError(f"size line declares {nnz} entries, found {count}", path, len(lines))
    return dense


def read_matrix(path, format: str | None = None, allow_negative: bool = False) -> np.ndarray:
    """Read a features x samples matrix from CSV or MatrixMarket.

    ``format`` defaults to the file suffix (``.mtx`` or anything else as CSV).
    Negative entries raise ``NegativeEntry`` unless ``allow_negative`` is set,
    which is meant for signed outputs such as PCA coordinates.
    """
    path = Path(path)
    fmt = (format or ("mtx" if path.suffix.lower() == ".mtx" else "csv")).lower()
    if fmt not in ("csv", "mtx"):
        raise ParseError(f"unknown format {fmt!r}", path)
    text = _read_text(path)
    A = parse_mtx(text, path) if fmt == "mtx" else parse_csv(text, path)
    if allow_negative:
        if not np.all(np.isfinite(A)):
            i, j = np.argwhere(~np.isfinite(A))[0]
            raise ParseError("non-finite entry", path, i + 1, j + 1)
        return A
    return as_nonneg(A, path.name)


def write_labels(path, labels) -> None:
    atomic_write_text(path, "label\n" + "".join(f"{int(v)}\n" for v in np.ravel(labels)))


def read_labels(path) -> np.ndarray:
    """Integer labels, one per line, as written by :func:`write_labels`."""
    A = parse_csv(_read_text(path), path)
    if A.shape[1] != 1:
        raise ParseError(f"labels file needs one column, found {A.shape[1]}", path)
    if not np.all(A == np.round(A)):
        raise ParseError("labels must be integers", path)
    return A[:, 0].astype(np.int64)


def write_table_stream(stream, header, rows) -> None:
    """Write a small CSV table to an open text stream; floats get full precision."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_table(path, header, rows) -> None:
    buf = _io.StringIO()
    write_table_stream(buf, header, rows)
    atomic_write_text(path, buf.getvalue())


# --------------------------------------------------------------------------
# model directories


def write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None


def model_manifest(model: FactorModel, report: TrainReport, lik: LikelihoodSpec, config: TrainConfig) -> dict:
    """Manifest fields in a fixed order.  Wall time is left out so reruns compare equal."""
    return {
        "K": model.K,
        "M": model.M,
        "N_X": model.HX.shape[1],
        "N_Y": model.HY.shape[1],
        "alpha": config.alpha,
        "likelihood": lik.kind.value,
        "theta": lik.theta,
        "pi": lik.pi,
        "seed": config.seed,
        "tol": config.tol,
        "max_iter": config.max_iter,
        "batch_size": config.batch_size,
        "eps": config.eps,
        "iterations": report.iterations_run,
        "termination": report.termination.value,
        "objective_trace": [float(v) for v in report.objective_trace],
    }


def write_model(model: FactorModel, report: TrainReport, directory, lik: LikelihoodSpec | None = None,
                config: TrainConfig | None = None, extra: dict | None = None) -> dict:
    """Persist ``model`` and its run description; returns the manifest written."""
    directory = Path(directory)
    manifest = model_manifest(model, report, lik or LikelihoodSpec.gaussian(), config or TrainConfig(rank=model.K))
    if extra:
        manifest.update(extra)
    for name, A in zip(MODEL_FILES, (model.W, model.HX, model.HY)):
        write_matrix(directory / name, A)
    write_json(directory / MANIFEST, manifest)
    return manifest


def read_model(directory) -> FactorModel:
    """Load a model directory and check its matrices against the manifest."""
    directory = Path(directory)
    manifest = read_json(directory / MANIFEST)
    W, HX, HY = (read_matrix(directory / name) for name in MODEL_FILES)
    K = manifest.get("K")
    expected = {
        "W": (manifest.get("M"), K, W.shape),
        "HX": (K, manifest.get("N_X"), HX.shape),
        "HY": (K, manifest.get("N_Y"), HY.shape),
    }
    for name, (rows, cols, shape) in expected.items():
        for want, got, axis in ((rows, shape[0], "rows"), (cols, shape[1], "columns")):
            if want is not None and want != got:
                raise ManifestMismatch(f"{name}.csv has {got} {axis}, manifest says {want}")
    try:
        return FactorModel(W, HX, HY)
    except BcnmfError as exc:
        raise ManifestMismatch(str(exc)) from exc
