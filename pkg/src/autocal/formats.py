"""CSV and JSON formats read and written by the command line.

Sample CSV: a header containing ``y`` and ``pi`` (other columns, such as
``level_index``, are ignored).  Lines starting with ``#`` are comments.

Null model JSON: ``{"levels": [...], "probs": [...], "variances": [...]}``.

Every file the CLI writes starts with provenance: a ``#`` comment line for
CSV, top-level keys for JSON.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .core import NullModel, Sample
from .errors import ParseError, ValidationError
from .simulation import GammaLevelModel

FORMAT_VERSION = 1


def _data_lines(handle):
    for lineno, line in enumerate(handle, start=1):
        if line.lstrip().startswith("#") or not line.strip():
            continue
        yield lineno, line


def read_sample_csv(path) -> Sample:
    """Read a ``y,pi`` CSV; errors carry the data row and file line."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from exc
    with handle:
        lines = list(_data_lines(handle))
    if not lines:
        raise ParseError(f"{path}: no header line")
    header_line, header = lines[0]
    columns = [c.strip() for c in next(csv.reader([header]))]
    missing = [c for c in ("y", "pi") if c not in columns]
    if missing:
        raise ParseError(f"{path}: header lacks column(s) {', '.join(missing)}", line=header_line)
    iy, ipi = columns.index("y"), columns.index("pi")
    ys, pis = [], []
    for row, (lineno, text) in enumerate(lines[1:], start=1):
        fields = next(csv.reader([text]))
        if len(fields) != len(columns):
            raise ParseError(
                f"{path}: row {row} (line {lineno}) has {len(fields)} fields, expected {len(columns)}",
                row=row, line=lineno,
            )
        values = []
        for name, col in (("y", iy), ("pi", ipi)):
            cell = fields[col].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: row {row} (line {lineno}), column {name!r}: {cell!r} is not a number",
                    row=row, line=lineno, column=name,
                ) from None
            if not math.isfinite(value):
                raise ParseError(
                    f"{path}: row {row} (line {lineno}), column {name!r}: {cell!r} is not finite",
                    row=row, line=lineno, column=name,
                )
            values.append(value)
        if values[0] <= 0.0:
            raise ParseError(
                f"{path}: row {row} (line {lineno}): response {values[0]!r} is not positive",
                row=row, line=lineno, column="y",
            )
        ys.append(values[0])
        pis.append(values[1])
    if not ys:
        raise ParseError(f"{path}: no data rows")
    return Sample(ys, pis)


def write_sample_csv(sample: Sample, path, provenance: dict | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        if provenance is not None:
            fh.write(provenance_comment(provenance))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y", "pi"])
        for yi, pii in zip(sample.y.tolist(), sample.pi.tolist()):
            writer.writerow([repr(yi), repr(pii)])


def _load_json(source: str):
    """``source`` is inline JSON or a path to a JSON file."""
    text = source.strip()
    if not text.startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read model file {source}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model JSON is malformed: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ParseError("model JSON must be an object")
    return data


def read_null_model(source: str) -> NullModel:
    """Inline JSON, a JSON file, or ``table1`` for the built-in gamma example."""
    if source.strip().lower() == "table1":
        return GammaLevelModel.table1().null_model()
    data = _load_json(source)
    try:
        return NullModel.from_dict(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"invalid model: {exc}") from exc


def read_gamma_model(source: str | None) -> GammaLevelModel:
    """Gamma simulation model: ``levels``, ``probs`` and optional ``rate``.

    If ``variances`` is present it must equal ``levels / rate``.
    """
    if source is None or source.strip().lower() == "table1":
        return GammaLevelModel.table1()
    data = _load_json(source)
    if "levels" not in data or "probs" not in data:
        raise ValidationError("gamma model needs 'levels' and 'probs'")
    try:
        model = GammaLevelModel(tuple(data["levels"]), tuple(data["probs"]),
                                float(data.get("rate", 3.0)))
    except TypeError as exc:
        raise ValidationError(f"invalid gamma model: {exc}") from exc
    if "variances" in data:
        given = np.asarray(data["variances"], dtype=float)
        if given.shape != (model.K,) or not np.allclose(given, model.variances, rtol=1e-12):
            raise ValidationError("gamma model variances must equal levels / rate")
    return model


def provenance(command: str, seed: int | None, mc_draws: int | None, **extra) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "tool": "autocal",
        "version": __version__,
        "command": command,
        "seed": seed,
        "mc_draws": mc_draws,
    }
    out.update(extra)
    return out


def provenance_comment(prov: dict) -> str:
    keys = ("tool", "version", "format_version", "command", "seed", "mc_draws")
    return "# " + " ".join(f"{k}={prov.get(k)}" for k in keys) + "\n"


def dump_json(data, path=None) -> str:
    text = json.dumps(data, indent=2, sort_keys=False, default=_json_default) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_rows_csv(path, header, rows, prov: dict) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(provenance_comment(prov))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_matrix_csv(path, matrix, prov: dict) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    K = matrix.shape[1]
    header = [""] + [f"k{j + 1}" for j in range(K)]
    rows = [[f"k{i + 1}"] + [float(v) for v in matrix[i]] for i in range(matrix.shape[0])]
    write_rows_csv(path, header, rows, prov)
