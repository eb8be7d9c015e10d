"""Result persistence: CSV with a declared header, JSON with a config echo,
and binary portable graymaps."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from ..core import InvalidParameterError

__all__ = ["to_csv", "read_csv", "to_json", "write_records", "read_pgm", "write_pgm"]


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(records, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for rec in records:
        w.writerow([_cell(rec.get(k)) for k in header])
    return buf.getvalue()


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def to_json(records, config_echo: dict, summary: dict | None = None) -> str:
    doc = {"config": config_echo, "records": list(records)}
    if summary:
        doc["summary"] = summary
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def write_records(records, header, path, fmt: str, config_echo: dict, summary=None) -> str:
    """Serialize and, if ``path`` is given, write; returns the text."""
    text = to_csv(records, header) if fmt == "csv" else to_json(records, config_echo, summary)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset just past the single
    whitespace byte that follows the last one."""
    out = []
    i = 0
    while len(out) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise InvalidParameterError("truncated PGM header")
        out.append(data[i:j])
        i = j
    return out, i + 1


def read_pgm(path) -> np.ndarray:
    """Binary (P5) graymap as floats in [0, 1]."""
    data = Path(path).read_bytes()
    toks, off = _tokens(data, 4)
    if toks[0] != b"P5":
        raise InvalidParameterError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(t) for t in toks[1:])
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    pix = np.frombuffer(data, dtype=dtype, count=width * height, offset=off)
    return pix.reshape(height, width).astype(float) / maxval


def write_pgm(path, image) -> None:
    img = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    pix = np.round(img * 255).astype(np.uint8)
    h, w = pix.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + pix.tobytes())
