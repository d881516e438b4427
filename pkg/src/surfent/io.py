"""Plain-text and JSON formats for sites, shapes, snapshots and results.

* Site sets: one ``x y`` pair per line.
* Polygons and curves: a JSON document with ``vertices`` and ``closed``, or
  ``samples`` as a list of ``{"t", "p", "d"}`` records.  Exact rational
  coordinates are written as ``"p/q"`` strings and read back exactly.
* Snapshots: a ``# {json}`` metadata line, then per snapshot a header line
  ``W H x0 y0`` followed by ``H`` rows of symbol characters.
* Tables: comma-separated, header row, LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .fields import Alphabet, Configuration, Window
from .geometry import Curve, CurveSample, Polygon, SiteKind, SiteSet

__all__ = [
    "format_sites",
    "parse_sites",
    "shape_to_dict",
    "shape_from_dict",
    "dump_shape",
    "load_shape",
    "format_snapshots",
    "parse_snapshots",
    "write_table",
    "read_table",
    "write_json",
    "read_json",
    "EXPERIMENT_COLUMNS",
    "BOUND_COLUMNS",
    "TRACE_COLUMNS",
]

EXPERIMENT_COLUMNS = ("experiment_id", "n_or_M", "depth", "value_nats", "std_error", "samples", "seed")
BOUND_COLUMNS = ("edge", "lambda", "factor", "length", "h", "contribution")
TRACE_COLUMNS = ("iteration", "gamma", "accepted")


# --- site sets -------------------------------------------------------------


def format_sites(sites: SiteSet | Iterable) -> str:
    pts = sites.to_list() if isinstance(sites, SiteSet) else [tuple(p) for p in sites]
    return "".join(f"{x} {y}\n" for x, y in pts)


def parse_sites(text: str, kind: SiteKind = SiteKind.LATTICE) -> SiteSet:
    pts = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'x y'")
        try:
            pts.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"line {lineno}: coordinates must be integers") from None
    return SiteSet(pts, kind)


# --- shapes ------------------------------------------------------------------


def _num_out(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


def _num_in(x):
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"not a coordinate: {x!r}")
    return x


def shape_to_dict(shape: Polygon | Curve) -> dict:
    if isinstance(shape, Polygon):
        return {
            "vertices": [[_num_out(x), _num_out(y)] for x, y in shape.vertices],
            "closed": shape.closed,
        }
    return {
        "samples": [{"t": s.t, "p": list(s.p), "d": list(s.d)} for s in shape.samples],
        "closed": shape.closed,
    }


def shape_from_dict(doc: dict) -> Polygon | Curve:
    if not isinstance(doc, dict):
        raise ValueError("shape document must be a JSON object")
    if "vertices" in doc:
        unknown = set(doc) - {"vertices", "closed"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        verts = [tuple(_num_in(c) for c in v) for v in doc["vertices"]]
        if any(len(v) != 2 for v in verts):
            raise ValueError("vertices are [x, y] pairs")
        return Polygon(tuple(verts), bool(doc.get("closed", True)))
    if "samples" in doc:
        unknown = set(doc) - {"samples", "closed"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        samples = []
        for s in doc["samples"]:
            if set(s) != {"t", "p", "d"}:
                raise ValueError("samples have exactly the keys t, p, d")
            samples.append(CurveSample(float(s["t"]), tuple(map(float, s["p"])), tuple(map(float, s["d"]))))
        return Curve(tuple(samples))
    raise ValueError("shape document needs 'vertices' or 'samples'")


def dump_shape(shape: Polygon | Curve, path: str | Path) -> None:
    Path(path).write_text(json.dumps(shape_to_dict(shape), indent=1) + "\n", encoding="utf-8")


def load_shape(path: str | Path) -> Polygon | Curve:
    return shape_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- snapshots -----------------------------------------------------------------


def format_snapshots(configs: Sequence[Configuration], metadata: dict | None = None) -> str:
    out = io.StringIO()
    meta = dict(metadata or {})
    if configs:
        meta.setdefault("alphabet", "".join(configs[0].alphabet.symbols))
    meta["count"] = len(configs)
    out.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    for conf in configs:
        w = conf.window
        out.write(f"{w.width} {w.height} {w.x0} {w.y0}\n")
        for row in conf.rows():
            out.write(row + "\n")
    return out.getvalue()


def parse_snapshots(text: str) -> tuple[list[Configuration], dict]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing metadata line")
    meta = json.loads(lines[0][2:])
    alphabet = Alphabet(tuple(meta.get("alphabet", "-+")))
    lut = {c: i for i, c in enumerate(alphabet.symbols)}
    configs, i = [], 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        try:
            W, H, x0, y0 = (int(v) for v in lines[i].split())
        except ValueError:
            raise ValueError(f"line {i + 1}: expected 'W H x0 y0'") from None
        rows = lines[i + 1 : i + 1 + H]
        if len(rows) != H or any(len(r) != W for r in rows):
            raise ValueError(f"line {i + 1}: snapshot rows do not match {W}x{H}")
        try:
            values = np.array([[lut[c] for c in r] for r in rows], dtype=np.int8)
        except KeyError as err:
            raise ValueError(f"unknown symbol {err.args[0]!r}") from None
        configs.append(Configuration(Window(W, H, x0, y0), values, alphabet))
        i += 1 + H
    if "count" in meta and meta["count"] != len(configs):
        raise ValueError(f"expected {meta['count']} snapshots, found {len(configs)}")
    return configs, meta


# --- tables and sidecars -------------------------------------------------------


def write_table(target: str | Path | TextIO, columns: Sequence[str], rows: Iterable[dict]) -> None:
    def _write(f):
        w = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n", extrasaction="raise")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(v) for k, v in row.items()})

    if hasattr(target, "write"):
        _write(target)
    else:
        with open(target, "w", encoding="utf-8", newline="") as f:
            _write(f)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return str(v).lower()
    return v


def read_table(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
