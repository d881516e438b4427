import io
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surfent.fields import IidModel, SamplerConfig, Window, sample_iid
from surfent.geometry import Curve, Polygon, SiteKind, SiteSet, regular_polygon, square
from surfent.io import (
    EXPERIMENT_COLUMNS,
    dump_shape,
    format_sites,
    format_snapshots,
    load_shape,
    parse_sites,
    parse_snapshots,
    read_json,
    read_table,
    shape_from_dict,
    shape_to_dict,
    write_json,
    write_table,
)

coords = st.tuples(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))


@given(st.lists(coords, max_size=40, unique=True))
def test_sites_round_trip(pts):
    sites = SiteSet(pts, SiteKind.LATTICE)
    assert parse_sites(format_sites(sites)).to_list() == sites.to_list()


def test_sites_skip_comments_and_blank_lines():
    assert parse_sites("# header\n\n1 2\n  3 -4 \n").to_list() == [(1, 2), (3, -4)]


@pytest.mark.parametrize("text", ["1 2 3\n", "1.5 2\n", "x y\n"])
def test_sites_reject_malformed(text):
    with pytest.raises(ValueError):
        parse_sites(text)


def test_polygon_round_trip_is_exact(tmp_path):
    poly = Polygon.oriented([(0, 0), (Fraction(1, 3), 0), (Fraction(1, 3), Fraction(2, 7))])
    doc = shape_to_dict(poly)
    assert doc["vertices"][1] == ["1/3", 0]
    dump_shape(poly, tmp_path / "p.json")
    back = load_shape(tmp_path / "p.json")
    assert back == poly
    assert isinstance(back.vertices[2][1], Fraction)


def test_float_polygon_round_trip():
    poly = regular_polygon(7, 0.3, rotation=0.2)
    assert shape_from_dict(json.loads(json.dumps(shape_to_dict(poly)))) == poly


def test_curve_round_trip():
    c = Curve.circle(0.5, (0.1, -0.2), 64)
    back = shape_from_dict(json.loads(json.dumps(shape_to_dict(c))))
    assert [(s.t, s.p, s.d) for s in back.samples] == [(s.t, s.p, s.d) for s in c.samples]


@pytest.mark.parametrize(
    "doc",
    [
        {"vertices": [[0, 0], [1, 0], [0, 1]], "colour": "red"},
        {"samples": [], "extra": 1},
        {"points": []},
        {"vertices": [[0, 0, 0], [1, 0, 0], [0, 1, 0]]},
        {"vertices": [[0, 0], [True, 0], [0, 1]]},
        [1, 2],
    ],
)
def test_shape_rejects_bad_documents(doc):
    with pytest.raises(ValueError):
        shape_from_dict(doc)


def test_snapshots_round_trip():
    model = IidModel((0.2, 0.3, 0.5))
    confs = [sample_iid(model, Window(5, 3, 2, -1), SamplerConfig(seed=s)) for s in range(3)]
    text = format_snapshots(confs, {"seed": 0})
    back, meta = parse_snapshots(text)
    assert meta["count"] == 3 and meta["seed"] == 0
    assert back == confs
    assert all(np.array_equal(a.values, b.values) for a, b in zip(back, confs))


@pytest.mark.parametrize(
    "text",
    [
        "2 1 0 0\n++\n",
        '# {"alphabet": "-+"}\n2 2 0 0\n++\n',
        '# {"alphabet": "-+"}\n2 1 0 0\n+x\n',
        '# {"alphabet": "-+", "count": 2}\n2 1 0 0\n++\n',
    ],
)
def test_snapshots_reject_malformed(text):
    with pytest.raises(ValueError):
        parse_snapshots(text)


def test_table_round_trip_keeps_full_float_precision(tmp_path):
    row = {"experiment_id": "a", "n_or_M": 3, "depth": 6, "value_nats": 0.1 + 0.2, "std_error": 1e-17, "samples": 10, "seed": 0}
    write_table(tmp_path / "t.csv", EXPERIMENT_COLUMNS, [row])
    (back,) = read_table(tmp_path / "t.csv")
    assert float(back["value_nats"]) == 0.1 + 0.2
    assert float(back["std_error"]) == 1e-17
    assert b"\r" not in (tmp_path / "t.csv").read_bytes()


def test_table_rejects_unknown_columns():
    with pytest.raises(ValueError):
        write_table(io.StringIO(), ("a",), [{"a": 1, "b": 2}])


def test_json_handles_fractions_and_numpy(tmp_path):
    write_json(tmp_path / "x.json", {"f": Fraction(1, 3), "i": np.int64(4), "x": np.float64(0.5), "a": np.arange(3)})
    assert read_json(tmp_path / "x.json") == {"f": "1/3", "i": 4, "x": 0.5, "a": [0, 1, 2]}


def test_square_document_has_exact_vertices():
    doc = shape_to_dict(square(Fraction(1, 4)))
    assert all(isinstance(c, (int, str)) for v in doc["vertices"] for c in v)
