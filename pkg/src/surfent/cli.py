"""Command-line driver: ``surfent <command> [--key value ...] [--config FILE]``.

Every command reads a flat set of typed keys.  Values come from the
built-in defaults, then from ``--config`` (a ``key = value`` text file or
a JSON sidecar written by an earlier run), then from command-line flags;
later sources win.  With ``--out PREFIX`` a run writes its table to
``PREFIX.csv`` and a sidecar ``PREFIX.json`` holding the full config, the
seeds and the code version.  Feeding the sidecar back through ``--config``
reproduces the run.

Exit codes: 0 success, 2 configuration error, 3 estimation error.  Errors
are reported as one JSON line on standard error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from .deviations import (
    CachedOracle,
    RegularKGon,
    VertexFree,
    bound_functional,
    box_bound,
    markov_boundary_check,
    optimize_shape,
    polygon_bound,
)
from .entropy import (
    EstimationConfig,
    InsufficientSamplesError,
    contour_line_entropy,
    convergence_experiment,
    curve_entropy,
    fo_specific_entropy,
    line_entropy,
    make_bank_pair,
    polygon_entropy,
    relative_entropy_curve,
    relative_line_entropy,
    relative_polygon_entropy,
)
from .fields import (
    RNG_NAME,
    Boundary,
    IidModel,
    IsingModel,
    SamplerConfig,
    Window,
    sample_gibbs,
    sample_iid,
)
from .geometry import (
    Curve,
    LinearMap,
    Polygon,
    Slope,
    contour_approx,
    direction_slope,
    lattice_approx,
    lattice_length_factor,
    parse_slope,
    polygon_contour_approx,
    polygon_lattice_approx,
    polygon_ratio_lattice_to_length,
    ratio_lattice_to_length,
    regular_polygon,
    square,
)
from .io import (
    BOUND_COLUMNS,
    EXPERIMENT_COLUMNS,
    TRACE_COLUMNS,
    format_sites,
    format_snapshots,
    load_shape,
    shape_to_dict,
    write_json,
    write_table,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


# --- typed keys --------------------------------------------------------------


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int(v):
    if isinstance(v, bool):
        raise ValueError("not an integer")
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"not an integer: {v!r}")
    return int(str(v).replace("_", "")) if isinstance(v, str) else int(v)


def _float(v):
    if isinstance(v, bool):
        raise ValueError("not a number")
    return float(v)


def _str(v):
    if isinstance(v, (dict, list)):
        raise ValueError("not a string")
    return str(v)


@dataclass(frozen=True)
class Key:
    type: object
    default: object
    help: str


COMMON = {
    "seed": Key(_int, 0, "root seed of the run"),
    "out": Key(_str, None, "write PREFIX.csv and PREFIX.json"),
    "bits": Key(_bool, False, "display entropies in bits (files stay in nats)"),
}
SAMPLING = {
    "burn_in": Key(_int, 1000, "heat-bath burn-in sweeps"),
    "thinning": Key(_int, 10, "sweeps between snapshots"),
    "replicas": Key(_int, 4, "independent chains"),
}
ESTIMATION = {
    **SAMPLING,
    "depth": Key(_int, 6, "past window depth"),
    "samples": Key(_int, 100_000, "conditioning samples per window"),
    "pseudocount": Key(_float, 0.5, "Laplace smoothing per cell"),
    "groups": Key(_int, 20, "jackknife groups"),
    "bias_correction": Key(_bool, True, "report the jackknife bias-corrected value"),
}
SHAPE_HELP = "'square', 'regular:K', 'circle' or a JSON shape file"

COMMANDS: dict[str, dict] = {
    "geometry": {
        "mode": Key(_str, "lattice", "lattice, contour, ratio, polygon or polygon-contour"),
        "slope": Key(_str, "1/2", "p/q, an integer, or a real (irrational); suffix @y for the y axis"),
        "intercept": Key(_str, "0", "line intercept (p/q or real)"),
        "range": Key(_str, "0:10", "z_lo:z_hi"),
        "k": Key(_int, 10_000, "blowup factor for ratio mode"),
        "shape": Key(_str, "square", SHAPE_HELP),
        "area": Key(_str, "1", "area of built-in shapes"),
        "n": Key(_int, 1, "blowup factor for polygon modes"),
    },
    "sample": {
        **SAMPLING,
        "model": Key(_str, "ising:0.3", "iid:p1,p2,... or ising:beta[,h=..][,boundary=...]"),
        "width": Key(_int, 32, "window width"),
        "height": Key(_int, 32, "window height"),
        "count": Key(_int, 1, "snapshots per replica"),
    },
    "line-entropy": {
        **ESTIMATION,
        "model": Key(_str, "ising:0.3", "field model"),
        "slope": Key(_str, "0", "slope of the line"),
        "M": Key(_int, 32, "quadrature nodes for irrational slopes"),
    },
    "polygon-entropy": {
        **ESTIMATION,
        "model": Key(_str, "ising:0.3", "field model"),
        "shape": Key(_str, "square", SHAPE_HELP),
        "area": Key(_str, "1", "area of built-in shapes"),
        "M": Key(_int, 32, "quadrature nodes for irrational slopes"),
    },
    "curve-entropy": {
        **ESTIMATION,
        "model": Key(_str, "ising:0.3", "field model"),
        "shape": Key(_str, "circle", SHAPE_HELP),
        "area": Key(_str, "1", "area of built-in shapes"),
        "N": Key(_int, 32, "chords of the polygonization"),
        "M": Key(_int, 32, "quadrature nodes for irrational slopes"),
    },
    "contour-entropy": {
        **ESTIMATION,
        "model": Key(_str, "ising:0.3", "field model"),
        "slope": Key(_str, "1/2", "slope in [0, 1]"),
        "M": Key(_int, 32, "quadrature nodes"),
    },
    "rel-entropy": {
        **ESTIMATION,
        "model_minus": Key(_str, "ising:0.6,boundary=minus", "measure integrated against"),
        "model_plus": Key(_str, "ising:0.6,boundary=plus", "reference measure"),
        "slope": Key(_str, None, "line direction; omit for the axis average"),
        "shape": Key(_str, None, SHAPE_HELP),
        "area": Key(_str, "1", "area of built-in shapes"),
        "N": Key(_int, 32, "chords for curves"),
        "M": Key(_int, 32, "quadrature nodes"),
    },
    "converge": {
        **ESTIMATION,
        "model": Key(_str, "ising:0.3", "field model (periodic Ising or iid)"),
        "slope": Key(_str, "1/2", "slope in [0, 1]"),
        "intercept": Key(_str, "0", "line intercept"),
        "n_list": Key(_str, "100,1000,10000", "increasing line lengths"),
        "fields": Key(_int, 20, "independent fields per n"),
        "baseline": Key(_bool, False, "add the volume-order baseline"),
        "strip_height": Key(_int, 64, "height of the periodic strip"),
    },
    "bound": {
        "shape": Key(_str, "square", SHAPE_HELP),
        "area": Key(_str, "1", "area of built-in shapes"),
        "entropy_const": Key(_float, None, "the same relative entropy on every edge"),
        "entropies": Key(_str, None, "comma-separated relative entropy per edge"),
        "oracle": Key(_str, None, "const:h or axis:h0,h1 (h0 + h1 * lambda)"),
    },
    "optimize": {
        "area": Key(_float, 1.0, "droplet area alpha in (0, 1]"),
        "family": Key(_str, "free:8", "kgon:K1-K2 or free:V"),
        "oracle": Key(_str, "axis:1,0.5", "const:h, axis:h0,h1, or estimated"),
        "budget": Key(_int, 2000, "functional evaluations"),
        "resolution": Key(_float, 1.0, "oracle cache resolution in degrees"),
        "model_minus": Key(_str, "ising:0.6,boundary=minus", "for the estimated oracle"),
        "model_plus": Key(_str, "ising:0.6,boundary=plus", "for the estimated oracle"),
        **{k: v for k, v in ESTIMATION.items() if k not in ("bias_correction",)},
        "M": Key(_int, 8, "quadrature nodes of the estimated oracle"),
    },
    "markov-check": {
        "beta": Key(_float, 0.3, "inverse temperature"),
        "h": Key(_float, 0.0, "external field"),
        "shape": Key(_str, "1,1;5,1;5,5;1,5", "polygon vertices 'x,y;x,y;...' or a JSON file"),
        "window": Key(_str, "7x7", "WxH"),
        "boundary": Key(_str, "both", "contour, lattice or both"),
    },
}


def _keys(command: str) -> dict[str, Key]:
    return {**COMMON, **COMMANDS[command]}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _read_config_file(path: str, command: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON: {err.msg}") from None
        if "config" in doc:
            if doc.get("command", command) != command:
                raise ConfigError(f"{path} is a sidecar of '{doc['command']}', not '{command}'")
            doc = doc["config"]
        return dict(doc)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve_config(command: str, flags: dict, config_path: str | None) -> dict:
    """Merge defaults, the config file and explicit flags (in that order)."""
    keys = _keys(command)
    raw = {k: spec.default for k, spec in keys.items()}
    if config_path:
        from_file = _read_config_file(config_path, command)
        unknown = sorted(set(from_file) - set(keys))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        raw.update(from_file)
    raw.update(flags)
    out = {}
    for k, spec in keys.items():
        v = raw[k]
        if v is None:
            out[k] = None
            continue
        try:
            out[k] = spec.type(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{k}: invalid value {v!r}") from None
    return out


# --- parsing of model, slope and shape specs ------------------------------------


def parse_model(text: str):
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "iid":
            return IidModel(tuple(float(p) for p in rest.split(",")))
        if kind == "ising":
            parts = [s.strip() for s in rest.split(",") if s.strip()]
            if not parts:
                raise ValueError("ising needs beta")
            opts = {"beta": None, "h": "0", "boundary": "periodic"}
            for i, part in enumerate(parts):
                if "=" in part:
                    k, v = part.split("=", 1)
                    if k not in opts:
                        raise ValueError(f"unknown ising option {k!r}")
                    opts[k] = v
                elif i == 0:
                    opts["beta"] = part
                else:
                    raise ValueError(f"unexpected {part!r}")
            return IsingModel(float(opts["beta"]), float(opts["h"]), Boundary(opts["boundary"]))
    except (ValueError, TypeError) as err:
        raise ConfigError(f"model {text!r}: {err}") from None
    raise ConfigError(f"model {text!r}: kind must be iid or ising")


def _number(text: str):
    text = text.strip()
    try:
        return Fraction(text) if "/" in text or text.lstrip("-").isdigit() else float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _slope(text: str) -> Slope:
    try:
        return parse_slope(text)
    except (ValueError, ZeroDivisionError) as err:
        raise ConfigError(f"slope {text!r}: {err}") from None


def _shape(spec: str, area_text: str):
    area = _number(area_text)
    if area <= 0:
        raise ConfigError("area must be positive")
    try:
        if spec == "square":
            return square(area)
        if spec.startswith("regular:"):
            return regular_polygon(int(spec.split(":", 1)[1]), float(area))
        if spec == "circle":
            return Curve.circle(math.sqrt(float(area) / math.pi), (0.0, 0.0), 1024)
        if ";" in spec:
            verts = [tuple(_number(c) for c in v.split(",")) for v in spec.split(";")]
            return Polygon.oriented(verts)
        if Path(spec).is_file():
            return load_shape(spec)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(f"shape {spec!r}: {err}") from None
    raise ConfigError(f"shape {spec!r}: {SHAPE_HELP}")


def _oracle(spec: str):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "const":
            h = float(rest)
            return lambda v: h
        if kind == "axis":
            h0, h1 = (float(x) for x in rest.split(","))
            return lambda v: h0 + h1 * abs(direction_slope(v)[1])
    except ValueError as err:
        raise ConfigError(f"oracle {spec!r}: {err}") from None
    raise ConfigError(f"oracle {spec!r}: expected const:h or axis:h0,h1")


def _estimation(cfg: dict) -> EstimationConfig:
    try:
        sampler = SamplerConfig(cfg["seed"], cfg["burn_in"], cfg["thinning"], cfg["replicas"])
        return EstimationConfig(
            pseudocount=cfg["pseudocount"],
            n_groups=cfg["groups"],
            bias_correction=cfg.get("bias_correction", True),
            sampler=sampler,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _positive(cfg: dict, *names):
    for k in names:
        if cfg[k] is not None and cfg[k] < 1:
            raise ConfigError(f"{k} must be positive")


# --- commands ----------------------------------------------------------------------


@dataclass
class Result:
    text: str
    columns: tuple | None = None
    rows: list | None = None
    summary: dict | None = None
    seeds: dict | None = None


def _experiment_rows(name, est, cfg, n_or_M=None):
    return [
        {
            "experiment_id": name,
            "n_or_M": n_or_M if n_or_M is not None else (est.grid or ""),
            "depth": est.depth,
            "value_nats": est.value,
            "std_error": est.std_error,
            "samples": est.samples,
            "seed": cfg["seed"],
        }
    ]


def _display(columns, rows, bits):
    scale = 1 / math.log(2) if bits else 1.0
    out = io.StringIO()
    shown = [c.replace("_nats", "_bits") if bits else c for c in columns]
    shown_rows = []
    for r in rows:
        r = dict(r)
        for c in ("value_nats", "std_error", "spread", "baseline_mean", "baseline_spread"):
            if bits and isinstance(r.get(c), float):
                r[c] = r[c] * scale
        shown_rows.append({s: r[c] for s, c in zip(shown, columns)})
    write_table(out, shown, shown_rows)
    return out.getvalue()


def _estimate_result(name, est, cfg, n_or_M=None):
    rows = _experiment_rows(name, est, cfg, n_or_M)
    seeds = {"root": cfg["seed"], "replicas": [cfg["seed"] + r for r in range(cfg.get("replicas", 1))]}
    return Result(_display(EXPERIMENT_COLUMNS, rows, cfg["bits"]), EXPERIMENT_COLUMNS, rows, {**est.as_dict(), **_meta(est)}, seeds)


def _meta(est):
    keep = {}
    for k, v in est.metadata.items():
        if k in ("bank", "slope", "quadrature_spread", "polygon_deviation", "unseen_reference_mass", "low_accuracy"):
            keep[k] = v
    return {"metadata": keep}


def cmd_geometry(cfg):
    mode = cfg["mode"]
    if mode in ("lattice", "contour", "ratio"):
        slope = _slope(cfg["slope"])
        line = LinearMap(slope, _number(cfg["intercept"]))
        if mode == "ratio":
            if cfg["k"] < 1:
                raise ConfigError("k must be positive")
            r = ratio_lattice_to_length(slope.value, cfg["k"], (0, 1), line.intercept)
            limit = 1 / math.sqrt(1 + float(slope.value) ** 2)
            return Result(f"ratio {r!r}\nlimit {limit!r}\n", summary={"ratio": r, "limit": limit})
        try:
            lo, hi = (int(v) for v in cfg["range"].split(":"))
        except ValueError:
            raise ConfigError(f"range {cfg['range']!r}: expected lo:hi") from None
        if hi < lo:
            raise ConfigError("range must have lo <= hi")
        try:
            sites = lattice_approx(line, lo, hi) if mode == "lattice" else contour_approx(line, lo, hi)
        except ValueError as err:
            raise ConfigError(str(err)) from None
    elif mode in ("polygon", "polygon-contour"):
        poly = _shape(cfg["shape"], cfg["area"])
        if not isinstance(poly, Polygon):
            raise ConfigError("polygon modes need a polygon")
        _positive(cfg, "n")
        sites = polygon_lattice_approx(poly, cfg["n"]) if mode == "polygon" else polygon_contour_approx(poly, cfg["n"])
        summary = {
            "sites": len(sites),
            "ratio": polygon_ratio_lattice_to_length(poly, cfg["n"]),
            "limit": lattice_length_factor(poly),
        }
        rows = [{"x": x, "y": y} for x, y in sites]
        return Result(format_sites(sites), ("x", "y"), rows, summary)
    else:
        raise ConfigError(f"unknown geometry mode {mode!r}")
    rows = [{"x": x, "y": y} for x, y in sites]
    return Result(format_sites(sites), ("x", "y"), rows, {"sites": len(sites), "kind": sites.kind.value})


def cmd_sample(cfg):
    model = parse_model(cfg["model"])
    _positive(cfg, "width", "height", "count", "replicas")
    window = Window(cfg["width"], cfg["height"])
    confs = []
    if isinstance(model, IidModel):
        for r in range(cfg["replicas"] * cfg["count"]):
            confs.append(sample_iid(model, window, SamplerConfig(seed=cfg["seed"] + r)))
    else:
        try:
            sc = SamplerConfig(cfg["seed"], cfg["burn_in"], cfg["thinning"], cfg["replicas"])
        except ValueError as err:
            raise ConfigError(str(err)) from None
        confs = list(sample_gibbs(model, window, sc, cfg["count"]))
    meta = {"model": model.describe(), "seed": cfg["seed"]}
    text = format_snapshots(confs, meta)
    mags = [c.magnetization() for c in confs]
    seeds = {"root": cfg["seed"], "replicas": [cfg["seed"] + r for r in range(cfg["replicas"])]}
    return Result(text, summary={"snapshots": len(confs), "mean_magnetization": sum(mags) / len(mags)}, seeds=seeds)


def cmd_line_entropy(cfg):
    model, slope = parse_model(cfg["model"]), _slope(cfg["slope"])
    est = line_entropy(model, slope, cfg["depth"], cfg["samples"], cfg["M"], config=_estimation(cfg))
    return _estimate_result(f"line:{slope}", est, cfg)


def cmd_polygon_entropy(cfg):
    model, poly = parse_model(cfg["model"]), _shape(cfg["shape"], cfg["area"])
    if not isinstance(poly, Polygon):
        raise ConfigError("polygon-entropy needs a polygon; use curve-entropy for curves")
    est = polygon_entropy(model, poly, cfg["depth"], cfg["samples"], cfg["M"], config=_estimation(cfg))
    return _estimate_result(f"polygon:{cfg['shape']}", est, cfg)


def _as_curve(shape) -> Curve:
    return Curve.from_polygon(shape) if isinstance(shape, Polygon) else shape


def cmd_curve_entropy(cfg):
    model, c = parse_model(cfg["model"]), _as_curve(_shape(cfg["shape"], cfg["area"]))
    est = curve_entropy(model, c, cfg["N"], cfg["depth"], cfg["samples"], cfg["M"], config=_estimation(cfg))
    return _estimate_result(f"curve:{cfg['shape']}", est, cfg, cfg["N"])


def cmd_contour_entropy(cfg):
    model, slope = parse_model(cfg["model"]), _slope(cfg["slope"])
    lam = slope.value
    if not 0 <= lam <= 1:
        raise ConfigError("contour entropies need a slope in [0, 1]")
    est = contour_line_entropy(model, lam, cfg["depth"], cfg["samples"], cfg["M"], axis=slope.axis, config=_estimation(cfg))
    return _estimate_result(f"contour:{slope}", est, cfg)


def cmd_rel_entropy(cfg):
    minus, plus = parse_model(cfg["model_minus"]), parse_model(cfg["model_plus"])
    if minus.n_symbols != plus.n_symbols:
        raise ConfigError("both models need the same alphabet")
    ec = _estimation(cfg)
    d, n = cfg["depth"], cfg["samples"]
    if cfg["slope"] and cfg["shape"]:
        raise ConfigError("give a slope or a shape, not both")
    if cfg["slope"]:
        slope = _slope(cfg["slope"])
        est = relative_line_entropy(minus, plus, slope, d, n, cfg["M"], config=ec)
        name = f"rel-line:{slope}"
    elif cfg["shape"]:
        shape = _shape(cfg["shape"], cfg["area"])
        if isinstance(shape, Polygon):
            est = relative_polygon_entropy(minus, plus, shape, d, n, cfg["M"], config=ec)
        else:
            est = relative_entropy_curve(minus, plus, shape, cfg["N"], d, n, cfg["M"], config=ec)
        name = f"rel-shape:{cfg['shape']}"
    else:
        est = fo_specific_entropy(minus, plus, d, n, config=ec)
        name = "rel-axes"
    res = _estimate_result(name, est, cfg)
    res.seeds = {"root": cfg["seed"], "minus": "derive_seed(root, 0)", "plus": "derive_seed(root, 1)"}
    return res


def cmd_converge(cfg):
    model, slope = parse_model(cfg["model"]), _slope(cfg["slope"])
    try:
        n_list = [int(v) for v in cfg["n_list"].split(",")]
    except ValueError:
        raise ConfigError(f"n_list {cfg['n_list']!r}: expected comma-separated integers") from None
    _positive(cfg, "fields", "strip_height")
    line = LinearMap(slope, _number(cfg["intercept"]))
    try:
        rows_ = convergence_experiment(
            model,
            line,
            n_list,
            cfg["depth"],
            cfg["samples"],
            n_fields=cfg["fields"],
            config=_estimation(cfg),
            baseline=cfg["baseline"],
            strip_height=cfg["strip_height"],
            seed=cfg["seed"],
        )
    except InsufficientSamplesError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from None
    columns = EXPERIMENT_COLUMNS + ("spread", "baseline_mean", "baseline_spread")
    rows = [
        {
            "experiment_id": f"converge:{slope}",
            "n_or_M": r.n,
            "depth": cfg["depth"],
            "value_nats": r.mean,
            "std_error": r.std_error,
            "samples": r.n_fields,
            "seed": cfg["seed"],
            "spread": r.spread,
            "baseline_mean": "" if r.baseline_mean is None else r.baseline_mean,
            "baseline_spread": "" if r.baseline_spread is None else r.baseline_spread,
        }
        for r in rows_
    ]
    return Result(_display(columns, rows, cfg["bits"]), columns, rows, {"rows": len(rows)}, {"root": cfg["seed"]})


def cmd_bound(cfg):
    poly = _shape(cfg["shape"], cfg["area"])
    if not isinstance(poly, Polygon):
        raise ConfigError("bound needs a polygon")
    given = [k for k in ("entropy_const", "entropies", "oracle") if cfg[k] is not None]
    if len(given) != 1:
        raise ConfigError("give exactly one of entropy_const, entropies, oracle")
    if cfg["entropy_const"] is not None:
        if cfg["entropy_const"] < 0:
            raise ConfigError("entropy_const must be nonnegative")
        value = bound_functional(poly, [cfg["entropy_const"]] * len(poly.edges))
    elif cfg["entropies"] is not None:
        try:
            hs = [float(x) for x in cfg["entropies"].split(",")]
            value = bound_functional(poly, hs)
        except ValueError as err:
            raise ConfigError(str(err)) from None
    else:
        value = polygon_bound(poly, _oracle(cfg["oracle"]))
    summary = {"gamma": value.gamma, "area": poly.area, "edges": len(value.per_edge)}
    text = f"gamma {value.gamma!r}\n"
    if cfg["shape"] == "square" and cfg["entropy_const"] is not None:
        summary["box_bound"] = box_bound(poly.area, cfg["entropy_const"])
        text += f"box_bound {summary['box_bound']!r}\n"
    return Result(text, BOUND_COLUMNS, value.rows(), summary)


def _family(spec: str):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "kgon":
            lo, _, hi = rest.partition("-")
            return RegularKGon(tuple(range(int(lo), int(hi or lo) + 1)))
        if kind == "free":
            return VertexFree(int(rest))
    except ValueError:
        pass
    raise ConfigError(f"family {spec!r}: expected kgon:K1-K2 or free:V")


def _estimated_oracle(cfg):
    minus, plus = parse_model(cfg["model_minus"]), parse_model(cfg["model_plus"])
    banks = make_bank_pair(minus, plus, cfg["samples"], cfg["depth"], _estimation(cfg))

    def oracle(v):
        axis, lam = direction_slope(v)
        slope = Slope.irrational(abs(lam), axis)
        return relative_line_entropy(minus, plus, slope, cfg["depth"], cfg["samples"], cfg["M"], banks=banks).value

    return oracle


def cmd_optimize(cfg):
    if not 0 < cfg["area"] <= 1:
        raise ConfigError("area must lie in (0, 1]")
    _positive(cfg, "budget")
    if cfg["resolution"] <= 0:
        raise ConfigError("resolution must be positive")
    family = _family(cfg["family"])
    oracle = _estimated_oracle(cfg) if cfg["oracle"] == "estimated" else _oracle(cfg["oracle"])
    res = optimize_shape(cfg["area"], CachedOracle(oracle, cfg["resolution"]), family, cfg["budget"], cfg["seed"])
    rows = [{"iteration": i, "gamma": g, "accepted": ok} for i, g, ok in res.trace]
    summary = {
        "gamma": res.bound.gamma,
        "square_gamma": polygon_bound(square(cfg["area"]), oracle).gamma,
        "converged": res.converged,
        "evaluations": len(res.trace),
        "polygon": shape_to_dict(res.polygon),
    }
    text = f"gamma {res.bound.gamma!r}\nsquare_gamma {summary['square_gamma']!r}\nconverged {str(res.converged).lower()}\n"
    text += "".join(f"vertex {float(x)!r} {float(y)!r}\n" for x, y in res.polygon.vertices)
    return Result(text, TRACE_COLUMNS, rows, summary, {"root": cfg["seed"]})


def cmd_markov_check(cfg):
    try:
        model = IsingModel(cfg["beta"], cfg["h"])
        W, H = (int(v) for v in cfg["window"].lower().split("x"))
    except ValueError as err:
        raise ConfigError(str(err)) from None
    poly = _shape(cfg["shape"], "1")
    if not isinstance(poly, Polygon):
        raise ConfigError("markov-check needs a polygon")
    kinds = ["contour", "lattice"] if cfg["boundary"] == "both" else [cfg["boundary"]]
    rows = []
    for kind in kinds:
        try:
            rep = markov_boundary_check(model, poly, (W, H), kind)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        rows.append(
            {
                "boundary": rep.boundary,
                "deviation": rep.deviation,
                "interior": rep.interior,
                "boundary_sites": rep.boundary_sites,
                "leak_sites": rep.leak_sites,
                "patterns": rep.patterns,
            }
        )
    columns = ("boundary", "deviation", "interior", "boundary_sites", "leak_sites", "patterns")
    out = io.StringIO()
    write_table(out, columns, rows)
    return Result(out.getvalue(), columns, rows, {r["boundary"]: r["deviation"] for r in rows})


HANDLERS = {
    "geometry": cmd_geometry,
    "sample": cmd_sample,
    "line-entropy": cmd_line_entropy,
    "polygon-entropy": cmd_polygon_entropy,
    "curve-entropy": cmd_curve_entropy,
    "contour-entropy": cmd_contour_entropy,
    "rel-entropy": cmd_rel_entropy,
    "converge": cmd_converge,
    "bound": cmd_bound,
    "optimize": cmd_optimize,
    "markov-check": cmd_markov_check,
}


# --- entry point --------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surfent", description="Surface-order entropies of lattice random fields.")
    parser.add_argument("--version", action="version", version=f"surfent {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.removeprefix("cmd_").replace("_", " "))
        p.add_argument("--config", metavar="FILE", help="key = value file or a JSON sidecar")
        for key, spec in _keys(name).items():
            if spec.type is _bool:
                p.add_argument(_flag(key), dest=key, nargs="?", const="true", default=argparse.SUPPRESS, help=spec.help)
            else:
                p.add_argument(_flag(key), dest=key, default=argparse.SUPPRESS, help=f"{spec.help} (default {spec.default})")
    return parser


def _sidecar(command, cfg, result: Result) -> dict:
    return {
        "command": command,
        "config": cfg,
        "version": __version__,
        "rng": RNG_NAME,
        "seeds": result.seeds or {"root": cfg["seed"]},
        "results": result.summary or {},
    }


def _write_outputs(command, cfg, result: Result):
    prefix = Path(cfg["out"])
    if prefix.parent and not prefix.parent.exists():
        raise ConfigError(f"output directory does not exist: {prefix.parent}")
    if command == "sample":
        prefix.with_suffix(".txt").write_text(result.text, encoding="utf-8")
    elif result.columns is not None:
        write_table(prefix.with_suffix(".csv"), result.columns, result.rows)
    write_json(prefix.with_suffix(".json"), _sidecar(command, cfg, result))


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise ConfigError("missing command; run 'surfent --help'")
        flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
        cfg = resolve_config(ns.command, flags, ns.config)
        result = HANDLERS[ns.command](cfg)
        if cfg["out"]:
            _write_outputs(ns.command, cfg, result)
    except ConfigError as err:
        return _fail(EXIT_CONFIG, "config", str(err))
    except (InsufficientSamplesError, ValueError, ArithmeticError) as err:
        return _fail(EXIT_RUNTIME, "estimation", str(err))
    sys.stdout.write(result.text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
