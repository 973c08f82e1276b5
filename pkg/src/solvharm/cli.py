"""Command line front end: config parsing, pipeline runs, mesh and report export.

Subcommands
-----------
synth    potential -> OBJ mesh (one object per lambda slice) + CSV + report
verify   CSV produced by synth or gallery, plus a group descriptor -> report
split    seeded random loop elements -> factor report (both factorizations)
gallery  named closed-form fixture -> mesh + its designated residual checks
oracle   closed-form holomorphic frame against RK4 integration, per lambda

Artifacts are deterministic: fixed "%.17g" float formatting, sorted JSON
keys, no timestamps, seeded randomness only. Every report embeds the
sha256 of the raw config file, the loop band, the grid spacing,
discarded-mass diagnostics and one pass/fail entry per check.

Exit codes: 0 success, 2 unusable configuration, 3 numerical failure
(a raised BandOverflow/NonConvergent, a masked fraction of 1% or more,
or a failed check; the diagnostic is always written into the report).
"""

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__
from .dpw import (
    HoloPoly,
    MapGrid,
    PotentialSpec,
    default_lambdas,
    ode_oracle,
    poly_zero,
    solve_step1,
    synthesize,
)
from .errors import SolvharmError
from .gallery import (
    nil_from_holomorphic,
    se2_check_pair,
    sol3_primitive,
    sol3_primitivity_residual,
    vacuum_map,
)
from .laurent import PIPELINE_BAND, LaurentLoop, nonnegative_part
from .liegroup import (
    GroupSpec,
    MetricTensor,
    SolvLoopElement,
    SolvParams,
    levi_civita,
    nil3_algebra,
    solv_algebra,
    solv_mul,
)
from .loopfactor import RECONSTRUCT_TOL, birkhoff_split, check_reality, iwasawa_split
from .verify import (
    admissibility_residual,
    flatness_residual,
    metric_harmonicity_residual,
    neutral_harmonicity_residual,
    numeric_mc_form,
    torsion_free_residual,
)

UNIT_CIRCLE_TOL = 1e-12
CSV_COLUMNS = "x,y,lambda_re,lambda_im,phi1,phi2,phi3"
DEFAULT_TOLERANCES = {"residual": 1e-6, "reconstruct": RECONSTRUCT_TOL, "oracle": 1e-8}
GALLERY_NAMES = (
    "horosphere",
    "hyperbolic-paraboloid",
    "se2-vacuum",
    "sol3-primitive",
    "vertical-plane",
)


class ConfigError(Exception):
    """Unusable configuration; mapped to exit code 2."""


@dataclass
class RunConfig:
    """One validated run: command, inputs, grid, lambdas, outputs, tolerances."""

    command: str
    potential: PotentialSpec | None = None
    domain: tuple = (-1.0, 1.0, -1.0, 1.0)
    n_x: int = 33
    n_y: int = 33
    lambdas: tuple = ()
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str = "."
    prefix: str = "run"
    group: GroupSpec | None = None
    verify_input: str | None = None
    split_params: dict = field(default_factory=dict)
    oracle_params: dict = field(default_factory=dict)
    gallery_name: str | None = None
    config_sha256: str | None = None

    def __post_init__(self):
        if self.command not in ("synth", "verify", "split", "gallery", "oracle"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.n_x < 5 or self.n_y < 5:
            raise ConfigError("grid resolution must be at least 5 in each direction")
        for lam in self.lambdas:
            if abs(abs(lam) - 1.0) > UNIT_CIRCLE_TOL:
                raise ConfigError(f"lambda {lam} is not on the unit circle")


def _fail(msg):
    raise ConfigError(msg)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _pair(v, what):
    if not (isinstance(v, list) and len(v) == 2 and all(_is_num(t) for t in v)):
        _fail(f"{what} must be a [re, im] pair of numbers")
    return complex(float(v[0]), float(v[1]))


def _poly(v, what):
    # coefficient pairs [re, im], lowest degree first; [] is the zero polynomial
    if not isinstance(v, list):
        _fail(f"{what} must be a list of [re, im] coefficient pairs")
    if not v:
        return poly_zero()
    return HoloPoly(tuple(_pair(t, f"{what}[{i}]") for i, t in enumerate(v)))


def _known_keys(section, d, keys):
    extra = sorted(set(d) - set(keys))
    if extra:
        _fail(f"unknown keys in [{section}]: {', '.join(extra)}")


def _snap(v):
    # keep axis values exact so roots of unity hit lambda = +-1, +-i on
    # the nose and coincide with the slice synthesize always appends
    for t in (0.0, 1.0, -1.0):
        if abs(v - t) < 1e-15:
            return t
    return float(v)


def _roots_of_unity(k):
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        _fail("lambda count must be a positive integer")
    if k == 8:
        return tuple(default_lambdas())
    out = []
    for j in range(k):
        lam = np.exp(2j * np.pi * j / k)
        out.append(complex(_snap(lam.real), _snap(lam.imag)))
    return tuple(out)


def _lambdas_from_flag(text):
    s = text.strip()
    try:
        return _roots_of_unity(int(s))
    except ValueError:
        pass
    vals = []
    for part in s.split(","):
        try:
            vals.append(complex(part.strip()))
        except ValueError:
            _fail(f"cannot parse lambda value {part.strip()!r}")
    if not vals:
        _fail("empty lambda list")
    return tuple(vals)


def _parse_potential(d):
    _known_keys("potential", d, {"mu", "xi1", "xi2", "xi3", "base_point", "band"})
    mu = d.get("mu", [0.0, 0.0])
    if not (isinstance(mu, list) and len(mu) == 2 and all(_is_num(t) for t in mu)):
        _fail("potential.mu must be [mu1, mu2]")
    params = SolvParams(float(mu[0]), float(mu[1]))
    xi = [_poly(d.get(k, []), f"potential.{k}") for k in ("xi1", "xi2", "xi3")]
    base = _pair(d.get("base_point", [0.0, 0.0]), "potential.base_point")
    band = d.get("band", PIPELINE_BAND)
    if not isinstance(band, int) or isinstance(band, bool) or band < 2:
        _fail("potential.band must be an integer of at least 2")
    try:
        return PotentialSpec(xi[0], xi[1], xi[2], params, base, band)
    except (ValueError, SolvharmError) as e:
        _fail(f"potential: {e}")


def _parse_grid(d):
    _known_keys("grid", d, {"domain", "resolution"})
    dom = d.get("domain", [-1.0, 1.0, -1.0, 1.0])
    if not (isinstance(dom, list) and len(dom) == 4 and all(_is_num(t) for t in dom)):
        _fail("grid.domain must be [x0, x1, y0, y1]")
    dom = tuple(float(t) for t in dom)
    if not (dom[0] < dom[1] and dom[2] < dom[3]):
        _fail("grid.domain must satisfy x0 < x1 and y0 < y1")
    res = d.get("resolution", 33)
    if isinstance(res, int) and not isinstance(res, bool):
        n_x = n_y = res
    elif (
        isinstance(res, list)
        and len(res) == 2
        and all(isinstance(t, int) and not isinstance(t, bool) for t in res)
    ):
        n_x, n_y = res
    else:
        _fail("grid.resolution must be an integer or [n_x, n_y]")
    if n_x >= 5 and n_y >= 5:
        hx = (dom[1] - dom[0]) / (n_x - 1)
        hy = (dom[3] - dom[2]) / (n_y - 1)
        if abs(hx - hy) > 1e-9 * max(hx, hy):
            _fail("grid spacing must match in x and y")
    return dom, n_x, n_y


def _parse_lambdas(d):
    _known_keys("lambdas", d, {"count", "values"})
    if "values" in d and "count" in d:
        _fail("give lambdas.count or lambdas.values, not both")
    if "values" in d:
        vals = d["values"]
        if not (isinstance(vals, list) and vals):
            _fail("lambdas.values must be a nonempty list of [re, im] pairs")
        return tuple(_pair(v, f"lambdas.values[{i}]") for i, v in enumerate(vals))
    return _roots_of_unity(d.get("count", 8))


def _parse_tolerances(d):
    _known_keys("tolerances", d, set(DEFAULT_TOLERANCES))
    tols = dict(DEFAULT_TOLERANCES)
    for key in DEFAULT_TOLERANCES:
        if key in d:
            v = d[key]
            if not _is_num(v) or not 0.0 < float(v) < 1.0:
                _fail(f"tolerances.{key} must be a number in (0, 1)")
            tols[key] = float(v)
    return tols


def _parse_output(d):
    _known_keys("output", d, {"dir", "prefix"})
    out_dir = d.get("dir", ".")
    prefix = d.get("prefix", "run")
    if not isinstance(out_dir, str) or not out_dir:
        _fail("output.dir must be a nonempty string")
    if not isinstance(prefix, str) or not prefix or "/" in prefix or "\\" in prefix:
        _fail("output.prefix must be a plain file name stem")
    return out_dir, prefix


def _parse_verify(d, pot_mu):
    _known_keys("verify", d, {"input", "group", "mu"})
    if "input" not in d or not isinstance(d["input"], str):
        _fail("verify.input must name the CSV to check")
    kind = d.get("group", "solv")
    if kind not in ("solv", "nil3", "se2"):
        _fail("verify.group must be solv, nil3 or se2")
    if kind == "solv":
        mu = d.get("mu", pot_mu)
        if mu is None:
            _fail("verify.mu (or a [potential] section) is required for the solv group")
        if not (isinstance(mu, list) and len(mu) == 2 and all(_is_num(t) for t in mu)):
            _fail("verify.mu must be [mu1, mu2]")
        group = GroupSpec("solv", SolvParams(float(mu[0]), float(mu[1])))
    else:
        group = GroupSpec(kind)
    return d["input"], group


def _parse_split(d, pot_mu):
    _known_keys("split", d, {"count", "band", "seed", "scale", "mu"})

    def intval(key, default, low):
        v = d.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < low:
            _fail(f"split.{key} must be an integer of at least {low}")
        return v

    count = intval("count", 10, 1)
    band = intval("band", 6, 2)
    seed = intval("seed", 0, 0)
    scale = d.get("scale", 0.5)
    if not _is_num(scale) or not 0.0 < float(scale) <= 1.0:
        _fail("split.scale must be a number in (0, 1]")
    mu = d.get("mu", pot_mu if pot_mu is not None else [1.0, 1.0])
    if not (isinstance(mu, list) and len(mu) == 2 and all(_is_num(t) for t in mu)):
        _fail("split.mu must be [mu1, mu2]")
    return {
        "count": count,
        "band": band,
        "seed": seed,
        "scale": float(scale),
        "mu": [float(mu[0]), float(mu[1])],
    }


def _parse_oracle(d, domain):
    _known_keys("oracle", d, {"steps", "points"})
    steps = d.get("steps", 512)
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 16:
        _fail("oracle.steps must be an integer of at least 16")
    if "points" in d:
        pts = d["points"]
        if not (isinstance(pts, list) and pts):
            _fail("oracle.points must be a nonempty list of [re, im] pairs")
        points = tuple(_pair(v, f"oracle.points[{i}]") for i, v in enumerate(pts))
    else:
        x0, x1, y0, y1 = domain
        points = (
            complex(x0, y0),
            complex(x1, y0),
            complex(x0, y1),
            complex(x1, y1),
            complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
        )
    return {"steps": steps, "points": points}


def load_config(args) -> RunConfig:
    """Build a validated RunConfig from a parsed command line."""
    command = args.command
    raw = {}
    sha = None
    if args.config is not None:
        path = Path(args.config)
        try:
            raw_bytes = path.read_bytes()
        except OSError as e:
            _fail(f"cannot read {path}: {e}")
        sha = hashlib.sha256(raw_bytes).hexdigest()
        try:
            raw = tomllib.loads(raw_bytes.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as e:
            _fail(f"cannot parse {path}: {e}")
    elif command != "gallery":
        _fail(f"{command} needs a config file")
    _known_keys(
        "top level",
        raw,
        {"potential", "grid", "lambdas", "tolerances", "output", "verify", "split", "oracle"},
    )

    # flag overrides are applied to the raw tables so one construction
    # path validates everything; the sha stays that of the file itself
    if getattr(args, "band", None) is not None:
        raw.setdefault("potential", {})["band"] = args.band
    if getattr(args, "grid", None) is not None:
        raw.setdefault("grid", {})["resolution"] = _resolution_from_flag(args.grid)
    if getattr(args, "lambdas", None) is not None:
        lams = _lambdas_from_flag(args.lambdas)
        raw["lambdas"] = {"values": [[v.real, v.imag] for v in lams]}
    if getattr(args, "out", None) is not None:
        raw.setdefault("output", {})["dir"] = args.out
    if getattr(args, "tol", None) is not None:
        if not 0.0 < args.tol < 1.0:
            _fail("--tol must be in (0, 1)")
        key = {"split": "reconstruct", "oracle": "oracle"}.get(command, "residual")
        raw.setdefault("tolerances", {})[key] = args.tol

    domain, n_x, n_y = _parse_grid(raw.get("grid", {}))
    tolerances = _parse_tolerances(raw.get("tolerances", {}))
    out_dir, prefix = _parse_output(raw.get("output", {}))

    potential = None
    pot_mu = None
    if "potential" in raw:
        potential = _parse_potential(raw["potential"])
        pot_mu = [potential.params.mu1, potential.params.mu2]
    if command in ("synth", "oracle") and potential is None:
        _fail(f"{command} needs a [potential] section")

    if "lambdas" in raw:
        lambdas = _parse_lambdas(raw["lambdas"])
    elif command == "oracle":
        # complex(0, -1), not -1j: the latter carries re = -0.0 into reports
        lambdas = (1 + 0j, -1 + 0j, 1j, complex(0.0, -1.0))
    else:
        lambdas = tuple(default_lambdas())

    verify_input = None
    group = None
    if command == "verify":
        verify_input, group = _parse_verify(raw.get("verify", {}), pot_mu)

    split_params = _parse_split(raw.get("split", {}), pot_mu) if command == "split" else {}
    oracle_params = _parse_oracle(raw.get("oracle", {}), domain) if command == "oracle" else {}

    return RunConfig(
        command=command,
        potential=potential,
        domain=domain,
        n_x=n_x,
        n_y=n_y,
        lambdas=lambdas,
        tolerances=tolerances,
        out_dir=out_dir,
        prefix=prefix,
        group=group,
        verify_input=verify_input,
        split_params=split_params,
        oracle_params=oracle_params,
        gallery_name=getattr(args, "name", None),
        config_sha256=sha,
    )


def _resolution_from_flag(text):
    s = text.strip().lower()
    try:
        if "x" in s:
            a, b = s.split("x")
            return [int(a), int(b)]
        return int(s)
    except ValueError:
        _fail(f"cannot parse grid resolution {text!r}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        return [float(obj.real), float(obj.imag)]
    return obj


def _write_report(path, report):
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")


def _slices_of(grid):
    return grid.lambda_slices if grid.lambda_slices else [(1 + 0j, grid.points)]


def _write_csv(path, grid):
    xs, ys = grid.xs, grid.ys
    lines = [CSV_COLUMNS]
    for lam, arr in _slices_of(grid):
        for iy in range(grid.n_y):
            for ix in range(grid.n_x):
                v = arr[iy, ix]
                lines.append(
                    "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g"
                    % (xs[ix], ys[iy], lam.real, lam.imag, v[0], v[1], v[2])
                )
    path.write_text("\n".join(lines) + "\n")


def _write_obj(path, grid):
    # one object per lambda slice; vertex indices are global and 1-based.
    # masked vertices sit at the origin and no face touches a masked cell
    lines = ["# solvharm mesh"]
    n_x, n_y = grid.n_x, grid.n_y
    mask = grid.mask
    for k, (lam, arr) in enumerate(_slices_of(grid)):
        lines.append(f"o slice_{k}")
        lines.append("# lambda %.17g %.17g" % (lam.real, lam.imag))
        base = k * n_x * n_y
        for iy in range(n_y):
            for ix in range(n_x):
                v = arr[iy, ix]
                lines.append("v %.17g %.17g %.17g" % (v[0], v[1], v[2]))
        for iy in range(n_y - 1):
            for ix in range(n_x - 1):
                if (
                    mask[iy, ix]
                    or mask[iy, ix + 1]
                    or mask[iy + 1, ix]
                    or mask[iy + 1, ix + 1]
                ):
                    continue
                a = base + iy * n_x + ix + 1
                lines.append(f"f {a} {a + 1} {a + n_x + 1} {a + n_x}")
    path.write_text("\n".join(lines) + "\n")


def _check_row(rep, tol, lam=None):
    row = {
        "name": rep.name,
        "max_norm": float(rep.max_norm),
        "l2_norm": float(rep.l2_norm),
        "tol": float(tol),
        "pass": bool(rep.max_norm <= tol),
    }
    if lam is not None:
        row["lambda"] = [lam.real, lam.imag]
    return row


def _value_row(rep, lam=None):
    row = {"name": rep.name, "max_norm": float(rep.max_norm), "l2_norm": float(rep.l2_norm)}
    if lam is not None:
        row["lambda"] = [lam.real, lam.imag]
    return row


def _slice_grid(grid, arr):
    return MapGrid(grid.domain, grid.n_x, grid.n_y, grid.h, arr, grid.mask, [])


def _residual_checks(grid, group, tol_fd):
    """Per-slice harmonicity rows plus flatness of the family at each slice lambda.

    Every slice of an extended solution is itself 0-harmonic, so the same
    bounds apply to each; the flat family is built over one slice (the
    lambda = 1 map when present) and evaluated at all of them. Metric
    harmonicity is not implied by 0-harmonicity (the horosphere keeps a
    residual of 1/2 forever), so it is reported without a verdict.
    """
    checks, values = [], []
    slices = _slices_of(grid)
    for lam, arr in slices:
        sg = _slice_grid(grid, arr)
        checks.append(_check_row(neutral_harmonicity_residual(sg, group), tol_fd, lam))
        if group.kind == "solv":
            values.append(_value_row(metric_harmonicity_residual(sg, group.params), lam))
    base = next((arr for lam, arr in slices if lam == 1), slices[0][1])
    form = numeric_mc_form(_slice_grid(grid, base), group)
    for lam, _ in slices:
        checks.append(_check_row(flatness_residual(form, lam, "neutral"), tol_fd, lam))
    return checks, values


def _run_synth(cfg, out, report):
    res = synthesize(cfg.potential, cfg.domain, cfg.n_x, cfg.n_y, lambdas=list(cfg.lambdas))
    grid = res.grid
    diag = dict(res.diagnostics)
    frac = diag["n_masked"] / diag["n_points"]
    diag["masked_fraction"] = frac
    report["band"] = diag["band"]
    report["grid"] = {"domain": list(grid.domain), "h": grid.h, "n_x": grid.n_x, "n_y": grid.n_y}
    report["diagnostics"] = diag

    obj_path = out / f"{cfg.prefix}.obj"
    csv_path = out / f"{cfg.prefix}.csv"
    _write_obj(obj_path, grid)
    _write_csv(csv_path, grid)
    report["outputs"]["obj"] = obj_path.name
    report["outputs"]["csv"] = csv_path.name

    # the verifier is a second-order stencil, so pass/fail is judged
    # against max(tol, 10 h^2); the lambda = 1 flatness row is exact
    tol_fd = max(cfg.tolerances["residual"], 10.0 * grid.h**2)
    group = GroupSpec("solv", cfg.potential.params)
    report["checks"], report["values"] = _residual_checks(grid, group, tol_fd)
    bad = [c for c in report["checks"] if not c["pass"]]
    return 3 if (frac >= 0.01 or bad) else 0


def _read_csv(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_COLUMNS:
        raise ConfigError(f"{path} does not carry the columns {CSV_COLUMNS}")
    try:
        data = np.array([[float(t) for t in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as e:
        raise ConfigError(f"malformed CSV row: {e}")
    if data.ndim != 2 or data.shape[1] != 7 or len(data) < 25:
        raise ConfigError("CSV does not hold at least a 5x5 grid of 7-column rows")

    lam_keys = data[:, 2] + 1j * data[:, 3]
    blocks = []
    start = 0
    for i in range(1, len(lam_keys) + 1):
        if i == len(lam_keys) or lam_keys[i] != lam_keys[start]:
            blocks.append((complex(lam_keys[start]), data[start:i]))
            start = i
    if len({len(b) for _, b in blocks}) != 1:
        raise ConfigError("lambda blocks differ in size")

    first = blocks[0][1]
    ys0 = first[:, 1]
    n_x = 1
    while n_x < len(ys0) and ys0[n_x] == ys0[0]:
        n_x += 1
    if len(first) % n_x != 0:
        raise ConfigError("rows do not form a rectangular grid")
    n_y = len(first) // n_x
    xs = first[:n_x, 0]
    ys = ys0[::n_x]
    want_x = np.tile(xs, n_y)
    want_y = np.repeat(ys, n_x)
    for _, b in blocks:
        if np.max(np.abs(b[:, 0] - want_x)) > 1e-12 or np.max(np.abs(b[:, 1] - want_y)) > 1e-12:
            raise ConfigError("slices do not share one row-major grid")
    hs = np.diff(xs)
    vs = np.diff(ys)
    h = float(hs[0])
    if (
        np.max(np.abs(hs - h)) > 1e-9 * abs(h)
        or np.max(np.abs(vs - h)) > 1e-9 * abs(h)
        or h <= 0
    ):
        raise ConfigError("grid spacing must be uniform and equal in x and y")

    domain = (float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]))
    slices = [
        (lam, np.ascontiguousarray(b[:, 4:7].reshape(n_y, n_x, 3))) for lam, b in blocks
    ]
    return slices, domain, n_x, n_y, h


def _run_verify(cfg, out, report):
    slices, domain, n_x, n_y, h = _read_csv(cfg.verify_input)
    report["band"] = None
    report["grid"] = {"domain": list(domain), "h": h, "n_x": n_x, "n_y": n_y}
    report["diagnostics"] = {"input": str(cfg.verify_input), "n_slices": len(slices)}
    mask = np.zeros((n_y, n_x), dtype=bool)
    grid = MapGrid(domain, n_x, n_y, h, slices[0][1], mask, slices)
    for lam, _ in slices:
        if abs(abs(lam) - 1.0) > UNIT_CIRCLE_TOL:
            raise ConfigError(f"slice lambda {lam} is not on the unit circle")

    tol_fd = max(cfg.tolerances["residual"], 10.0 * h**2)
    checks, values = _residual_checks(grid, cfg.group, tol_fd)
    if cfg.group.kind == "se2":
        pair = se2_check_pair(_slice_grid(grid, slices[0][1]))
        checks.append(_check_row(pair.discrepancy, tol_fd))
        values += [_value_row(pair.direct), _value_row(pair.transformed)]
    report["checks"] = checks
    report["values"] = values
    return 3 if any(not c["pass"] for c in checks) else 0


def _loop_json(loop):
    return {
        "band": loop.band,
        "coeffs": [[c.real, c.imag] for c in np.asarray(loop.coeffs, dtype=complex)],
    }


def _element_json(el):
    return {"x1": _loop_json(el.x1), "x2": _loop_json(el.x2), "x3": _loop_json(el.x3)}


def _random_element(rng, params, band, scale):
    # x3 kept smaller than the flat coordinates: reconstruction error
    # grows like exp(2 mu ||x3||_1) eps through the twisting exponentials
    def rl(s):
        c = s * (rng.uniform(-1, 1, 2 * band + 1) + 1j * rng.uniform(-1, 1, 2 * band + 1))
        return LaurentLoop(band, c)

    return SolvLoopElement(rl(1.0), rl(1.0), rl(scale), params)


def _reconstruction_error(g, fa, fb):
    prod = solv_mul(fa, fb)
    worst = 0.0
    for a, b in zip(prod.entries(), g.entries()):
        n = max(a.band, b.band)
        ca = np.zeros(2 * n + 1, dtype=complex)
        cb = np.zeros(2 * n + 1, dtype=complex)
        ca[n - a.band : n + a.band + 1] = a.coeffs
        cb[n - b.band : n + b.band + 1] = b.coeffs
        worst = max(worst, float(np.max(np.abs(ca - cb))))
    return worst


def _strictly_negative(loop):
    nn = nonnegative_part(loop)
    return float(np.max(np.abs(nn.coeffs))) == 0.0


def _nonnegative(loop):
    neg = loop.coeffs[: loop.band] if loop.band else np.zeros(0)
    return neg.size == 0 or float(np.max(np.abs(neg))) == 0.0


def _run_split(cfg, out, report):
    p = cfg.split_params
    params = SolvParams(p["mu"][0], p["mu"][1])
    tol = cfg.tolerances["reconstruct"]
    rng = np.random.default_rng(p["seed"])
    report["band"] = p["band"]
    report["grid"] = None
    elements = []
    worst_b = worst_i = worst_discard = 0.0
    for _ in range(p["count"]):
        g = _random_element(rng, params, p["band"], p["scale"])
        gm, gp = birkhoff_split(g)
        err_b = _reconstruction_error(g, gm, gp)
        memb_b = all(_strictly_negative(f) for f in gm.entries()) and all(
            _nonnegative(f) for f in gp.entries()
        )
        gr, gq = iwasawa_split(g)
        err_i = _reconstruction_error(g, gr, gq)
        real_ok, real_res = check_reality(gr)
        memb_i = all(_nonnegative(f) for f in gq.entries())
        for el in (gm, gp, gr, gq):
            for f in el.entries():
                worst_discard = max(worst_discard, float(f.discarded))
        worst_b = max(worst_b, err_b)
        worst_i = max(worst_i, err_i)
        elements.append(
            {
                "element": _element_json(g),
                "birkhoff": {
                    "minus": _element_json(gm),
                    "plus": _element_json(gp),
                    "reconstruction_error": err_b,
                    "factors_in_subgroups": memb_b,
                    "pass": bool(err_b <= tol and memb_b),
                },
                "iwasawa": {
                    "real": _element_json(gr),
                    "plus": _element_json(gq),
                    "reconstruction_error": err_i,
                    "reality_residual": real_res,
                    "factors_in_subgroups": bool(memb_i and real_ok),
                    "pass": bool(err_i <= tol and memb_i and real_ok),
                },
            }
        )
    report["diagnostics"] = {
        "count": p["count"],
        "seed": p["seed"],
        "scale": p["scale"],
        "mu": p["mu"],
        "worst_birkhoff_error": worst_b,
        "worst_iwasawa_error": worst_i,
        "worst_discarded_mass": worst_discard,
    }
    report["elements"] = elements
    checks = [
        {
            "name": "birkhoff-reconstruction",
            "max_norm": worst_b,
            "l2_norm": worst_b,
            "tol": tol,
            "pass": all(e["birkhoff"]["pass"] for e in elements),
        },
        {
            "name": "iwasawa-reconstruction",
            "max_norm": worst_i,
            "l2_norm": worst_i,
            "tol": tol,
            "pass": all(e["iwasawa"]["pass"] for e in elements),
        },
    ]
    report["checks"] = checks
    return 3 if any(not c["pass"] for c in checks) else 0


def _frame_matrix(params, vals):
    m = np.eye(3, dtype=complex)
    m[0, 0] = np.exp(params.mu1 * vals[2])
    m[1, 1] = np.exp(params.mu2 * vals[2])
    m[0, 2] = vals[0]
    m[1, 2] = vals[1]
    return m


def _run_oracle(cfg, out, report):
    pot = cfg.potential
    steps = cfg.oracle_params["steps"]
    points = cfg.oracle_params["points"]
    tol = cfg.tolerances["oracle"]
    report["band"] = pot.band
    report["grid"] = None
    checks = []
    for lam in cfg.lambdas:
        worst = 0.0
        for z in points:
            C = solve_step1(pot, z)
            want = _frame_matrix(pot.params, C.eval_at(lam))
            got = ode_oracle(pot, z, lam, steps)
            rel = float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want))))
            worst = max(worst, rel)
        checks.append(
            {
                "name": "closed-form-vs-rk4",
                "max_norm": worst,
                "l2_norm": worst,
                "tol": tol,
                "pass": bool(worst <= tol),
                "lambda": [lam.real, lam.imag],
            }
        )
    report["diagnostics"] = {"steps": steps, "n_points": len(points)}
    report["checks"] = checks
    return 3 if any(not c["pass"] for c in checks) else 0


def _gallery_build(cfg):
    """Named closed-form fixtures with their designated checks.

    Every designated residual here is exact in floating point (constant,
    linear or quadratic coordinate fields under second-order stencils),
    so the default tolerance applies at any resolution.
    """
    name = cfg.gallery_name
    dom, n_x, n_y = cfg.domain, cfg.n_x, cfg.n_y
    tol = cfg.tolerances["residual"]
    checks, values = [], []
    if name == "horosphere":
        spec = GroupSpec("solv", SolvParams(1.0, 1.0))
        grid = vacuum_map([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], spec, dom, n_x, n_y)
        checks.append(_check_row(neutral_harmonicity_residual(grid, spec), tol))
        form = numeric_mc_form(grid, spec)
        checks.append(_check_row(torsion_free_residual(form, solv_algebra(spec.params)), tol))
        met = metric_harmonicity_residual(grid, spec.params)
        # 0-harmonic but not harmonic for the metric: the gap must stay open
        checks.append(
            {
                "name": met.name + "-stays-nonzero",
                "max_norm": met.max_norm,
                "l2_norm": met.l2_norm,
                "floor": 0.1,
                "pass": bool(met.max_norm > 0.1),
            }
        )
    elif name == "hyperbolic-paraboloid":
        spec = GroupSpec("nil3")
        fs = [HoloPoly((0.0, 0.5)), HoloPoly((0.0, -0.5j)), HoloPoly((0.0, 0.0, -0.125j))]
        grid = nil_from_holomorphic(fs, dom, n_x, n_y)
        checks.append(_check_row(neutral_harmonicity_residual(grid, spec), tol))
        form = numeric_mc_form(grid, spec)
        values.append(_value_row(torsion_free_residual(form, nil3_algebra())))
    elif name == "vertical-plane":
        spec = GroupSpec("nil3")
        fs = [HoloPoly((0.0, 0.5)), poly_zero(), HoloPoly((0.0, -0.5j))]
        grid = nil_from_holomorphic(fs, dom, n_x, n_y)
        checks.append(_check_row(neutral_harmonicity_residual(grid, spec), tol))
        form = numeric_mc_form(grid, spec)
        checks.append(_check_row(torsion_free_residual(form, nil3_algebra()), tol))
    elif name == "sol3-primitive":
        params = SolvParams(1.0, -1.0)
        spec = GroupSpec("solv", params)
        grid = sol3_primitive(HoloPoly((0.2, -0.3j, 0.5)), 0.4, dom, n_x, n_y)
        checks.append(_check_row(sol3_primitivity_residual(grid), tol))
        form = numeric_mc_form(grid, spec)
        lc = levi_civita(solv_algebra(params), MetricTensor(np.eye(3)))
        checks.append(_check_row(admissibility_residual(form, lc), tol))
        checks.append(_check_row(metric_harmonicity_residual(grid, params), tol))
    elif name == "se2-vacuum":
        spec = GroupSpec("se2")
        grid = vacuum_map([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], spec, dom, n_x, n_y)
        pair = se2_check_pair(grid)
        checks.append(_check_row(pair.discrepancy, tol))
        values += [_value_row(pair.direct), _value_row(pair.transformed)]
    else:
        raise ConfigError(f"unknown gallery fixture {name!r}")
    return grid, checks, values


def _run_gallery(cfg, out, report):
    grid, checks, values = _gallery_build(cfg)
    report["band"] = None
    report["grid"] = {
        "domain": list(grid.domain),
        "h": grid.h,
        "n_x": grid.n_x,
        "n_y": grid.n_y,
    }
    report["diagnostics"] = {"fixture": cfg.gallery_name}
    stem = f"{cfg.prefix}-{cfg.gallery_name}"
    obj_path = out / f"{stem}.obj"
    csv_path = out / f"{stem}.csv"
    _write_obj(obj_path, grid)
    _write_csv(csv_path, grid)
    report["outputs"]["obj"] = obj_path.name
    report["outputs"]["csv"] = csv_path.name
    report["checks"] = checks
    report["values"] = values
    return 3 if any(not c["pass"] for c in checks) else 0


_RUNNERS = {
    "synth": _run_synth,
    "verify": _run_verify,
    "split": _run_split,
    "oracle": _run_oracle,
    "gallery": _run_gallery,
}


def run(config: RunConfig):
    """Execute one validated run; returns (exit_code, report, report_path)."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = config.prefix
    if config.command == "gallery":
        stem = f"{config.prefix}-{config.gallery_name}"
    report_path = out / f"{stem}.report.json"
    report = {
        "command": config.command,
        "version": __version__,
        "config_sha256": config.config_sha256,
        "tolerances": dict(config.tolerances),
        "outputs": {"report": report_path.name},
        "checks": [],
    }
    try:
        code = _RUNNERS[config.command](config, out, report)
    except ConfigError:
        raise
    except SolvharmError as e:
        report["status"] = "numerical-failure"
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        code = 3
    else:
        report["status"] = "ok" if code == 0 else "failed"
    _write_report(report_path, report)
    return code, report, report_path


def _check_line(row):
    status = "PASS" if row["pass"] else "FAIL"
    lam = row.get("lambda")
    where = " lambda=(%.3g,%.3g)" % (lam[0], lam[1]) if lam else ""
    if "floor" in row:
        return "[%s] %s%s: max %.3e > %.3g" % (status, row["name"], where, row["max_norm"], row["floor"])
    return "[%s] %s%s: max %.3e <= %.3g" % (status, row["name"], where, row["max_norm"], row["tol"])


def _build_parser():
    p = argparse.ArgumentParser(
        prog="solvharm",
        description="Harmonic maps into solvable 3-dimensional Lie groups "
        "via loop group factorization.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("config", help="TOML run configuration")
        else:
            sp.add_argument("config", nargs="?", default=None, help="optional TOML run configuration")
        sp.add_argument("--band", type=int, help="override the potential loop band")
        sp.add_argument("--grid", help="override grid resolution: N or NxM")
        sp.add_argument(
            "--lambdas",
            help="override the lambda list: a root-of-unity count or comma separated complex values",
        )
        sp.add_argument("--tol", type=float, help="override the pass/fail tolerance")
        sp.add_argument("--out", help="override the output directory")

    common(sub.add_parser("synth", help="run the pipeline, export OBJ + CSV + report"))
    common(sub.add_parser("verify", help="recompute residual checks for a CSV"))
    common(sub.add_parser("split", help="factor seeded random loop elements"))
    common(sub.add_parser("oracle", help="closed-form frame against RK4, per lambda"))
    gp = sub.add_parser("gallery", help="emit a named closed-form fixture")
    gp.add_argument("name", choices=GALLERY_NAMES)
    common(gp, config_required=False)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        code, report, report_path = run(cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for row in report.get("checks", []):
        print(_check_line(row))
    if "error" in report:
        print(f"error: {report['error']['type']}: {report['error']['message']}")
    print(f"report: {report_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
