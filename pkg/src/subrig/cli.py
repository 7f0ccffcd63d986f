"""Command-line entry point: ``subrig <command> --config <file>``.

Exit codes: 0 when every verdict passes, 2 when a verdict fails, 1 on
configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import CharacteristicEncountered, ConfigError, SubrigError
from .flows import (
    chord_deviation,
    cone_volume,
    hg_convexity_test,
    homogeneous_dimension,
    integrate_ruling,
    planar_curvatures,
    verify_constancy,
    volume_scaling_check,
)
from .hypersurface import Hypersurface, Patch, horizontal_frame_at, perimeter, project_to_surface
from .report import fingerprint, write_csv, write_json
from .shape import second_fundamental_form
from .structure import check_vertical_rigidity, load_structure

SCHEMA_VERSION = 1
TOP_KEYS = {
    "schema", "structure", "surface", "grid", "patch", "tol", "seed", "quadrature", "step",
    "expect", "rule", "volume", "convexity",
}
COMMANDS = ("check-rigidity", "curvature-report", "verify", "rule", "cone-volume", "convexity", "perimeter")
EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config needs a {key!r} section")
    return cfg[key]


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_config(path) -> dict:
    try:
        cfg = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _check_keys(cfg, TOP_KEYS, "top-level")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"config schema must be {SCHEMA_VERSION}, got {cfg.get('schema')!r}")
    for key in ("tol", "step"):
        if key in cfg and not float(cfg[key]) > 0:
            raise ConfigError(f"{key} must be positive")
    return cfg


def _surface(cfg, s) -> Hypersurface:
    block = _require(cfg, "surface")
    _check_keys(block, {"phi", "orientation", "char_tol"}, "surface")
    return Hypersurface.from_string(str(_require(block, "phi")), s.coords, int(block.get("orientation", 1)),
                                    float(block.get("char_tol", 1e-8)))


def _patch(cfg) -> Patch:
    block = _require(cfg, "patch")
    _check_keys(block, {"params", "map", "domain"}, "patch")
    return Patch.from_strings(block["params"], block["map"], block["domain"])


def _grid_points(cfg, s, seed: int):
    """Explicit points, a tensor grid of ``[lo, hi, n]`` ranges, or seeded random samples."""
    block = cfg.get("grid")
    if block is None:
        return [np.array(q, dtype=float) for q in (s.samples or [np.zeros(s.dim)])]
    _check_keys(block, {"points", "ranges", "random", "box", "project"}, "grid")
    pts = []
    if "points" in block:
        pts += [np.array(q, dtype=float) for q in block["points"]]
    if "ranges" in block:
        axes = [np.linspace(float(lo), float(hi), int(n)) for lo, hi, n in block["ranges"]]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts += [np.array(q) for q in np.stack([m.ravel() for m in mesh], axis=1)]
    if "random" in block:
        box = np.array(_require(block, "box"), dtype=float)
        rng = np.random.default_rng(seed)
        pts += list(rng.uniform(box[:, 0], box[:, 1], size=(int(block["random"]), len(box))))
    for q in pts:
        if len(q) != s.dim:
            raise ConfigError(f"grid point {q.tolist()} has wrong dimension")
    return pts


def _project(cfg, surf, pts):
    if not (cfg.get("grid") or {}).get("project", True):
        return pts
    return [project_to_surface(surf, q) for q in pts]


# -- commands ------------------------------------------------------------------


def cmd_check_rigidity(cfg, s, opts, out):
    tol = opts.tol or float(cfg.get("tol", 1e-10))
    rep = check_vertical_rigidity(s, _grid_points(cfg, s, opts.seed), tol)
    return rep.passed, {
        "max_residual": rep.max_residual,
        "worst_point": rep.worst_point,
        "worst_triple": list(rep.worst_triple) if rep.worst_triple else None,
        "samples": rep.samples,
        "tol": tol,
    }


def _expect(cfg, default=None):
    return cfg.get("expect", default)


def cmd_curvature_report(cfg, s, opts, out):
    surf = _surface(cfg, s)
    tol = opts.tol or float(cfg.get("tol", 1e-8))
    rows, records, histogram, errors = [], [], {}, []
    max_h = 0.0
    for q in _project(cfg, surf, _grid_points(cfg, s, opts.seed)):
        try:
            shape = second_fundamental_form(s, surf, q)
        except SubrigError as exc:
            try:
                frame = horizontal_frame_at(s, surf, q)
                hn, char = frame.hnorm, frame.characteristic
            except SubrigError:
                hn, char = float("nan"), False
            if char:
                records.append({"point": q, "hnorm": hn, "characteristic": True})
                rows.append(list(q) + [hn, "true", "", "", "Characteristic"])
                histogram["Characteristic"] = histogram.get("Characteristic", 0) + 1
            else:
                errors.append({"point": q, "error": str(exc)})
            continue
        hn = horizontal_frame_at(s, surf, q).hnorm
        max_h = max(max_h, abs(shape.h))
        histogram[shape.classification] = histogram.get(shape.classification, 0) + 1
        records.append({"point": q, "hnorm": hn, "characteristic": False, "H": shape.h,
                        "kappas": list(shape.kappas), "classification": shape.classification})
        rows.append(list(q) + [hn, "false", shape.h, ";".join(format(k, ".17g") for k in shape.kappas),
                               shape.classification])
    if out is not None:
        write_csv(out / "grid.csv", list(s.coords) + ["hnorm", "characteristic", "H", "kappas", "classification"],
                  rows)
    minimal = max_h < tol
    passed = minimal if _expect(cfg) == "minimal" else True
    return passed, {"points": records, "errors": errors, "max_abs_H": max_h, "minimal": minimal,
                    "classification_histogram": histogram, "tol": tol}


def cmd_verify(cfg, s, opts, out):
    surf = _surface(cfg, s)
    tol = opts.tol or float(cfg.get("tol", 1e-7))
    rep = verify_constancy(s, surf, _project(cfg, surf, _grid_points(cfg, s, opts.seed)), tol)
    expect = _expect(cfg, "cmc")
    if expect not in ("minimal", "cmc"):
        raise ConfigError("verify expects 'minimal' or 'cmc'")
    passed = rep.minimal if expect == "minimal" else rep.cmc
    return passed, {
        "points": [{"point": p, "H": h} for p, h in zip(rep.points, rep.values)],
        "excluded": rep.excluded,
        "rho_hat": rep.rho_hat,
        "max_deviation": rep.max_deviation,
        "max_abs_H": rep.max_abs,
        "minimal": rep.minimal,
        "cmc": rep.cmc,
        "tol": tol,
    }


def cmd_rule(cfg, s, opts, out):
    surf = _surface(cfg, s)
    block = _require(cfg, "rule")
    _check_keys(block, {"seeds", "length", "rho"}, "rule")
    h = opts.step or float(cfg.get("step", 1e-3))
    tol = opts.tol or float(cfg.get("tol", 1e-5))
    length = float(block.get("length", 1.0))
    rho = block.get("rho")
    rho = None if rho is None else float(rho)
    curves, passed = [], True
    for i, seed in enumerate(block["seeds"]):
        try:
            res = integrate_ruling(s, surf, np.array(seed, dtype=float), length, h, rho)
            states, status = res.states, "complete"
        except CharacteristicEncountered as exc:
            res, states, status = None, exc.partial, "characteristic"
            passed = False
        pts = np.array([st.point for st in states]) if states else np.zeros((0, s.dim))
        rec = {"seed": seed, "status": status, "steps": len(states)}
        if res is not None:
            rec.update(max_phi=res.max_phi, max_curvature_residual=res.max_curvature_residual,
                       max_turn_residual=res.max_turn_residual)
            passed &= res.max_phi < tol and res.max_curvature_residual < tol
            if len(pts) >= 3:
                k = planar_curvatures(pts[:, :2])
                rec.update(planar_curvature_min=float(np.min(np.abs(k))), planar_curvature_max=float(np.max(np.abs(k))),
                           chord_deviation=chord_deviation(pts[:, :2]))
        curves.append(rec)
        if out is not None:
            header = ["arclength"] + list(s.coords) + [f"u{a}" for a in range(s.rank)] + ["k_c"]
            write_csv(out / f"curve_{i}.csv", header,
                      [[st.arclength, *st.point, *st.tangent, st.k_c] for st in states])
    return passed, {"curves": curves, "rho": rho, "step": h, "length": length, "tol": tol}


def cmd_cone_volume(cfg, s, opts, out):
    if s.flow is None:
        raise ConfigError("cone-volume needs a structure with a dilation")
    block = cfg.get("volume") or {}
    _check_keys(block, {"lambdas", "box", "check_rays"}, "volume")
    order = opts.quadrature or int(cfg.get("quadrature", 12))
    result = {"Q": homogeneous_dimension(s.flow), "quadrature": order}
    passed = True
    if "patch" in cfg:
        surf = _surface(cfg, s)
        via_mu, via_solid = cone_volume(s, s.flow, surf, _patch(cfg), order, bool(block.get("check_rays", True)))
        scale = max(abs(via_mu), abs(via_solid))
        rel = abs(via_mu - via_solid) / scale if scale > 0 else 0.0
        passed &= rel < 1e-3 or abs(via_mu - via_solid) < 1e-12
        result.update(via_mu=via_mu, via_solid=via_solid, relative_difference=rel)
    if "box" in block:
        checks = []
        for lam in block.get("lambdas", [0.5, 2.0]):
            ratio, expected = volume_scaling_check(s, s.flow, block["box"], float(lam), order)
            rel = abs(ratio - expected) / expected
            passed &= rel < 1e-6
            checks.append({"lambda": float(lam), "ratio": ratio, "lambda_Q": expected, "relative_error": rel})
        result["scaling"] = checks
    return passed, result


def cmd_convexity(cfg, s, opts, out):
    surf = _surface(cfg, s)
    block = _require(cfg, "convexity")
    _check_keys(block, {"points", "length", "directions"}, "convexity")
    h = opts.step or float(cfg.get("step", 1e-3))
    length = float(block.get("length", 0.3))
    count = int(block.get("directions", 8))
    expect = _expect(cfg)
    verdicts, passed, idx = [], True, 0
    for x in block["points"]:
        v = hg_convexity_test(s, surf, np.array(x, dtype=float), length, count, h, seed=opts.seed)
        verdicts.append({"point": x, "verdict": v.verdict, "sign": v.sign, "min_c0": v.min_c0,
                         "max_c0": v.max_c0, "side_tol": v.side_tol})
        if expect == "not-one-sided":
            passed &= v.verdict == "TwoSided" or v.sign == "flat"
        elif expect is not None:
            passed &= v.verdict == expect or v.sign == expect
        if out is not None:
            for trace in v.traces:
                write_csv(out / f"curve_{idx}.csv", ["arclength", "c0"], trace)
                idx += 1
    return passed, {"points": verdicts, "length": length, "directions": count, "step": h}


def cmd_perimeter(cfg, s, opts, out):
    surf = _surface(cfg, s)
    order = opts.quadrature or int(cfg.get("quadrature", 12))
    value = perimeter(s, surf, _patch(cfg), order)
    result = {"perimeter": value, "quadrature": order}
    passed = True
    if "expect" in cfg:
        tol = opts.tol or float(cfg.get("tol", 1e-6))
        expected = float(eval_constant(cfg["expect"]))
        passed = abs(value - expected) < tol
        result.update(expected=expected, tol=tol)
    return passed, result


def eval_constant(text) -> float:
    from .expr import evaluate, parse

    if isinstance(text, (int, float)):
        return float(text)
    return evaluate(parse(str(text).replace("pi", repr(math.pi)), ()), [])


HANDLERS = {
    "check-rigidity": cmd_check_rigidity,
    "curvature-report": cmd_curvature_report,
    "verify": cmd_verify,
    "rule": cmd_rule,
    "cone-volume": cmd_cone_volume,
    "convexity": cmd_convexity,
    "perimeter": cmd_perimeter,
}


def run(command: str, cfg: dict, opts, out) -> tuple:
    s = load_structure(_require(cfg, "structure"))
    passed, body = HANDLERS[command](cfg, s, opts, out)
    report = {
        "command": command,
        "config_fingerprint": fingerprint(cfg),
        "structure": s.name,
        "version": __version__,
        "passed": bool(passed),
        "result": body,
    }
    return bool(passed), report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subrig", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--output", default=None, help="directory for report.json and CSV files")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--quadrature", type=int, default=None, help="Gauss-Legendre order")
    ap.add_argument("--step", type=float, default=None, help="integration step")
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--version", action="version", version=f"subrig {__version__}")
    return ap


def main(argv=None) -> int:
    opts = build_parser().parse_args(argv)
    try:
        for name in ("step", "tol", "quadrature"):
            val = getattr(opts, name)
            if val is not None and not val > 0:
                raise ConfigError(f"--{name} must be positive")
        cfg = load_config(opts.config)
        if opts.seed is None:
            opts.seed = int(cfg.get("seed", 0))
        out = None
        if opts.output:
            out = Path(opts.output)
            out.mkdir(parents=True, exist_ok=True)
        passed, report = run(opts.command, cfg, opts, out)
    except (SubrigError, OSError, ValueError, TypeError, KeyError) as exc:
        print(f"subrig: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if out is not None:
        write_json(out / "report.json", report)
    verdict = "PASS" if passed else "FAIL"
    print(f"{opts.command}: {verdict}")
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
