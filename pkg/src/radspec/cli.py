"""Batch front-end: ``radspec <command> --config <path> [--out <dir>] [--seed <n>]``.

Each command reads a flat JSON configuration (scalars and lists only),
fills in documented defaults, runs one verification or experiment and writes
``<command>.json`` (and, where tabular, ``<command>.csv``) into the output
directory.  Reports embed the resolved configuration, the seed, truncation
diagnostics and a schema version; they contain no timestamps, so reruns with
the same configuration and seed are byte-identical.

Exit codes: 0 success, 2 configuration error (error JSON on stdout),
3 numerical accuracy failure or failed check, 4 unresolved eigenvalue regions.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import bessel, decomposition, eigenvalues, resolvent, spectral_measure
from .angular import norm_from_sectors
from .bessel import SectorOrder
from .errors import AccuracyFailure, DivergenceError, InvalidArgument, UnresolvedRegion
from .radial import ExponentConfig, RadialProfile, dilate, random_simple, standard_profiles

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_UNRESOLVED = 0, 2, 3, 4
SCALING_TOL = 1e-7

PROFILE_KEYS = ("depth", "radius", "value", "g", "alpha", "amplitude", "width", "cutoff",
                "panels", "nodes_per_panel", "levels", "cell", "n_cells")


class ConfigError(Exception):
    """Invalid or incomplete configuration."""


# --------------------------------------------------------------------------
# configuration handling

COMMON = {"profile": None, "d": 3, **{k: None for k in PROFILE_KEYS}}

COMMANDS: Dict[str, Tuple[Tuple[str, ...], dict]] = {
    "verify-spectral-measure": (("q", "p"), {
        **COMMON, "profile": "gaussian", "lambda_grid": [0.5, 1.0, 2.0, 4.0], "k_max": 48}),
    "verify-resolvent": (("q", "p"), {
        **COMMON, "profile": "gaussian", "z": [[-1.0, 0.0], [2.0, 0.5]],
        "lambda_grid": [0.5, 2.0, 4.0], "k_max": 8}),
    "scan-z": (("q", "p"), {
        **COMMON, "profile": "gaussian",
        "theta_grid": [1e-4, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 3.141592653589793],
        "k_max": 32, "growth_tol": 1.1, "max_over_min_tol": 3.0}),
    "bessel-lemma": (("p", "rho"), {
        "mus": [2, 4, 8, 16, 32, 64, 128], "s_max": 100.0, "slope_tol": 0.05}),
    "decompose": ((), {"seeds": [0], "levels": 5, "d": 3, "K": 3, "gamma": 2.0,
                       "cell": 0.0625, "n_cells": 64}),
    "eigenvalues": (("profile",), {**COMMON, "k_max": 64, "margin": 1e-6, "re_max": None}),
    "theorem1": (("q", "p"), {
        "d": 3, "g_grid": [1.0, 2.0, 5.0, 10.0, 20.0], "alpha": 2.5, "radius": 2.0,
        "panels": 8, "nodes_per_panel": 16, "k_max": 64, "max_over_min_tol": 10.0}),
    "sharpness": (("q", "p"), {
        "d": 3, "beta": 1.0, "g_grid": [1.0, 2.0, 5.0, 10.0, 20.0], "alpha": 2.5,
        "radius": 2.0, "panels": 8, "nodes_per_panel": 16, "k_max": 64, "budget": 0,
        "g_bounds": [1.0, 20.0]}),
}


def resolve_config(command: str, raw: dict) -> dict:
    """Validate a flat configuration against the command schema and fill defaults."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    required, defaults = COMMANDS[command]
    for key, val in raw.items():
        if key not in defaults and key not in required:
            raise ConfigError(f"unknown key {key!r} for {command}")
        if isinstance(val, dict):
            raise ConfigError(f"key {key!r}: nested objects are not allowed (flat JSON)")
    missing = [k for k in required if raw.get(k) is None]
    if missing:
        raise ConfigError(f"missing required key(s) {missing} for {command}")
    out = dict(defaults)
    out.update(raw)
    return out


def _profile(cfg: dict, seed: int) -> RadialProfile:
    params = {k: cfg[k] for k in PROFILE_KEYS if cfg.get(k) is not None}
    params["d"] = cfg.get("d", 3)
    if cfg["profile"] == "random_simple":
        params["seed"] = seed
    try:
        return standard_profiles(cfg["profile"], params)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def _exponents(cfg: dict, relaxed: bool = False) -> ExponentConfig:
    try:
        return ExponentConfig(float(cfg["q"]), float(cfg["p"]), int(cfg.get("d", 3)), relaxed)
    except (InvalidArgument, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _csv(header: List[str], rows: List[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=_jsonable) + "\n"


# --------------------------------------------------------------------------
# scaling identities (also used by the acceptance suite)

def _dilated_refined(w: RadialProfile, lam: float) -> RadialProfile:
    """``w(./lam)`` resampled on a twice-refined rule, so that both sides of a
    scaling identity are computed on different quadrature nodes."""
    wd = dilate(w, lam)
    if wd.func is None:
        return wd
    rule = wd.rule.refined(2)
    return RadialProfile(rule, wd.func(rule.nodes), wd.support_radius, wd.label, wd.d, wd.func)


def spectral_scaling_rows(w1: RadialProfile, w2: RadialProfile, p: float,
                          lambdas, k_max: int) -> List[dict]:
    """``||W1 dE(lam) W2||_p`` evaluated directly at ``lam`` versus
    ``lam^{-1} ||W1(./lam) dE(1) W2(./lam)||_p`` (sectors ``k <= k_max``)."""
    d = w1.d
    rows = []
    for lam in lambdas:
        direct = [spectral_measure.sector_singular_value(w1, w2, SectorOrder(d, k), lam,
                                                         direct=True)
                  for k in range(k_max + 1)]
        a, b = _dilated_refined(w1, lam), _dilated_refined(w2, lam)
        scaled = [spectral_measure.sector_singular_value(a, b, SectorOrder(d, k), 1.0,
                                                         direct=True)
                  for k in range(k_max + 1)]
        lhs = norm_from_sectors(d, direct, p)
        rhs = norm_from_sectors(d, scaled, p) / lam
        err = abs(lhs - rhs) / lhs if lhs else abs(rhs)
        rows.append({"lambda": float(lam), "direct": lhs, "dilated": rhs,
                     "rel_error": err, "pass": bool(err <= SCALING_TOL)})
    return rows


def resolvent_scaling_rows(w1: RadialProfile, w2: RadialProfile, cfg: ExponentConfig,
                           zs, lambdas, k_max: int) -> List[dict]:
    """``||W1 R0(z) W2||_p`` versus ``lam^{-2} ||W1(./lam) R0(z/lam^2) W2(./lam)||_p``."""
    rows = []
    for z in zs:
        a = resolvent.resolvent_schatten(w1, w2, cfg, resolvent.SpectralPoint(z), k_max=k_max)
        for lam in lambdas:
            b = resolvent.resolvent_schatten(_dilated_refined(w1, lam),
                                             _dilated_refined(w2, lam), cfg,
                                             resolvent.SpectralPoint(z / lam ** 2),
                                             k_max=k_max)
            rhs = b.norm / lam ** 2
            err = abs(a.norm - rhs) / a.norm
            rows.append({"z": [z.real, z.imag], "lambda": float(lam), "direct": a.norm,
                         "dilated": rhs, "tail_bound": a.tail_bound, "k_max_used": a.k_max,
                         "rel_error": err, "pass": bool(err <= SCALING_TOL)})
    return rows


# --------------------------------------------------------------------------
# commands; each returns (report, csv text or None, exit status)

def cmd_verify_spectral_measure(cfg: dict, seed: int):
    ec = _exponents(cfg, relaxed=True)
    w = _profile(cfg, seed)
    grid = [float(x) for x in cfg["lambda_grid"]]
    cert = spectral_measure.theorem3_certificate(w, w, ec, grid)
    others = [x for x in grid if x != 1.0] or [2.0]
    rows = spectral_scaling_rows(w, w, ec.p, others, int(cfg["k_max"]))
    report = {"theorem3_certificate": cert, "scaling_identity": rows,
              "pass": all(r["pass"] for r in rows)}
    table = _csv(["lambda", "direct", "dilated", "rel_error", "pass"],
                 [[r["lambda"], r["direct"], r["dilated"], r["rel_error"], r["pass"]]
                  for r in rows])
    return report, table, EXIT_OK if report["pass"] else EXIT_ACCURACY


def _complex_list(vals) -> List[complex]:
    out = []
    for v in vals:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            out.append(complex(float(v[0]), float(v[1])))
        elif isinstance(v, (int, float)):
            out.append(complex(v))
        else:
            raise ConfigError(f"cannot read complex value {v!r}")
    return out


def cmd_verify_resolvent(cfg: dict, seed: int):
    ec = _exponents(cfg)
    w = _profile(cfg, seed)
    zs = _complex_list(cfg["z"])
    try:
        rows = resolvent_scaling_rows(w, w, ec, zs, [float(x) for x in cfg["lambda_grid"]],
                                      int(cfg["k_max"]))
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc
    report = {"resolvent_scaling_identity": rows, "pass": all(r["pass"] for r in rows)}
    table = _csv(["re_z", "im_z", "lambda", "direct", "dilated", "rel_error", "pass"],
                 [[r["z"][0], r["z"][1], r["lambda"], r["direct"], r["dilated"],
                   r["rel_error"], r["pass"]] for r in rows])
    return report, table, EXIT_OK if report["pass"] else EXIT_ACCURACY


def cmd_scan_z(cfg: dict, seed: int):
    ec = _exponents(cfg)
    w = _profile(cfg, seed)
    rep = resolvent.uniform_bound_scan(w, w, ec, [float(t) for t in cfg["theta_grid"]],
                                       k_max=int(cfg["k_max"]),
                                       growth_tol=float(cfg["growth_tol"]))
    s = rep["summary"]
    ok = (not rep["failures"] and s.get("max_over_min", math.inf) < cfg["max_over_min_tol"]
          and not s.get("growth_flag", True))
    rep = dict(rep)
    rep["pass"] = bool(ok)
    table = resolvent.scan_csv(rep)
    status = EXIT_ACCURACY if rep["failures"] or not ok else EXIT_OK
    return rep, table, status


def cmd_bessel_lemma(cfg: dict, seed: int):
    try:
        rep = bessel.lemma_scan(float(cfg["p"]), float(cfg["rho"]),
                                [float(m) for m in cfg["mus"]], float(cfg["s_max"]))
    except (InvalidArgument, DivergenceError) as exc:
        raise ConfigError(str(exc)) from exc
    rep["pass"] = bool(rep["slope"] <= cfg["slope_tol"])
    table = _csv(["mu", "integral", "tail_bound", "envelope", "ratio", "estimate_ratio"],
                 [list(r) for r in zip(rep["mus"], rep["integrals"], rep["tail_bounds"],
                                       rep["envelopes"], rep["ratios"],
                                       rep["estimate_ratios"])])
    return rep, table, EXIT_OK if rep["pass"] else EXIT_ACCURACY


def cmd_decompose(cfg: dict, seed: int):
    rows, out_rows = [], []
    seeds = [int(s) for s in cfg["seeds"]]
    for s in seeds:
        v = random_simple(seed + s, int(cfg["levels"]), d=int(cfg["d"]),
                          cell=float(cfg["cell"]), n_cells=int(cfg["n_cells"]))
        W = decomposition.SimpleFunction.from_profile(v)
        tree = decomposition.decompose(W, int(cfg["K"]), float(cfg["gamma"]), float(cfg["cell"]))
        chk = decomposition.verify_tree(tree)
        ok = all(chk[k] for k in ("reconstruction", "layer_measure", "sparse", "counts"))
        rows.append({"seed": seed + s, "checks": {k: chk[k] for k in
                                                   ("reconstruction", "layer_measure",
                                                    "sparse", "counts")},
                     "layers": chk["rows"], "pass": ok})
        out_rows.append([seed + s, chk["reconstruction"], chk["layer_measure"],
                         chk["sparse"], chk["counts"], ok])
    report = {"constants": decomposition.family_constants(int(cfg["d"]), float(cfg["cell"]),
                                                          int(cfg["K"]), float(cfg["gamma"])),
              "rows": rows, "pass": all(r["pass"] for r in rows)}
    table = _csv(["seed", "reconstruction", "layer_measure", "sparse", "counts", "pass"],
                 out_rows)
    return report, table, EXIT_OK if report["pass"] else EXIT_ACCURACY


def _bs_config(v: RadialProfile, cfg: dict) -> eigenvalues.BSConfig:
    try:
        return eigenvalues.BSConfig.for_profile(v, k_max=int(cfg["k_max"]),
                                                margin=float(cfg.get("margin", 1e-6)),
                                                re_max=cfg.get("re_max"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def cmd_eigenvalues(cfg: dict, seed: int):
    v = _profile(cfg, seed)
    bs = _bs_config(v, cfg)
    es = eigenvalues.find_eigenvalues(v, bs)
    report = {"bs_config": bs.as_dict(), "eigenvalues": es.to_dict(),
              "pass": not es.unresolved}
    status = EXIT_UNRESOLVED if es.unresolved else EXIT_OK
    return report, es.to_csv(), status


def _well_family(cfg: dict) -> Callable[[float], RadialProfile]:
    alpha, radius = float(cfg["alpha"]), float(cfg["radius"])
    panels, npp, d = int(cfg["panels"]), int(cfg["nodes_per_panel"]), int(cfg["d"])

    def family(g):
        return standard_profiles("complex_well", {"g": float(g), "alpha": alpha,
                                                  "radius": radius, "panels": panels,
                                                  "nodes_per_panel": npp, "d": d})
    return family


def _scan_table(rep: dict) -> str:
    return _csv(["g", "n_eigenvalues", "functional", "lq_q", "ratio", "ok"],
                [[r["params"][0], r["n_eigenvalues"], r["functional"], r["lq_q"],
                  r["ratio"], r["ok"]] for r in rep["rows"]])


def _scan(cfg: dict, beta: float, budget: int, bounds=None):
    ec = _exponents(cfg)
    if ec.q <= (ec.d + 1) / 2:
        raise ConfigError("the eigenvalue-sum functional needs (d+1)/2 < q < d")
    family = _well_family(cfg)
    bs = lambda v: eigenvalues.BSConfig.for_profile(v, k_max=int(cfg["k_max"]))  # noqa: E731
    return eigenvalues.sharpness_scan(family, ec, bs, beta,
                                      [(float(g),) for g in cfg["g_grid"]],
                                      bounds=bounds, budget=budget)


def _scan_status(rep: dict) -> int:
    if any(r.get("unresolved") for r in rep["rows"]):
        return EXIT_UNRESOLVED
    if any(not r["ok"] for r in rep["rows"]):
        return EXIT_ACCURACY
    return EXIT_OK


def cmd_theorem1(cfg: dict, seed: int):
    rep = _scan(cfg, 1.0, 0)
    mom = rep["summary"]["max_over_min"]
    rep["pass"] = bool(math.isfinite(mom) and mom < cfg["max_over_min_tol"]
                       and rep["summary"]["zero_rows"] == 0)
    status = _scan_status(rep)
    if status == EXIT_OK and not rep["pass"]:
        status = EXIT_ACCURACY
    return rep, _scan_table(rep), status


def cmd_sharpness(cfg: dict, seed: int):
    beta = float(cfg["beta"])
    if not 0 < beta <= 1:
        raise ConfigError("beta must lie in (0, 1]")
    rep = _scan(cfg, beta, int(cfg["budget"]), [tuple(cfg["g_bounds"])])
    return rep, _scan_table(rep), _scan_status(rep)


HANDLERS = {
    "verify-spectral-measure": cmd_verify_spectral_measure,
    "verify-resolvent": cmd_verify_resolvent,
    "scan-z": cmd_scan_z,
    "bessel-lemma": cmd_bessel_lemma,
    "decompose": cmd_decompose,
    "eigenvalues": cmd_eigenvalues,
    "theorem1": cmd_theorem1,
    "sharpness": cmd_sharpness,
}


# --------------------------------------------------------------------------
# driver

def run(command: str, raw_config: dict, seed: int = 0, out_dir: str = ".") -> Tuple[int, dict]:
    """Run one command; write reports into ``out_dir``; return (exit status, report)."""
    try:
        cfg = resolve_config(command, raw_config)
        if int(seed) != seed:
            raise ConfigError("seed must be an integer")
        report, table, status = HANDLERS[command](cfg, int(seed))
    except ConfigError as exc:
        return EXIT_CONFIG, {"schema_version": SCHEMA_VERSION, "error": "config",
                             "command": command, "message": str(exc)}
    except (AccuracyFailure, DivergenceError, ArithmeticError) as exc:
        report = {"error": "accuracy", "message": f"{type(exc).__name__}: {exc}"}
        table, status, cfg = None, EXIT_ACCURACY, resolve_config(command, raw_config)
    except UnresolvedRegion as exc:
        report = {"error": "unresolved", "message": str(exc), "regions": exc.regions}
        table, status, cfg = None, EXIT_UNRESOLVED, resolve_config(command, raw_config)
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "seed": int(seed),
           "config": cfg, "exit_status": status, "report": report}
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{command}.json"), "w") as fh:
        fh.write(dumps(doc))
    if table is not None:
        with open(os.path.join(out_dir, f"{command}.csv"), "w") as fh:
            fh.write(table)
    return status, doc


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="radspec", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="flat JSON configuration file")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(dumps({"schema_version": SCHEMA_VERSION, "error": "config",
                     "command": args.command, "message": str(exc)}), end="")
        return EXIT_CONFIG
    status, doc = run(args.command, raw, args.seed, args.out)
    if status == EXIT_CONFIG:
        print(dumps(doc), end="")
    else:
        print(f"{args.command}: exit {status}, report {os.path.join(args.out, args.command)}.json")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
