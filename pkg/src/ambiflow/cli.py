"""``ambiflow`` command line: radius, inputs, propagate, validate.

Configuration is one JSON document (``--config``) merged over built-in
defaults; ``--set a.b.c=value`` overrides single entries, with ``value``
parsed as JSON when possible and kept as a string otherwise.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from functools import lru_cache

import numpy as np

from . import io as aio
from .ambiguity import (
    AmbiguityBall,
    ParameterModel,
    RadiusSpec,
    ambiguity_radius,
    input_support,
)
from .cdf_core import from_samples
from .envelope import band_from_ball
from .errors import AmbiflowError, LinearityRequiredError
from .propagation import (
    PhysicsModel,
    SpaceTimeGrid,
    band_discrepancy_field,
    propagate_ball,
    propagate_band,
    solve_cdf_pde,
)
from .scenario import (
    SEEDINGS,
    ExampleConfig,
    example_model,
    sample_parameters,
    true_boundary_support,
    validate_containment,
)

EXIT_OK, EXIT_VIOLATIONS, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3

DEFAULT_CONFIG = {
    "physics": {"kind": "linear", "theta_r": -1.0},
    "parameters": {"box": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]], "a_bar": None, "rho_a": None},
    "radius": {"p": 1.0, "n": None, "beta": 0.05, "mode": "relative", "K": 1.0,
               "C": None, "c": None, "rho": None, "N_list": [25, 100]},
    "samples": {"source": "synthetic", "N": 100, "seed": 0, "path": None},
    "grid": {"xs": {"start": 0.0, "stop": 2.0, "num": 21},
             "ts": {"start": 0.0, "stop": 2.0, "num": 21},
             "Us": {"start": 0.0, "stop": 3.5, "num": 36}},
    "propagate": {"mode": "both", "cross_sections": [0.5, 1.0, 1.5], "cdf_field": False},
    "validate": {"trials": 20, "seeding": "max",
                 "grid": {"xs": {"start": 0.0, "stop": 2.0, "num": 5},
                          "ts": {"start": 0.0, "stop": 2.0, "num": 5}}},
    "corner": "boundary",
}


class ConfigError(AmbiflowError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def apply_override(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override must look like key=value: {assignment!r}")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = path.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def load_config(path: str | None, overrides) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, user)
    for item in overrides or []:
        apply_override(cfg, item)
    return cfg


def _axis(spec, name) -> np.ndarray:
    if isinstance(spec, dict):
        try:
            arr = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid axis {name}: {spec!r}") from exc
    else:
        arr = np.asarray(spec, dtype=float).ravel()
    if arr.size == 0 or (arr.size > 1 and np.any(np.diff(arr) <= 0)):
        raise ConfigError(f"grid axis {name} must be non-empty and increasing")
    return arr


def build_grid(gcfg: dict, with_u: bool = True) -> SpaceTimeGrid:
    us = _axis(gcfg["Us"], "Us") if with_u and gcfg.get("Us") is not None else None
    return SpaceTimeGrid(_axis(gcfg["xs"], "xs"), _axis(gcfg["ts"], "ts"), us)


def build_physics(pcfg: dict) -> PhysicsModel:
    kind = pcfg.get("kind", "linear")
    if kind == "linear":
        return PhysicsModel.linear_model(float(pcfg["theta_r"]))
    if kind == "affine":
        return PhysicsModel.linear_model(float(pcfg["theta_r"]), float(pcfg.get("offset", 0.0)))
    if kind == "nonlinear":
        tabs = {}
        for name in ("qdot", "r"):
            tab = pcfg.get(name)
            if not isinstance(tab, dict) or "U" not in tab or "values" not in tab:
                raise ConfigError(f"nonlinear physics needs a table physics.{name} with U and values")
            U = np.asarray(tab["U"], dtype=float)
            V = np.asarray(tab["values"], dtype=float)
            if U.size < 2 or U.size != V.size or np.any(np.diff(U) <= 0):
                raise ConfigError(f"physics.{name} table must have matching increasing U and values")
            tabs[name] = (U, V)
        (Uq, Vq), (Ur, Vr) = tabs["qdot"], tabs["r"]
        return PhysicsModel.nonlinear_model(lambda u: np.interp(u, Uq, Vq),
                                            lambda u: np.interp(u, Ur, Vr))
    raise ConfigError(f"unknown physics kind {kind!r}")


def build_radius_spec(cfg: dict, pm: ParameterModel) -> RadiusSpec:
    r = cfg["radius"]
    n = pm.n if r.get("n") is None else int(r["n"])
    return RadiusSpec(p=float(r["p"]), n=n, beta=float(r["beta"]), C=r.get("C"), c=r.get("c"),
                      mode=r.get("mode", "relative"), K=float(r.get("K", 1.0)))


def build_parameter_model(cfg: dict) -> ParameterModel:
    p = cfg["parameters"]
    return ParameterModel(np.asarray(p["box"], dtype=float), p.get("a_bar"), p.get("rho_a"))


def load_parameters(cfg: dict, pm: ParameterModel) -> np.ndarray:
    s = cfg["samples"]
    if s.get("source", "synthetic") == "synthetic":
        N = s.get("N")
        if not isinstance(N, int) or N < 1:
            raise ConfigError(f"samples.N must be a positive integer, got {N!r}")
        return sample_parameters(pm, N, int(s.get("seed", 0)))
    if s["source"] == "file":
        try:
            a = np.loadtxt(s["path"], delimiter=",", ndmin=2)
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read sample file {s.get('path')!r}: {exc}") from exc
        if a.shape[1] != pm.n or a.shape[0] < 1:
            raise ConfigError(f"sample file must hold rows of {pm.n} parameters")
        return a
    raise ConfigError(f"unknown sample source {s['source']!r}")


class InputSets:
    """Balls and bands of the example inputs built from one parameter sample."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        _, self.par, _ = example_model()
        self.pm = build_parameter_model(cfg)
        self.spec = build_radius_spec(cfg, self.pm)
        self.a = load_parameters(cfg, self.pm)
        self.N = self.a.shape[0]
        rho = cfg["radius"].get("rho")
        self.eps = ambiguity_radius(self.spec, self.N, self.pm.rho_a if rho is None else float(rho))
        # the example's initial data, support and Lipschitz constant do not depend on x
        uniform = lru_cache(maxsize=None)(lambda: self._initial_ball(0.0))
        self.initial_ball = lambda x: uniform()
        self.boundary_ball = lru_cache(maxsize=None)(self._boundary_ball)
        uniform_band = lru_cache(maxsize=None)(lambda: band_from_ball(uniform()))
        self.initial_band = lambda x: uniform_band()
        self.boundary_band = lru_cache(maxsize=None)(lambda t: band_from_ball(self.boundary_ball(t)))

    def _initial_ball(self, x: float) -> AmbiguityBall:
        support = input_support(self.par, self.pm, ("initial", x))
        vals = self.par.u0(x, self.a)
        return AmbiguityBall(from_samples(vals, support), self.par.L0(x) * self.eps, support)

    def _boundary_ball(self, t: float) -> AmbiguityBall:
        support = input_support(self.par, self.pm, ("boundary", 0.0, t))
        vals = self.par.ub(0.0, t, self.a)
        return AmbiguityBall(from_samples(vals, support), self.par.Lb(0.0, t) * self.eps, support)


def _out_dir(args, cfg) -> str:
    out = args.out or cfg.get("out") or "ambiflow_out"
    os.makedirs(out, exist_ok=True)
    return out


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_radius(cfg: dict, args) -> int:
    pm = build_parameter_model(cfg)
    spec = build_radius_spec(cfg, pm)
    Ns = cfg["radius"].get("N_list") or [cfg["samples"]["N"]]
    rho = cfg["radius"].get("rho")
    rho = pm.rho_a if rho is None else float(rho)
    eps = [ambiguity_radius(spec, int(N), rho) for N in Ns]
    text = aio.table_csv(["N", "epsilon", "ratio_vs_first"],
                         [(N, e, eps[0] / e) for N, e in zip(Ns, eps)])
    sys.stdout.write(text)
    if args.out:
        _write(os.path.join(_out_dir(args, cfg), "radius.csv"), text)
    return EXIT_OK


def cmd_inputs(cfg: dict, args) -> int:
    sets = InputSets(cfg)
    grid = build_grid(cfg["grid"], with_u=False)
    out = _out_dir(args, cfg)
    x_ref = float(grid.xs[0])
    initial_ball = sets.initial_ball(x_ref)
    doc = {
        "epsilon": aio.fmt(sets.eps),
        "N": sets.N,
        "initial": {"x": aio.fmt(x_ref), "ball": aio.ball_to_json(initial_ball),
                    "band": aio.band_to_json(sets.initial_band(x_ref))},
        "boundary": [],
    }
    rows = []
    for t in grid.ts:
        t = float(t)
        ball, band = sets.boundary_ball(t), sets.boundary_band(t)
        doc["boundary"].append({"t": aio.fmt(t), "ball": aio.ball_to_json(ball),
                                "band": aio.band_to_json(band)})
        rows.append((t, ball.radius, band.discrepancy, true_boundary_support(t).width))
    _write(os.path.join(out, "inputs.json"), _dump_json(doc))
    _write(os.path.join(out, "rho_b.csv"), aio.table_csv(["t", "rho_b", "rho_b_env", "rho_b_max"], rows))
    return EXIT_OK


def cmd_propagate(cfg: dict, args) -> int:
    model = build_physics(cfg["physics"])
    mode = cfg["propagate"].get("mode", "both")
    if mode not in ("ball", "band", "both"):
        raise ConfigError(f"propagate.mode must be ball, band or both, got {mode!r}")
    if mode in ("ball", "both") and not model.linear:
        raise LinearityRequiredError("linearity required: ball propagation needs linear dynamics")
    corner = cfg.get("corner", "boundary")
    sets = InputSets(cfg)
    grid = build_grid(cfg["grid"], with_u=True)
    out = _out_dir(args, cfg)
    xs_cut = np.asarray(cfg["propagate"].get("cross_sections") or [], dtype=float)
    cut_grid = SpaceTimeGrid(np.unique(xs_cut), grid.ts, grid.Us) if xs_cut.size else None

    def fields(g):
        res = {}
        if mode in ("ball", "both"):
            _, res["w"] = propagate_ball(model, sets.initial_ball, sets.boundary_ball, g, corner)
        if mode in ("band", "both"):
            bands = propagate_band(model, sets.initial_band, sets.boundary_band, g, corner)
            res["w_env"] = band_discrepancy_field(bands, g)
        return res

    main = fields(grid)
    if "w" in main:
        _write(os.path.join(out, "w.csv"), aio.scalar_field_csv(main["w"], "w"))
    if "w_env" in main:
        _write(os.path.join(out, "w_env.csv"), aio.scalar_field_csv(main["w_env"], "w_env"))
    if cut_grid is not None:
        cut = fields(cut_grid)
        names = [n for n in ("w", "w_env") if n in cut]
        rows = [(x, t, *[cut[n].values[it, ix] for n in names]) for it, ix, x, t in cut_grid.nodes()]
        _write(os.path.join(out, "cross_sections.csv"), aio.table_csv(["x", "t", *names], rows))
    if cfg["propagate"].get("cdf_field"):
        field = solve_cdf_pde(model, lambda x: sets.initial_ball(x).center,
                              lambda t: sets.boundary_ball(t).center, grid, corner)
        _write(os.path.join(out, "center_cdf.csv"), aio.cdf_field_csv(field))
    return EXIT_OK


def cmd_validate(cfg: dict, args) -> int:
    vcfg = cfg["validate"]
    trials = vcfg.get("trials")
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"invalid trials: {trials!r}")
    seeding = vcfg.get("seeding", "max")
    if seeding not in SEEDINGS:
        raise ConfigError(f"validate.seeding must be one of {SEEDINGS}")
    model = build_physics(cfg["physics"])
    if not model.linear:
        raise LinearityRequiredError("linearity required: validation uses the linear example")
    r = cfg["radius"]
    s = cfg["samples"]
    ex = ExampleConfig(theta_r=model.theta_r, N=int(s["N"]), beta=float(r["beta"]),
                       seed=int(vcfg.get("seed", s.get("seed", 0))), K=float(r.get("K", 1.0)),
                       p=float(r["p"]), corner=cfg.get("corner", "boundary"))
    grid = build_grid(vcfg.get("grid") or cfg["grid"], with_u=False)
    report = validate_containment(ex, trials, grid, seeding=seeding)
    out = _out_dir(args, cfg)
    _write(os.path.join(out, "validate.json"), _dump_json(report))
    n_viol = len(report["violations"])
    print(f"trials={trials} nodes={report['nodes']} containment_fraction={report['containment_fraction']:.6f} "
          f"violations={n_viol} mechanism_violations={report['mechanism_violations']}")
    return EXIT_VIOLATIONS if n_viol else EXIT_OK


COMMANDS = {"radius": cmd_radius, "inputs": cmd_inputs, "propagate": cmd_propagate, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ambiflow",
                                     description="Wasserstein ambiguity sets for hyperbolic transport.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration entry (dotted path, JSON value)")
    parser.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args)
    except LinearityRequiredError as exc:
        print(f"ambiflow: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (AmbiflowError, ValueError, KeyError, TypeError) as exc:
        print(f"ambiflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
