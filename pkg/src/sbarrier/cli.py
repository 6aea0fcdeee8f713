"""Command-line front end: declarative problem configs and batch jobs.

Config files are YAML documents with the sections below (unknown keys are
rejected; errors carry the offending line):

    system:     n, m, k, f (n strings), g (n x k strings), sigma (n x m strings)
    sets:       state_box ([lo, hi] per state), X, X0, Xu (constraint strings,
                each polynomial taken as >= 0)
    problem:    T, optional x0, optional gamma
    sweep:      optional sigma: list of noise scale factors (default [1.0])
    degrees:    n_B, optional n_u (default 2), optional multiplier override
    alpha_grid: l, u, d
    synthesis:  optional P_goal, epsilon, alpha, a_inc, a_dec, max_iters, c_floor
    mc:         dt, draws, seed
    solver:     optional tol_eq, tol_psd, max_iter, margin

Commands (exit codes: 0 ok, 2 parse/validation, 3 no certificate /
not converged / check failed, 4 numerical or internal failure):

    sbarrier verify     <config> [--out DIR] [--seed N] [--compare-alpha-zero]
    sbarrier synthesize <config> [--out DIR] [--seed N]
    sbarrier simulate   <config> [--out DIR] [--seed N] [--controller FILE]
                                 [--certificates FILE]
    sbarrier check      <config> --certificate FILE [--out DIR] [--seed N]

Results are JSON documents (sorted keys) plus CSV sweep tables; identical
config and seed give byte-identical outputs.  SBARRIER_THREADS controls
sweep/grid parallelism.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass

import yaml

from . import certify, mc, sos, synth
from .certify import AlphaGrid, Certificate, NoFeasiblePoint, SolverConfig, _map_ordered
from .model import (
    SafetyProblem,
    SemialgebraicSet,
    StochasticSystem,
    validate_problem,
)
from .poly import ParametricPolynomial, PolyParseError, parse_polynomial

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CERTIFICATE = 3
EXIT_NUMERICAL = 4


class ParseError(ValueError):
    """Config file is not syntactically valid."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{message}{f' ({location})' if location else ''}")
        self.location = location


class ValidationError(ValueError):
    """Config file parses but violates the schema or its semantics."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{message}{f' ({location})' if location else ''}")
        self.location = location


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _line_index(text: str) -> dict[str, int]:
    """Map dotted config paths to 1-based source lines."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    index: dict[str, int] = {}

    def walk(node, path: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                sub = f"{path}.{key_node.value}" if path else str(key_node.value)
                index[sub] = key_node.start_mark.line + 1
                walk(value_node, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                sub = f"{path}[{i}]"
                index[sub] = item.start_mark.line + 1
                walk(item, sub)

    if root is not None:
        walk(root, "")
    return index


@dataclass
class _Section:
    data: dict
    path: str
    lines: dict[str, int]

    def loc(self, key: str | None = None) -> str:
        path = f"{self.path}.{key}" if key else self.path
        line = self.lines.get(path)
        return f"{path}, line {line}" if line else path

    def check_keys(self, allowed: set[str]) -> None:
        for key in self.data:
            if key not in allowed:
                raise ValidationError(f"unknown key {key!r}", self.loc(key))

    def get(self, key: str, kind, required: bool = True, default=None):
        if key not in self.data:
            if required:
                raise ValidationError(f"missing required key {key!r}", self.loc())
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise ValidationError(f"{key!r} must be an integer", self.loc(key))
        if not isinstance(value, kind):
            raise ValidationError(
                f"{key!r} must be of type {kind.__name__}", self.loc(key)
            )
        return value

    def get_list(self, key: str, required: bool = True) -> list | None:
        value = self.get(key, list, required=required)
        return value


@dataclass
class SynthesisSettings:
    P_goal: float
    epsilon: float
    alpha: float
    a_inc: float = 1.25
    a_dec: float = 0.5
    max_iters: int = 50
    c_floor: float = 0.0


@dataclass
class ProblemConfig:
    n: int
    m: int
    k: int
    f: list[ParametricPolynomial]
    g: list[list[ParametricPolynomial]]
    sigma: list[list[ParametricPolynomial]]
    state_box: tuple[tuple[float, float], ...]
    X: list[ParametricPolynomial]
    X0: list[ParametricPolynomial]
    Xu: list[ParametricPolynomial]
    T: float
    x0: tuple[float, ...] | None
    gamma: float | None
    sigma_sweep: list[float]
    n_B: int
    n_u: int
    multiplier: int | None
    alpha_l: float
    alpha_u: float
    alpha_d: float
    synthesis: SynthesisSettings | None
    mc_dt: float
    mc_draws: int
    mc_seed: int
    solver: SolverConfig

    def base_system(self) -> StochasticSystem:
        return StochasticSystem(
            n=self.n,
            m=self.m,
            k=self.k,
            f=tuple(self.f),
            g=tuple(tuple(row) for row in self.g),
            sigma=tuple(tuple(row) for row in self.sigma),
        )

    def problem_at(self, sigma_scale: float) -> SafetyProblem:
        return SafetyProblem(
            system=self.base_system().scaled_noise(sigma_scale),
            X=SemialgebraicSet(self.n, tuple(self.X), "X"),
            X0=SemialgebraicSet(self.n, tuple(self.X0), "X0"),
            Xu=SemialgebraicSet(self.n, tuple(self.Xu), "Xu"),
            T=self.T,
            box=self.state_box,
            x0=self.x0,
            gamma=self.gamma,
        )

    def grid(self) -> AlphaGrid:
        return AlphaGrid(self.alpha_l, self.alpha_u, self.alpha_d)

    def degrees(self) -> sos.DegreeSpec:
        return sos.DegreeSpec(n_B=self.n_B, n_u=self.n_u, multiplier=self.multiplier)

    def sim_config(self, seed: int | None = None) -> mc.SimulationConfig:
        return mc.SimulationConfig(
            dt=self.mc_dt,
            T=self.T,
            draws=self.mc_draws,
            seed=self.mc_seed if seed is None else seed,
        )

    def synthesis_config(self) -> synth.SynthesisConfig:
        if self.synthesis is None:
            raise ValidationError("config has no synthesis section", "synthesis")
        s = self.synthesis
        return synth.SynthesisConfig(
            P_goal=s.P_goal,
            epsilon=s.epsilon,
            alpha=s.alpha,
            n_B=self.n_B,
            n_u=self.n_u,
            a_inc=s.a_inc,
            a_dec=s.a_dec,
            max_iters=s.max_iters,
            c_floor=s.c_floor,
            multiplier=self.multiplier,
        )


def _parse_poly_field(text, n: int, section: _Section, key: str, where: str) -> ParametricPolynomial:
    if not isinstance(text, str):
        raise ValidationError(f"{where} must be a polynomial string", section.loc(key))
    try:
        return parse_polynomial(text, n)
    except PolyParseError as exc:
        raise ValidationError(f"{where}: {exc}", section.loc(key)) from exc


def _poly_matrix(section: _Section, key: str, n: int, rows: int, cols: int, what: str):
    raw = section.get_list(key)
    if len(raw) != rows:
        raise ValidationError(f"{what} must have {rows} rows", section.loc(key))
    out = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != cols:
            raise ValidationError(
                f"{what} row {i} must be a list of {cols} strings", section.loc(key)
            )
        out.append(
            [
                _parse_poly_field(entry, n, section, key, f"{what}[{i}][{j}]")
                for j, entry in enumerate(row)
            ]
        )
    return out


def parse_config(text: str) -> ProblemConfig:
    """Parse and fully validate a YAML problem description."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark else ""
        raise ParseError(f"invalid YAML: {exc}", where) from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a YAML mapping")
    lines = _line_index(text)

    top = _Section(data, "", lines)
    top.check_keys(
        {"system", "sets", "problem", "sweep", "degrees", "alpha_grid",
         "synthesis", "mc", "solver"}
    )

    def section(name: str, required: bool = True) -> _Section | None:
        if name not in data:
            if required:
                raise ValidationError(f"missing section {name!r}")
            return None
        if not isinstance(data[name], dict):
            raise ValidationError(f"section {name!r} must be a mapping",
                                  _Section(data, "", lines).loc(name))
        return _Section(data[name], name, lines)

    sys_sec = section("system")
    sys_sec.check_keys({"n", "m", "k", "f", "g", "sigma"})
    n = sys_sec.get("n", int)
    m = sys_sec.get("m", int)
    k = sys_sec.get("k", int)
    for label, value in (("n", n), ("m", m), ("k", k)):
        if value < 1:
            raise ValidationError(f"system.{label} must be >= 1", sys_sec.loc(label))
    f_raw = sys_sec.get_list("f")
    if len(f_raw) != n:
        raise ValidationError(f"drift must list {n} polynomials", sys_sec.loc("f"))
    f = [_parse_poly_field(s, n, sys_sec, "f", f"f[{i}]") for i, s in enumerate(f_raw)]
    g = _poly_matrix(sys_sec, "g", n, n, k, "g")
    sigma = _poly_matrix(sys_sec, "sigma", n, n, m, "sigma")

    sets_sec = section("sets")
    sets_sec.check_keys({"state_box", "X", "X0", "Xu"})
    box_raw = sets_sec.get_list("state_box")
    if len(box_raw) != n:
        raise ValidationError(f"state_box must have {n} entries", sets_sec.loc("state_box"))
    box = []
    for i, pair in enumerate(box_raw):
        ok = (
            isinstance(pair, list)
            and len(pair) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
            and pair[0] <= pair[1]
        )
        if not ok:
            raise ValidationError(
                f"state_box[{i}] must be [lo, hi] with lo <= hi", sets_sec.loc("state_box")
            )
        box.append((float(pair[0]), float(pair[1])))

    def constraint_list(key: str) -> list[ParametricPolynomial]:
        raw = sets_sec.get_list(key)
        if not raw:
            raise ValidationError(f"{key} needs at least one constraint", sets_sec.loc(key))
        return [
            _parse_poly_field(s, n, sets_sec, key, f"{key}[{i}]")
            for i, s in enumerate(raw)
        ]

    X = constraint_list("X")
    X0 = constraint_list("X0")
    Xu = constraint_list("Xu")

    prob_sec = section("problem")
    prob_sec.check_keys({"T", "x0", "gamma"})
    T = prob_sec.get("T", float)
    if T <= 0:
        raise ValidationError("problem.T must be positive", prob_sec.loc("T"))
    x0 = None
    if "x0" in prob_sec.data:
        raw = prob_sec.get_list("x0")
        if len(raw) != n or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
        ):
            raise ValidationError(f"x0 must list {n} numbers", prob_sec.loc("x0"))
        x0 = tuple(float(v) for v in raw)
    gamma = prob_sec.get("gamma", float, required=False)
    if gamma is not None and not 0.0 <= gamma < 1.0:
        raise ValidationError("gamma must lie in [0, 1)", prob_sec.loc("gamma"))

    sweep_sec = section("sweep", required=False)
    sigma_sweep = [1.0]
    if sweep_sec is not None:
        sweep_sec.check_keys({"sigma"})
        raw = sweep_sec.get_list("sigma")
        if not raw or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0
            for v in raw
        ):
            raise ValidationError(
                "sweep.sigma must be a non-empty list of non-negative numbers",
                sweep_sec.loc("sigma"),
            )
        sigma_sweep = [float(v) for v in raw]

    deg_sec = section("degrees")
    deg_sec.check_keys({"n_B", "n_u", "multiplier"})
    n_B = deg_sec.get("n_B", int)
    if n_B < 1:
        raise ValidationError("degrees.n_B must be >= 1", deg_sec.loc("n_B"))
    n_u = deg_sec.get("n_u", int, required=False, default=2)
    if n_u < 0:
        raise ValidationError("degrees.n_u must be >= 0", deg_sec.loc("n_u"))
    multiplier = deg_sec.get("multiplier", int, required=False)
    if multiplier is not None and (multiplier < 0 or multiplier % 2):
        raise ValidationError(
            "degrees.multiplier must be a non-negative even integer",
            deg_sec.loc("multiplier"),
        )

    grid_sec = section("alpha_grid")
    grid_sec.check_keys({"l", "u", "d"})
    alpha_l = grid_sec.get("l", float)
    alpha_u = grid_sec.get("u", float)
    alpha_d = grid_sec.get("d", float)
    try:
        AlphaGrid(alpha_l, alpha_u, alpha_d)
    except ValueError as exc:
        raise ValidationError(str(exc), grid_sec.loc()) from exc

    synth_sec = section("synthesis", required=False)
    synthesis = None
    if synth_sec is not None:
        synth_sec.check_keys(
            {"P_goal", "epsilon", "alpha", "a_inc", "a_dec", "max_iters", "c_floor"}
        )
        synthesis = SynthesisSettings(
            P_goal=synth_sec.get("P_goal", float),
            epsilon=synth_sec.get("epsilon", float),
            alpha=synth_sec.get("alpha", float),
            a_inc=synth_sec.get("a_inc", float, required=False, default=1.25),
            a_dec=synth_sec.get("a_dec", float, required=False, default=0.5),
            max_iters=synth_sec.get("max_iters", int, required=False, default=50),
            c_floor=synth_sec.get("c_floor", float, required=False, default=0.0),
        )
        try:
            synth.SynthesisConfig(
                P_goal=synthesis.P_goal,
                epsilon=synthesis.epsilon,
                alpha=synthesis.alpha,
                n_B=n_B,
                n_u=n_u,
                a_inc=synthesis.a_inc,
                a_dec=synthesis.a_dec,
                max_iters=synthesis.max_iters,
                c_floor=synthesis.c_floor,
            )
        except ValueError as exc:
            raise ValidationError(str(exc), synth_sec.loc()) from exc

    mc_sec = section("mc")
    mc_sec.check_keys({"dt", "draws", "seed"})
    mc_dt = mc_sec.get("dt", float)
    mc_draws = mc_sec.get("draws", int)
    mc_seed = mc_sec.get("seed", int)
    if mc_dt <= 0 or mc_dt > T:
        raise ValidationError("mc.dt must satisfy 0 < dt <= T", mc_sec.loc("dt"))
    if mc_draws < 1:
        raise ValidationError("mc.draws must be >= 1", mc_sec.loc("draws"))
    if mc_seed < 0:
        raise ValidationError("mc.seed must be >= 0", mc_sec.loc("seed"))

    solver_sec = section("solver", required=False)
    solver = SolverConfig()
    if solver_sec is not None:
        solver_sec.check_keys({"tol_eq", "tol_psd", "max_iter", "margin"})
        solver = SolverConfig(
            tol_eq=solver_sec.get("tol_eq", float, required=False, default=1e-8),
            tol_psd=solver_sec.get("tol_psd", float, required=False, default=1e-7),
            max_iter=solver_sec.get("max_iter", int, required=False, default=200),
            margin=solver_sec.get("margin", float, required=False, default=0.0),
        )
        if solver.tol_eq <= 0 or solver.tol_psd <= 0 or solver.max_iter < 1 or solver.margin < 0:
            raise ValidationError("invalid solver settings", solver_sec.loc())

    config = ProblemConfig(
        n=n, m=m, k=k, f=f, g=g, sigma=sigma,
        state_box=tuple(box),
        X=X, X0=X0, Xu=Xu,
        T=T, x0=x0, gamma=gamma,
        sigma_sweep=sigma_sweep,
        n_B=n_B, n_u=n_u, multiplier=multiplier,
        alpha_l=alpha_l, alpha_u=alpha_u, alpha_d=alpha_d,
        synthesis=synthesis,
        mc_dt=mc_dt, mc_draws=mc_draws, mc_seed=mc_seed,
        solver=solver,
    )
    try:
        problem = config.problem_at(1.0)
    except ValueError as exc:
        raise ValidationError(str(exc), "problem") from exc
    for warning in validate_problem(problem, samples=1024):
        log.warning("problem sanity: %s", warning)
    return config


def load_config(path: str) -> ProblemConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write(out_dir: str, name: str, payload: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(payload)
    return path


def cmd_verify(
    config: ProblemConfig,
    out_dir: str,
    compare_alpha_zero: bool = False,
) -> tuple[int, dict]:
    """Certify each entry of the noise sweep with the uncontrolled system."""
    grid = config.grid()
    degrees = config.degrees()

    def one(scale: float) -> dict:
        problem = config.problem_at(scale)
        cert = certify.compute_barrier(problem, None, grid, degrees, config.solver)
        cert.sigma_scale = scale
        entry = {
            "sigma": scale,
            "bound": cert.bound,
            "alpha": cert.alpha,
            "beta": cert.beta,
            "gamma": cert.gamma,
            "level_used": cert.level_used,
            "bound_case": cert.bound_case,
            "certificate": cert.to_dict(),
            "alpha_zero_bound": None,
        }
        if compare_alpha_zero:
            try:
                zero_cert = certify.compute_barrier(
                    problem, None, AlphaGrid.fixed(0.0), degrees, config.solver
                )
                entry["alpha_zero_bound"] = zero_cert.bound
            except NoFeasiblePoint:
                entry["alpha_zero_bound"] = None
        return entry

    results = _map_ordered(one, config.sigma_sweep)
    doc = {"command": "verify", "results": results}
    _write(out_dir, "verify_results.json", _dump_json(doc))
    for i, entry in enumerate(results):
        _write(
            out_dir,
            f"certificate_{i}.json",
            _dump_json(entry["certificate"]),
        )
    fields = ["sigma", "bound", "alpha", "beta"]
    if compare_alpha_zero:
        fields.append("alpha_zero_bound")
    os.makedirs(out_dir, exist_ok=True)
    mc.write_sweep_csv(os.path.join(out_dir, "verify_sweep.csv"), results, fields)
    return EXIT_OK, doc


def cmd_synthesize(config: ProblemConfig, out_dir: str) -> tuple[int, dict]:
    """Run controller synthesis for each entry of the noise sweep."""
    cfg_syn = config.synthesis_config()
    code = EXIT_OK
    results = []

    def one(scale: float) -> tuple[synth.SynthesisResult, bool]:
        problem = config.problem_at(scale)
        try:
            return synth.synthesize(problem, cfg_syn, config.solver), True
        except synth.NotConverged as exc:
            return exc.result, False

    outcomes = _map_ordered(one, config.sigma_sweep)
    for scale, (result, converged) in zip(config.sigma_sweep, outcomes):
        if not converged:
            code = EXIT_NO_CERTIFICATE
        result.certificate.sigma_scale = scale
        uncontrolled = result.trace[0].bound if result.trace else None
        results.append(
            {
                "sigma": scale,
                "p_uncontrolled": uncontrolled,
                "alpha": cfg_syn.alpha,
                "c_star": None if math.isinf(result.c_star) else result.c_star,
                "bound": result.certificate.bound,
                "iterations": result.iterations,
                "converged": converged,
                "result": result.to_dict(),
            }
        )
    doc = {"command": "synthesize", "results": results}
    _write(out_dir, "synthesis_results.json", _dump_json(doc))
    mc.write_sweep_csv(
        os.path.join(out_dir, "synthesis_sweep.csv"),
        results,
        ["sigma", "p_uncontrolled", "alpha", "c_star", "bound", "converged"],
    )
    return code, doc


def _load_controller(path: str, n: int) -> tuple[ParametricPolynomial, ...]:
    with open(path) as fh:
        doc = json.load(fh)
    if "u_star" in doc:
        items = doc["u_star"]
    elif "result" in doc and "u_star" in doc.get("result", {}):
        items = doc["result"]["u_star"]
    elif "controller" in doc and doc["controller"] is not None:
        items = doc["controller"]
    else:
        raise ValidationError(f"no controller found in {path}")
    return tuple(certify._poly_from_list(n, item) for item in items)


def _load_bounds(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for entry in doc.get("results", []):
        out[float(entry["sigma"])] = float(entry["bound"])
    return out


def cmd_simulate(
    config: ProblemConfig,
    out_dir: str,
    seed: int | None = None,
    controller_file: str | None = None,
    certificates_file: str | None = None,
) -> tuple[int, dict]:
    """Estimate ground-truth failure probabilities across the noise sweep."""
    u = _load_controller(controller_file, config.n) if controller_file else None
    bounds = _load_bounds(certificates_file) if certificates_file else {}
    if config.x0 is None:
        raise ValidationError("simulation needs problem.x0", "problem")
    sim_cfg = config.sim_config(seed)

    def one(scale: float) -> dict:
        problem = config.problem_at(scale)
        estimate = mc.estimate_failure_probability(
            problem.system, u, config.x0, sim_cfg, problem
        )
        bound = None
        for sig, b in bounds.items():
            if abs(sig - scale) <= 1e-12:
                bound = b
        return {
            "sigma": scale,
            "p_hat": estimate.p_hat,
            "ci_low": estimate.ci_low,
            "ci_high": estimate.ci_high,
            "bound": bound,
            "estimate": estimate.to_dict(),
        }

    results = _map_ordered(one, config.sigma_sweep)
    doc = {
        "command": "simulate",
        "draws": sim_cfg.draws,
        "dt": sim_cfg.dt,
        "seed": sim_cfg.seed,
        "results": results,
    }
    _write(out_dir, "mc_results.json", _dump_json(doc))
    mc.write_sweep_csv(
        os.path.join(out_dir, "mc_results.csv"),
        results,
        ["sigma", "p_hat", "ci_low", "ci_high", "bound"],
    )
    return EXIT_OK, doc


def cmd_check(
    config: ProblemConfig,
    certificate_file: str,
    out_dir: str,
    seed: int | None = None,
) -> tuple[int, dict]:
    """Re-validate a stored certificate: formula, soundness samples, MC."""
    with open(certificate_file) as fh:
        text = fh.read()
    cert = Certificate.from_json(text)
    reserialized_identical = cert.to_json() == text

    scale = cert.sigma_scale if cert.sigma_scale is not None else 1.0
    problem = config.problem_at(scale)
    recomputed_bound = cert.recompute_bound(problem.T)
    formula_ok = abs(recomputed_bound - cert.bound) <= 1e-12

    soundness = sos.sampled_soundness(
        problem, cert.B, cert.controller, cert.alpha, cert.beta, cert.gamma
    )

    mc_ok = None
    estimate_doc = None
    if config.x0 is not None:
        estimate = mc.estimate_failure_probability(
            problem.system, cert.controller, config.x0, config.sim_config(seed), problem
        )
        mc_ok = estimate.ci_low <= cert.bound + 1e-9
        estimate_doc = estimate.to_dict()

    passed = formula_ok and soundness.ok and (mc_ok is not False) and reserialized_identical
    doc = {
        "command": "check",
        "sigma": scale,
        "bound": cert.bound,
        "formula_ok": formula_ok,
        "recomputed_bound": recomputed_bound,
        "soundness": soundness.to_dict(),
        "mc_ok": mc_ok,
        "mc_estimate": estimate_doc,
        "reserialized_identical": reserialized_identical,
        "passed": passed,
    }
    _write(out_dir, "check_report.json", _dump_json(doc))
    return (EXIT_OK if passed else EXIT_NO_CERTIFICATE), doc


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbarrier",
        description="Finite-time safety certificates for polynomial stochastic systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify", "synthesize", "simulate", "check"):
        cmd = sub.add_parser(name)
        cmd.add_argument("config", help="YAML problem description")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="Monte Carlo seed override")
        if name == "verify":
            cmd.add_argument(
                "--compare-alpha-zero",
                action="store_true",
                help="also report the bound restricted to a constant generator cap",
            )
        if name == "simulate":
            cmd.add_argument("--controller", default=None, help="controller JSON file")
            cmd.add_argument(
                "--certificates", default=None, help="verify results to join bounds from"
            )
        if name == "check":
            cmd.add_argument("--certificate", required=True, help="certificate JSON file")
    return parser


def _error_doc(kind: str, exc: Exception) -> dict:
    return {
        "error": {
            "kind": kind,
            "message": str(exc),
            "location": getattr(exc, "location", ""),
        }
    }


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.command == "verify":
            code, doc = cmd_verify(
                config, args.out, compare_alpha_zero=args.compare_alpha_zero
            )
        elif args.command == "synthesize":
            code, doc = cmd_synthesize(config, args.out)
        elif args.command == "simulate":
            code, doc = cmd_simulate(
                config,
                args.out,
                seed=args.seed,
                controller_file=args.controller,
                certificates_file=args.certificates,
            )
        else:
            code, doc = cmd_check(config, args.certificate, args.out, seed=args.seed)
    except (ParseError, ValidationError) as exc:
        sys.stdout.write(_dump_json(_error_doc("validation", exc)))
        return EXIT_USAGE
    except (NoFeasiblePoint, synth.Infeasible) as exc:
        sys.stdout.write(_dump_json(_error_doc("no-certificate", exc)))
        return EXIT_NO_CERTIFICATE
    except synth.NotConverged as exc:
        sys.stdout.write(_dump_json(_error_doc("not-converged", exc)))
        return EXIT_NO_CERTIFICATE
    except Exception as exc:  # numerical or internal failure
        sys.stdout.write(_dump_json(_error_doc("numerical", exc)))
        return EXIT_NUMERICAL
    sys.stdout.write(_dump_json(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
