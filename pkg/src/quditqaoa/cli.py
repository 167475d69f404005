"""Config-driven experiment runner.

Subcommands: ``encode-check``, ``run``, ``landscape``, ``brute-force`` and
``report``. Configs are INI files whose values are JSON literals (bare words
are read as strings), or plain JSON with the same section layout.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import copy
import csv
import hashlib
import json
import math
import operator
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from quditqaoa import problems as P
from quditqaoa.constraints import (
    EQUALITY,
    ConstraintConfigError,
    InfeasibleError,
    feasible_projector,
    feasible_uniform_state,
    penalty_diagonal,
    run_conditional_ensemble,
)
from quditqaoa.encoding import (
    DiagonalHamiltonian,
    dft_cost,
    diagonal_from_lz_polynomial,
    idft_cost,
    lz_polynomial_from_monomials,
    monomials_from_diagonal,
    parse_z_polynomial,
    z_polynomial_from_cost,
    z_polynomial_values,
)
from quditqaoa.optimize import (
    GAP_TOL,
    EsConfig,
    Objective,
    QnConfig,
    es_optimizer,
    optimality_gap,
    qn_optimizer,
    reduce_angles,
    single_run,
)
from quditqaoa.qaoa import (
    DECOUPLED,
    STANDARD,
    CircuitObjective,
    MixerSpec,
    QaoaParams,
    TrialState,
    energy,
    evolve,
    top_k_candidates,
)
from quditqaoa.register import DomainError, QuditRegister, StateVector, set_dim_limit

SCHEMA = 1
ENCODE_TOL = 1e-9
SUMMARY_COLUMNS = ["run", "p", "method", "seed", "best_E", "gap", "n_optima_found", "evals", "seconds"]
REPORT_COLUMNS = ["p", "method", "runs", "best_gap", "median_gap", "mean_found", "min_found",
                  "max_found", "oracle_optima"]
MODES = ("none", "classical_loop", "hamiltonian_penalty", "conditional", "dynamical_decoupling")

DEFAULTS = {
    "experiment": {"schema": SCHEMA, "name": "experiment"},
    "problem": {},
    "circuit": {
        "p": [1], "mixer": STANDARD, "constraint_mode": "none", "candidates": 10,
        "shots": None, "penalty_weight": None, "mixer_scale": 1.0, "trajectories": 256,
    },
    "optimizer": {
        "method": ["es"], "runs": 50, "qn_runs": None, "seed": 0, "budget": None,
        "population": None, "initial_step": 0.3, "max_generations": 500,
        "max_iterations": 200, "fd_step": 1e-5, "gradient_tolerance": 1e-8,
        "gamma_range": [0.0, 2 * math.pi], "beta_range": [0.0, math.pi],
    },
    "landscape": {"gamma": [0.0, 2 * math.pi, 33], "beta": [0.0, math.pi, 17]},
    "output": {"directory": "out", "formats": ["json", "csv"]},
}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config

def _literal(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def read_config(path) -> dict:
    """Parse an INI or JSON config into a normalized dict with defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config {path} not found")
    text = path.read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        parser.read_string(text)
        raw = {s: {k: _literal(v) for k, v in parser[s].items()} for s in parser.sections()}
    cfg = normalize_config(raw)
    cfg["_base_dir"] = str(path.resolve().parent)
    return cfg


def normalize_config(raw: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    for section, values in raw.items():
        if section.startswith("_"):
            continue
        if section not in cfg:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"section [{section}] must be a table")
        cfg[section].update(values)
    if cfg["experiment"].get("schema") != SCHEMA:
        raise ConfigError(f"unsupported schema {cfg['experiment'].get('schema')!r}; expected {SCHEMA}")
    if "type" not in cfg["problem"]:
        raise ConfigError("[problem] needs a type")
    circ, opt = cfg["circuit"], cfg["optimizer"]
    for key in ("p",):
        if isinstance(circ[key], int):
            circ[key] = [circ[key]]
    if isinstance(opt["method"], str):
        opt["method"] = [opt["method"]]
    if not circ["p"] or any(int(p) < 1 for p in circ["p"]):
        raise ConfigError("circuit depth p must be >= 1")
    circ["p"] = [int(p) for p in circ["p"]]
    if circ["constraint_mode"] not in MODES:
        raise ConfigError(f"constraint_mode must be one of {MODES}")
    if circ["mixer"] not in (STANDARD, DECOUPLED):
        raise ConfigError(f"unknown mixer {circ['mixer']!r}")
    if circ["mixer"] == DECOUPLED:
        circ["constraint_mode"] = "dynamical_decoupling"
    if circ["constraint_mode"] == "dynamical_decoupling":
        circ["mixer"] = DECOUPLED
    for m in opt["method"]:
        if m not in ("es", "qn"):
            raise ConfigError(f"unknown optimizer method {m!r}")
    if int(opt["runs"]) < 1:
        raise ConfigError("runs must be >= 1")
    if int(circ["candidates"]) < 1:
        raise ConfigError("candidates must be >= 1")
    return cfg


def canonical_json(cfg: dict) -> str:
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    return json.dumps(public, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def dump_ini(cfg: dict) -> str:
    lines = []
    for section in sorted(k for k in cfg if not k.startswith("_")):
        lines.append(f"[{section}]")
        for key in sorted(cfg[section]):
            lines.append(f"{key} = {json.dumps(cfg[section][key], sort_keys=True)}")
        lines.append("")
    return "\n".join(lines)


# ------------------------------------------------------- custom expressions

_BINOPS = {
    ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
    ast.Div: operator.truediv, ast.Pow: operator.pow, ast.Mod: operator.mod,
    ast.FloorDiv: operator.floordiv,
}
_CMPOPS = {
    ast.Eq: operator.eq, ast.NotEq: operator.ne, ast.Lt: operator.lt,
    ast.LtE: operator.le, ast.Gt: operator.gt, ast.GtE: operator.ge,
}
_FUNCS = {"abs": np.abs, "min": np.minimum, "max": np.maximum}


def compile_expression(expr: str, num_qudits: int):
    """Vectorized ``digits -> values`` for an arithmetic expression in ``z0, z1, ...``."""
    tree = ast.parse(str(expr), mode="eval")

    def ev(node, D):
        if isinstance(node, ast.Expression):
            return ev(node.body, D)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id.startswith("z") and node.id[1:].isdigit():
                q = int(node.id[1:])
                if q >= num_qudits:
                    raise ConfigError(f"{node.id} exceeds {num_qudits} qudits")
                return D[:, q].astype(np.float64)
            raise ConfigError(f"unknown name {node.id!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, D), ev(node.right, D))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand, D)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Compare) and len(node.ops) == 1 and type(node.ops[0]) in _CMPOPS:
            out = _CMPOPS[type(node.ops[0])](ev(node.left, D), ev(node.comparators[0], D))
            return np.asarray(out, dtype=np.float64)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            args = [ev(a, D) for a in node.args]
            if node.func.id == "abs":
                return _FUNCS["abs"](*args)
            return _FUNCS[node.func.id](*args)
        raise ConfigError(f"unsupported expression element {ast.dump(node)[:40]}")

    ev(tree, np.zeros((1, num_qudits), dtype=np.int64))  # validate eagerly

    def fn(digits):
        return np.broadcast_to(ev(tree, np.atleast_2d(digits)), (np.atleast_2d(digits).shape[0],)).astype(np.float64)

    return fn


class ExpressionProblem(P._ProblemBase):
    """Cost and constraints given as arithmetic expressions in ``z0, z1, ...``."""

    def __init__(self, num_qudits: int, dim: int, cost: str, constraints=()):
        self.register = QuditRegister(int(num_qudits), int(dim))
        self.expression = str(cost)
        self._cost = compile_expression(cost, self.register.num_qudits)
        self._constraints = []
        for i, c in enumerate(constraints):
            fn = compile_expression(c["expr"], self.register.num_qudits)
            self._constraints.append(P._constraint(
                fn, c.get("kind", EQUALITY), float(c.get("weight", 1.0)),
                c.get("name", f"c{i}"), c.get("exponent")))

    def _values(self, digits):
        return self._cost(digits)

    def constraints(self):
        return list(self._constraints)


# ---------------------------------------------------------------- problems

def build_problem(spec: dict, base_dir: str | Path = "."):
    spec = dict(spec)
    kind = spec.pop("type")
    try:
        if kind == "bundled":
            name = spec.get("name", "coloring")
            table = P.bundled_instances()
            if name not in table:
                raise ConfigError(f"unknown bundled instance {name!r}; have {sorted(table)}")
            return table[name]
        if kind == "coloring":
            if "edge_file" in spec:
                path = Path(base_dir) / spec.pop("edge_file")
                if not path.exists():
                    raise ConfigError(f"edge file {path} not found")
                spec["edges"] = P.load_edge_list(path)
            if spec.pop("bundled_graph", False):
                spec["edges"] = list(P.BUNDLED_GRAPH_N6)
                spec.setdefault("num_nodes", 6)
            return P.GraphColoringProblem(**spec)
        if kind == "ev":
            return P.EvChargingProblem(**spec)
        if kind == "knapsack":
            return P.KnapsackProblem(**spec)
        if kind == "partition":
            return P.PartitionProblem(**spec)
        if kind == "jobshop":
            return P.JobShopProblem(**spec)
        if kind == "expression":
            return ExpressionProblem(**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for problem type {kind!r}: {exc}") from exc
    raise ConfigError(f"unknown problem type {kind!r}")


class Setup:
    """Everything one run needs, derived deterministically from the config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        circ = cfg["circuit"]
        self.mode = circ["constraint_mode"]
        self.problem = build_problem(cfg["problem"], cfg.get("_base_dir", "."))
        self.register = self.problem.register
        base, cons = P.base_and_constraints(self.problem)
        if circ.get("penalty_weight") is not None:
            cons = [c.with_weight(float(circ["penalty_weight"])) for c in cons]
        self.base, self.constraints = base, cons
        pen = DiagonalHamiltonian(self.register, base.values + penalty_diagonal(self.register, cons))
        self.penalized = pen
        self.projector = None
        self.initial = StateVector(self.register, np.full(self.register.size, self.register.size**-0.5,
                                                          dtype=np.complex128))
        self.mixer = MixerSpec(STANDARD, float(circ["mixer_scale"]))
        full = self.problem.diagonal()
        if self.mode == "none":
            self.circuit, self.evaluate, oracle_vals = full, full, full.values
        elif self.mode == "hamiltonian_penalty":
            self.circuit, self.evaluate, oracle_vals = pen, pen, pen.values
        elif self.mode in ("classical_loop", "conditional"):
            self.circuit, self.evaluate, oracle_vals = base, pen, pen.values
        else:
            eqs = [c for c in cons if c.kind == EQUALITY]
            if not eqs:
                raise ConfigError("dynamical_decoupling needs at least one equality constraint")
            if len(eqs) != len(cons):
                raise ConfigError("dynamical_decoupling supports equality constraints only")
            try:
                self.projector = feasible_projector(self.register, eqs)
            except (InfeasibleError, ConstraintConfigError) as exc:
                raise ConfigError(str(exc)) from exc
            self.initial = feasible_uniform_state(self.projector)
            self.mixer = MixerSpec.decoupled(self.projector, float(circ["mixer_scale"]))
            self.circuit, self.evaluate = base, base
            oracle_vals = np.where(self.projector.feasible_mask, base.values, np.inf)
        self.oracle_min = float(np.min(oracle_vals))
        self.oracle_optima = np.flatnonzero(oracle_vals <= self.oracle_min + P.OPTIMUM_TOL)
        self._fast = None
        if self.mode in ("none", "hamiltonian_penalty", "classical_loop"):
            self._fast = CircuitObjective(self.circuit, self.evaluate, self.initial, float(circ["mixer_scale"]))

    def objective_fn(self, traj_seed: int = 0):
        if self._fast is not None:
            return self._fast
        if self.mode == "dynamical_decoupling":
            def f(x):
                return energy(evolve(self.initial, self.circuit, QaoaParams.from_vector(x), self.mixer), self.evaluate)
            return f

        def g(x):
            probs, _ = self.conditional(x, traj_seed)
            return float(np.dot(probs, self.evaluate.values))
        return g

    def conditional(self, x, traj_seed):
        return run_conditional_ensemble(
            self.initial, self.base, self.penalized, QaoaParams.from_vector(x), self.mixer,
            self.constraints, traj_seed, int(self.cfg["circuit"]["trajectories"]))

    def probabilities(self, x, traj_seed: int = 0):
        if self._fast is not None:
            psi = self._fast.state(x)
            return psi.real**2 + psi.imag**2, None
        if self.mode == "dynamical_decoupling":
            trial = evolve(self.initial, self.circuit, QaoaParams.from_vector(x), self.mixer)
            return trial.probabilities(), None
        probs, run = self.conditional(x, traj_seed)
        return probs, run.summary()


_SETUP_CACHE: dict[str, Setup] = {}


def get_setup(cfg: dict) -> Setup:
    key = config_hash(cfg) + cfg.get("_base_dir", "")
    if key not in _SETUP_CACHE:
        _SETUP_CACHE[key] = Setup(cfg)
    return _SETUP_CACHE[key]


# ------------------------------------------------------------------- runs

def _optimizer(cfg: dict, method: str):
    o = cfg["optimizer"]
    if method == "es":
        return es_optimizer(EsConfig(o["population"], float(o["initial_step"]), int(o["max_generations"])))
    return qn_optimizer(QnConfig(float(o["fd_step"]), int(o["max_iterations"]), float(o["gradient_tolerance"])))


def _candidates_from_probs(setup: Setup, probs: np.ndarray, K: int):
    amp = np.sqrt(np.maximum(probs, 0.0))
    trial = TrialState(StateVector(setup.register, amp), QaoaParams.zeros(1))
    return top_k_candidates(trial, min(K, setup.register.size), setup.evaluate)


def run_one(cfg: dict, p: int, method: str, run_index: int, master_seed: int) -> dict:
    """One optimization run; returns its JSON record."""
    setup = get_setup(cfg)
    o = cfg["optimizer"]
    budget = int(o["budget"]) if o["budget"] is not None else 10**9
    traj_seed = int(np.random.SeedSequence(master_seed, spawn_key=(run_index, p, 1)).generate_state(1)[0])
    fn = setup.objective_fn(traj_seed)
    ranges = (tuple(o["gamma_range"]), tuple(o["beta_range"]))
    start = time.perf_counter()
    rec = single_run(lambda: Objective(fn, budget), _optimizer(cfg, method), run_index, p, ranges, master_seed)
    probs, ancilla = setup.probabilities(rec.best_params, traj_seed)
    cands = _candidates_from_probs(setup, probs, int(cfg["circuit"]["candidates"]))
    optimal = set(int(i) for i in setup.oracle_optima)
    found = sum(1 for c in cands if c.index in optimal)
    gap = optimality_gap(rec.best_value, setup.oracle_min)
    record = {
        "schema": SCHEMA,
        "config_hash": config_hash(cfg),
        "run": run_index,
        "p": p,
        "method": method,
        "master_seed": master_seed,
        "seed": rec.seed,
        "constraint_mode": setup.mode,
        "optimization": rec.to_dict(),
        "params_reduced": [float(v) for v in reduce_angles(rec.best_params)],
        "best_E": float(rec.best_value),
        "oracle_min": setup.oracle_min,
        "oracle_optima": int(setup.oracle_optima.size),
        "gap": gap,
        "n_optima_found": found,
        "candidates": [
            {"index": c.index, "assignment": list(c.assignment), "probability": c.probability, "cost": c.cost}
            for c in cands
        ],
        "seconds": time.perf_counter() - start,
    }
    if ancilla is not None:
        record["ancilla"] = ancilla
    if cfg["circuit"].get("shots"):
        rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(run_index, p, 2)))
        idx = rng.choice(probs.size, size=int(cfg["circuit"]["shots"]), p=probs / probs.sum())
        record["sampled_E"] = float(setup.evaluate.values[idx].mean())
    validate_record(record, setup.register)
    return record


def validate_record(record: dict, register: QuditRegister) -> None:
    total = sum(c["probability"] for c in record["candidates"])
    if total > 1 + 1e-9:
        raise RuntimeError(f"candidate probabilities sum to {total} > 1")
    if record["gap"] < -GAP_TOL:
        raise RuntimeError(f"negative gap {record['gap']}")
    for c in record["candidates"]:
        if not all(0 <= a < register.dim for a in c["assignment"]):
            raise RuntimeError("candidate digit out of range")


def _run_task(args):
    return run_one(*args)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def cmd_run(cfg: dict, out: Path, jobs: int = 1, seed: int | None = None) -> list[dict]:
    setup = get_setup(cfg)  # config errors surface before any compute
    o = cfg["optimizer"]
    master = int(o["seed"] if seed is None else seed)
    if "es" in o["method"] and o["budget"] is not None:
        from quditqaoa.optimize import default_population
        for p in cfg["circuit"]["p"]:
            lam = o["population"] or default_population(2 * p)
            if int(o["budget"]) <= lam:
                raise ConfigError(f"budget {o['budget']} must exceed the ES population {lam} at p={p}")
    tasks = []
    for p in cfg["circuit"]["p"]:
        for method in o["method"]:
            runs = int(o["runs"]) if method == "es" else int(o["qn_runs"] or 6 * int(o["runs"]))
            tasks.extend((cfg, p, method, r, master) for r in range(runs))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_run_task(t) for t in tasks]
    del setup

    rec_dir = out / "records"
    rec_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", json.loads(canonical_json(cfg)))
    for rec in records:
        _write_json(rec_dir / f"p{rec['p']}_{rec['method']}_run{rec['run']:04d}.json", rec)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for rec in records:
            w.writerow([_fmt(rec[k]) if k != "evals" else rec["optimization"]["evaluations_used"]
                        for k in ["run", "p", "method", "seed", "best_E", "gap", "n_optima_found", "evals", "seconds"]])
    return records


def _grid(spec) -> np.ndarray:
    start, stop, count = spec
    return np.linspace(float(start), float(stop), int(count))


def cmd_landscape(cfg: dict, out: Path) -> np.ndarray:
    if cfg["circuit"]["p"] != [1]:
        raise ConfigError("landscape requires p = 1")
    setup = get_setup(cfg)
    gammas, betas = _grid(cfg["landscape"]["gamma"]), _grid(cfg["landscape"]["beta"])
    fn = setup.objective_fn(0)
    grid = np.array([[fn(np.array([g, b])) for g in gammas] for b in betas])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "landscape.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["beta\\gamma"] + [repr(float(g)) for g in gammas])
        for b, row in zip(betas, grid):
            w.writerow([repr(float(b))] + [repr(float(v)) for v in row])
    return grid


def cmd_brute_force(cfg: dict, out: Path) -> dict:
    setup = get_setup(cfg)
    values = setup.evaluate.values
    if setup.projector is not None:
        values = np.where(setup.projector.feasible_mask, values, np.inf)
    from quditqaoa.register import assignment_of
    result = {
        "schema": SCHEMA,
        "config_hash": config_hash(cfg),
        "constraint_mode": setup.mode,
        "min": setup.oracle_min,
        "count": int(setup.oracle_optima.size),
        "optima": [
            {"index": int(i), "assignment": list(assignment_of(setup.register, int(i))), "cost": float(values[i])}
            for i in setup.oracle_optima
        ],
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "optima.json", result)
    return result


def encode_check(problem, poly_text: str | None = None) -> dict:
    """Max deviations between encodings of the problem's cost."""
    diag = problem.diagonal()
    vals = diag.values
    report = {"size": int(diag.register.size)}
    report["dft_roundtrip"] = float(np.max(np.abs(idft_cost(dft_cost(diag)).real - vals)))
    zpoly = z_polynomial_from_cost(diag)
    report["z_polynomial"] = float(np.max(np.abs(z_polynomial_values(zpoly) - vals)))
    lz = problem.lz_polynomial()
    if lz is not None:
        report["lz_polynomial"] = float(np.max(np.abs(diagonal_from_lz_polynomial(lz).values - vals)))
    else:
        lz = lz_polynomial_from_monomials(diag.register, monomials_from_diagonal(diag))
        report["lz_interpolated"] = float(np.max(np.abs(diagonal_from_lz_polynomial(lz).values - vals)))
    closed = problem.z_polynomial()
    if closed is not None:
        report["z_closed_form"] = float(np.max(np.abs(z_polynomial_values(closed) - vals)))
    if poly_text is not None:
        given = parse_z_polynomial(poly_text, diag.register)
        report["z_file"] = float(np.max(np.abs(z_polynomial_values(given) - vals)))
        keys = set(given.terms) | set(zpoly.terms)
        worst = max(keys, key=lambda k: abs(given.terms.get(k, 0j) - zpoly.terms.get(k, 0j)))
        diff = given.terms.get(worst, 0j) - zpoly.terms.get(worst, 0j)
        report["worst_term"] = {"exponents": list(worst), "deviation": abs(diff),
                                "expected": [zpoly.terms.get(worst, 0j).real, zpoly.terms.get(worst, 0j).imag]}
    checks = [v for k, v in report.items() if isinstance(v, float)]
    report["max_deviation"] = max(checks)
    report["pass"] = report["max_deviation"] < ENCODE_TOL
    return report


def cmd_report(run_dir: Path) -> list[dict]:
    files = sorted((run_dir / "records").glob("*.json")) if (run_dir / "records").is_dir() else []
    if not files:
        raise ConfigError(f"no records under {run_dir}")
    groups: dict[tuple[int, str], list[dict]] = {}
    for f in files:
        rec = json.loads(f.read_text())
        groups.setdefault((rec["p"], rec["method"]), []).append(rec)
    rows = []
    for (p, method), recs in sorted(groups.items()):
        gaps = np.array([r["gap"] for r in recs])
        found = np.array([r["n_optima_found"] for r in recs])
        rows.append({
            "p": p, "method": method, "runs": len(recs),
            "best_gap": float(gaps.min()), "median_gap": float(np.median(gaps)),
            "mean_found": float(found.mean()), "min_found": int(found.min()), "max_found": int(found.max()),
            "oracle_optima": int(recs[0]["oracle_optima"]),
        })
    with open(run_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in REPORT_COLUMNS])
    with open(run_dir / "traces.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "method", "run", "step", "best_value"])
        for (p, method), recs in sorted(groups.items()):
            for r in sorted(recs, key=lambda r: r["run"]):
                for step, v in enumerate(r["optimization"]["trace"]):
                    w.writerow([p, method, r["run"], step, repr(float(v))])
    return rows


# --------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quditqaoa", description="Qudit QAOA experiments")
    ap.add_argument("--limit-dim", type=int, default=None, help="cap on d**N (default 2**24)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, need_config=True):
        if need_config:
            sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--limit-dim", type=int, default=None, dest="limit_dim_sub")
        return sp

    ec = common(sub.add_parser("encode-check", help="compare cost encodings"))
    ec.add_argument("--poly", default=None, help="z-polynomial file to compare against")
    rn = common(sub.add_parser("run", help="multi-start optimization"))
    rn.add_argument("--jobs", type=int, default=1)
    rn.add_argument("--seed", type=int, default=None)
    common(sub.add_parser("landscape", help="p=1 energy grid"))
    common(sub.add_parser("brute-force", help="exact optima"))
    rp = sub.add_parser("report", help="aggregate a run directory")
    rp.add_argument("run_dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    limit = getattr(args, "limit_dim_sub", None) or args.limit_dim
    if limit is not None:
        set_dim_limit(limit)
    try:
        if args.command == "report":
            rows = cmd_report(Path(args.run_dir))
            print(",".join(REPORT_COLUMNS))
            for r in rows:
                print(",".join(_fmt(r[k]) for k in REPORT_COLUMNS))
            return 0
        cfg = read_config(args.config)
        out = Path(args.out or Path(cfg["_base_dir"]) / cfg["output"]["directory"])
        if args.command == "encode-check":
            poly = Path(args.poly).read_text() if args.poly else None
            report = encode_check(get_setup(cfg).problem, poly)
            print(json.dumps(report, indent=2, sort_keys=True))
            if not report["pass"]:
                if "worst_term" in report:
                    print(f"worst term: exponents {report['worst_term']['exponents']} "
                          f"off by {report['worst_term']['deviation']:.3g}", file=sys.stderr)
                return 1
            return 0
        if args.command == "run":
            records = cmd_run(cfg, out, args.jobs, args.seed)
            best = min(records, key=lambda r: r["gap"])
            print(f"{len(records)} runs written to {out}; best gap {best['gap']:.6g} (p={best['p']}, {best['method']})")
            return 0
        if args.command == "landscape":
            grid = cmd_landscape(cfg, out)
            print(f"landscape {grid.shape[0]}x{grid.shape[1]} written to {out / 'landscape.csv'}")
            return 0
        if args.command == "brute-force":
            res = cmd_brute_force(cfg, out)
            print(f"min {res['min']:.12g}, {res['count']} optima written to {out / 'optima.json'}")
            return 0
    except (ConfigError, DomainError, ConstraintConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
