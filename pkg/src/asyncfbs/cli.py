"""Experiment harness: ``asyncfbs run | theory | validate``.

Config files are strict JSON; unknown keys are errors.  A minimal dispatch
config is ``{"problem": {"kind": "dispatch", "n_buildings": 5}}``; every
other field has a default (see :class:`ExperimentConfig`).

``run`` writes into the output directory::

    config.json       normalised config (parse -> serialise is the identity)
    problem.json      the generated instance
    summary.json      final accuracies, update counts, theory flags
    <algorithm>/      trace.csv, iterates.bin, trace.json, distances.csv
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import typing
from dataclasses import dataclass, field

import numpy as np

from . import dispatch as dsp
from .engines import SyncParams
from .errors import ParameterError, TraceFormatError
from .instances import QuadraticInstance, make_quadratic
from .protocol import AsyncParams, check_decomposition, run_async, run_sync_timed, verify_delay_bounds
from .scheduler import PROFILE_TIMES, AgentProfile, ScheduleConfig, measure_tau
from .theory import TheoryInputs, best_delta_epsilon, check_iss, compute_nu, theory_constants
from .trace import Trace, fmt

ALGORITHMS = ("sync", "async_coordinate", "async_aggregated", "async_inertial")
# (update rule, eta, beta) per variant
VARIANTS = {
    "sync": ("synchronous", 0.9, 0.0),
    "async_coordinate": ("coordinate", 0.9, 0.0),
    "async_aggregated": ("aggregated", 0.9, 0.0),
    "async_inertial": ("aggregated", 0.9, 0.99),
}
QUAD_CLASSES = ("small", "medium", "large", "battery")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config schema
# --------------------------------------------------------------------------


@dataclass
class ProblemSpec:
    """``kind`` is ``dispatch`` or ``quadratic``; the other fields apply to one kind each."""

    kind: str = "dispatch"
    # dispatch
    n_buildings: int = 5
    T_h: int = 24
    alpha1: float = 1e-2
    alpha2: float = 1e4
    temp_penalty: float = 1e3
    soc_penalty: float = 1e3
    track_fraction: float = 0.8
    # quadratic
    n_blocks: int = 3
    block_size: int = 2
    mu: float = 0.5
    L: float = 1.0
    box: float = 1.0

    def validate(self, where):
        if self.kind not in ("dispatch", "quadratic"):
            raise ConfigError(f"{where}.kind: expected 'dispatch' or 'quadratic', got {self.kind!r}")
        if self.n_buildings < 1 or self.T_h < 1 or self.n_blocks < 1 or self.block_size < 1:
            raise ConfigError(f"{where}: sizes must be >= 1")


@dataclass
class AlgorithmSpec:
    eta: float = 0.9
    beta: float = 0.0

    def validate(self, where):
        if not 0 < self.eta <= 1:
            raise ConfigError(f"{where}.eta: must lie in (0, 1]")
        if not 0 <= self.beta < 1:
            raise ConfigError(f"{where}.beta: must lie in [0, 1)")


@dataclass
class ScheduleSpec:
    """``profiles`` is ``null`` (derive from the agent classes) or a list of
    class labels / ``[mean_s, std_s]`` pairs, one per agent."""

    tau_epochs: int = 1000
    coordinator_service_s: float = 0.0
    latency_s: float = 0.0
    pull_policy: str = "fifo"
    starvation_guard: str = "enforce"
    mode: str = "simulated"
    profiles: typing.Optional[list] = None

    def validate(self, where):
        try:
            ScheduleConfig((AgentProfile(0, 1.0),), tau_epochs=self.tau_epochs,
                           coordinator_service_s=self.coordinator_service_s, latency_s=self.latency_s,
                           pull_policy=self.pull_policy, starvation_guard="off", mode=self.mode)
        except ParameterError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if self.starvation_guard not in ("enforce", "raise", "off"):
            raise ConfigError(f"{where}.starvation_guard: unknown value {self.starvation_guard!r}")


@dataclass
class TheorySpec:
    """``tau`` overrides the delay used for the constants (default: measured)."""

    delta: float = 1.0
    epsilon: typing.Optional[float] = None
    search: bool = False
    tau: typing.Optional[int] = None

    def validate(self, where):
        if not self.delta > 0:
            raise ConfigError(f"{where}.delta: must be positive")
        if self.tau is not None and self.tau < 1:
            raise ConfigError(f"{where}.tau: must be >= 1")


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    params: dict = field(default_factory=dict)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    theory: TheorySpec = field(default_factory=TheorySpec)
    time_budget_s: float = 40.0
    seed: int = 0
    output_dir: str = "runs/latest"
    gamma_factor: float = 0.2
    start: str = "baseline"
    stop_tol: float = 1e-12
    max_iters: int = 10_000_000
    dense_trace: bool = False

    def validate(self):
        self.problem.validate("problem")
        self.schedule.validate("schedule")
        self.theory.validate("theory")
        if not self.algorithms:
            raise ConfigError("algorithms: need at least one")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"algorithms: unknown algorithm {a!r} (choose from {', '.join(ALGORITHMS)})")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms: duplicates")
        for a in self.params:
            if a not in ALGORITHMS:
                raise ConfigError(f"params.{a}: unknown algorithm")
        # fill defaults so that the serialised form is complete
        for a in ALGORITHMS:
            if a not in self.params:
                _, eta, beta = VARIANTS[a]
                self.params[a] = AlgorithmSpec(eta, beta)
            self.params[a].validate(f"params.{a}")
        if not self.time_budget_s > 0:
            raise ConfigError("time_budget_s: must be positive")
        if not 0 < self.gamma_factor < 2:
            raise ConfigError("gamma_factor: must lie in (0, 2)")
        if self.start not in ("baseline", "zero"):
            raise ConfigError("start: 'baseline' or 'zero'")
        if not self.stop_tol > 0 or self.max_iters < 1:
            raise ConfigError("stop_tol > 0 and max_iters >= 1 required")
        return self


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}")
    return cls(**kwargs)


def _coerce(hint, value, where):
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if value is None:
            return None
        inner = [a for a in typing.get_args(hint) if a is not type(None)][0]
        return _coerce(inner, value, where)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if hint is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return list(value)
    if hint is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object")
        return {k: _build(AlgorithmSpec, v, f"{where}.{k}") for k, v in value.items()}
    return value


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "config").validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["params"] = {k: dataclasses.asdict(v) for k, v in sorted(cfg.params.items())}
    return out


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            return parse_config(fh.read())
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------


def build_problem(cfg: ExperimentConfig):
    p = cfg.problem
    if p.kind == "dispatch":
        return dsp.make_problem(p.n_buildings, p.T_h, p.alpha1, p.alpha2, seed=cfg.seed, temp_penalty=p.temp_penalty,
                                soc_penalty=p.soc_penalty, track_fraction=p.track_fraction)
    return make_quadratic(p.n_blocks, p.block_size, p.mu, p.L, p.box, seed=cfg.seed)


def problem_from_dict(d: dict):
    if d.get("kind") == "quadratic":
        return QuadraticInstance.from_dict(d["instance"])
    return dsp.DispatchProblem.from_dict(d["instance"])


def problem_to_dict(problem) -> dict:
    kind = "quadratic" if isinstance(problem, QuadraticInstance) else "dispatch"
    return {"kind": kind, "instance": problem.to_dict()}


def agent_labels(problem) -> list[str]:
    if isinstance(problem, QuadraticInstance):
        return [QUAD_CLASSES[i % len(QUAD_CLASSES)] for i in range(problem.partition.N)]
    return problem.labels


def constants_of(problem):
    fwd = problem.forward()
    return fwd.L, fwd.mu


def make_pair(problem, cfg: ExperimentConfig):
    L, _ = constants_of(problem)
    return problem.pair(cfg.gamma_factor / L)


def reference_of(problem):
    if isinstance(problem, QuadraticInstance):
        return problem.reference()
    return dsp.solve_reference(problem)


def start_point(problem, cfg: ExperimentConfig):
    if cfg.start == "baseline" and not isinstance(problem, QuadraticInstance):
        return problem.p_hat
    return None


def schedule_of(problem, cfg: ExperimentConfig, seed: int) -> ScheduleConfig:
    s = cfg.schedule
    labels = agent_labels(problem)
    if s.profiles is None:
        profs = [AgentProfile.of_class(i, lab) for i, lab in enumerate(labels)]
    else:
        if len(s.profiles) != len(labels):
            raise ConfigError(f"schedule.profiles: need {len(labels)} entries, got {len(s.profiles)}")
        profs = []
        for i, spec in enumerate(s.profiles):
            if isinstance(spec, str):
                if spec not in PROFILE_TIMES:
                    raise ConfigError(f"schedule.profiles[{i}]: unknown class {spec!r}")
                profs.append(AgentProfile.of_class(i, spec))
            elif isinstance(spec, list) and len(spec) == 2:
                profs.append(AgentProfile(i, float(spec[0]), float(spec[1])))
            else:
                raise ConfigError(f"schedule.profiles[{i}]: expected a class label or [mean_s, std_s]")
    try:
        return ScheduleConfig(tuple(profs), coordinator_service_s=s.coordinator_service_s, seed=seed,
                              tau_epochs=s.tau_epochs, mode=s.mode, latency_s=s.latency_s,
                              pull_policy=s.pull_policy, starvation_guard=s.starvation_guard)
    except ParameterError as exc:
        raise ConfigError(f"schedule: {exc}") from None


def theory_report(N, tau, gamma, L, mu, eta, beta, spec: TheorySpec) -> dict:
    """Constants for one configuration; never raises, failures are reported in the dict."""
    out = {"N": N, "tau": tau, "gamma": gamma, "L": L, "mu": mu, "eta": eta, "beta": beta}
    try:
        nu = compute_nu(gamma, mu, L)
    except ParameterError as exc:
        out.update(guaranteed=False, status="unguaranteed", note=str(exc))
        return out
    out["nu"] = nu
    if not nu > 0:
        out.update(guaranteed=False, status="unguaranteed", note="nu = 0: no linear guarantee (no strong monotonicity)")
        return out
    delta, eps = spec.delta, spec.epsilon
    try:
        if spec.search:
            from .theory import compute_Y_X

            X = compute_Y_X(N, tau, gamma, L, beta)[1]
            delta, eps, _ = best_delta_epsilon(nu, X)
        consts = theory_constants(TheoryInputs(N, tau, gamma, L, mu, beta, delta, eps))
    except ParameterError as exc:
        out.update(guaranteed=False, status="unguaranteed", note=str(exc))
        return out
    d = consts.as_dict(eta)
    out.update(d)
    out["status"] = "guaranteed" if d["guaranteed"] else "unguaranteed"
    if not d["guaranteed"]:
        out["note"] = f"eta = {eta} is not below eta_max = {consts.eta_max:.6g}"
    return out


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def run_algorithm(name, problem, pair, cfg: ExperimentConfig, reference, dense: bool):
    update, _, _ = VARIANTS[name]
    spec = cfg.params[name]
    sched = schedule_of(problem, cfg, cfg.seed)
    x0 = start_point(problem, cfg)
    if name == "sync":
        params = SyncParams(gamma=pair.gamma, eta=spec.eta, beta=spec.beta, max_iters=cfg.max_iters,
                            stop_tol=cfg.stop_tol, x0=x0)
        res, trace = run_sync_timed(pair, params, sched, reference=reference, time_budget=cfg.time_budget_s,
                                    dense=dense)
    else:
        params = AsyncParams(gamma=pair.gamma, eta=spec.eta, beta=spec.beta, max_iters=cfg.max_iters,
                             stop_tol=cfg.stop_tol, x0=x0, update=update, time_budget=cfg.time_budget_s,
                             dense=dense)
        res, trace = run_async(pair, params, sched, reference=reference)
    trace.config["algorithm"] = name
    trace.config["starvation_guard"] = sched.starvation_guard
    return res, trace


def update_counts(trace: Trace, N: int) -> list[int]:
    counts = [0] * N
    for e in trace.compute_events():
        if e.agent < 0:
            counts = [c + 1 for c in counts]
        else:
            counts[e.agent] += 1
    return counts


def write_distances(path, res):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sim_time", "k", "dist", "residual"))
        for t, k, d, r in zip(res.times, res.indices, res.distances, res.residuals):
            w.writerow((fmt(t), int(k), fmt(d), fmt(r)))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def cmd_run(cfg: ExperimentConfig, out_dir: str, dense: bool = False, log=print) -> dict:
    dense = dense or cfg.dense_trace
    os.makedirs(out_dir, exist_ok=True)
    problem = build_problem(cfg)
    pair = make_pair(problem, cfg)
    L, mu = constants_of(problem)
    x_star = reference_of(problem)
    ref_res = pair.residual(x_star)
    n_star = float(np.linalg.norm(x_star))
    labels = agent_labels(problem)
    N = pair.N
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        fh.write(dump_config(cfg))
    with open(os.path.join(out_dir, "problem.json"), "w") as fh:
        json.dump(problem_to_dict(problem), fh, sort_keys=True)
        fh.write("\n")
    algs = {}
    for name in cfg.algorithms:
        res, trace = run_algorithm(name, problem, pair, cfg, x_star, dense)
        adir = os.path.join(out_dir, name)
        trace.save(adir)
        write_distances(os.path.join(adir, "distances.csv"), res)
        counts = update_counts(trace, N)
        tau_obs = measure_tau(trace).tau_obs if trace.n_computes else math.inf
        by_class = {}
        for lab, c in zip(labels, counts):
            by_class.setdefault(lab, []).append(c)
        tau_theory = cfg.theory.tau or (int(tau_obs) if math.isfinite(tau_obs) else cfg.schedule.tau_epochs)
        spec = cfg.params[name]
        theo = theory_report(N, max(int(tau_theory), 1), pair.gamma, L, mu, spec.eta, spec.beta, cfg.theory)
        final = float(res.distances[-1])
        algs[name] = {
            "eta": spec.eta,
            "beta": spec.beta,
            "final_distance": final / n_star if n_star > 0 else final,
            "final_distance_abs": final,
            "final_residual": float(res.residuals[-1]),
            "iterations": int(res.iterations),
            "sim_time": float(res.times[-1]) if res.times is not None and len(res.times) else 0.0,
            "terminated_by": res.terminated_by,
            "tau_obs": tau_obs,
            "updates_per_agent": counts,
            "updates_by_class": {k: float(np.mean(v)) for k, v in sorted(by_class.items())},
            "theory": theo,
            "status": theo["status"],
        }
        log(f"{name:18s} dist {algs[name]['final_distance']:.4e}  iters {res.iterations:7d}  "
            f"tau_obs {tau_obs}  [{theo['status']}]")
    ranking = sorted(algs, key=lambda a: (algs[a]["final_distance"], a))
    summary = {
        "problem": {"kind": cfg.problem.kind, "N_agents": N, "labels": labels, "L": L, "mu": mu,
                    "gamma": pair.gamma, "dim": pair.partition.total},
        "reference": {"norm": n_star, "residual": ref_res},
        "time_budget_s": cfg.time_budget_s,
        "seed": cfg.seed,
        "algorithms": algs,
        "ranking": ranking,
    }
    summary = _clean(summary)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# --------------------------------------------------------------------------
# theory
# --------------------------------------------------------------------------


def cmd_theory(cfg: ExperimentConfig) -> dict:
    problem = build_problem(cfg)
    pair = make_pair(problem, cfg)
    L, mu = constants_of(problem)
    tau = cfg.theory.tau or cfg.schedule.tau_epochs
    rows = {}
    for name in cfg.algorithms:
        spec = cfg.params[name]
        rows[name] = theory_report(pair.N, tau if name != "sync" else 1, pair.gamma, L, mu, spec.eta, spec.beta,
                                   cfg.theory)
    return _clean(rows)


def format_theory(rows: dict) -> str:
    keys = ("N", "tau", "gamma", "L", "mu", "nu", "Y", "X", "eta_max", "eta", "r", "q", "rate", "status")
    names = list(rows)
    width = max(12, *(len(n) for n in names))
    lines = ["".ljust(10) + "".join(n.rjust(width + 2) for n in names)]
    for k in keys:
        cells = []
        for n in names:
            v = rows[n].get(k, "-")
            cells.append((f"{v:.6g}" if isinstance(v, float) else str(v)).rjust(width + 2))
        lines.append(k.ljust(10) + "".join(cells))
    for n in names:
        if "note" in rows[n]:
            lines.append(f"{n}: {rows[n]['note']}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------


def load_run_problem(trace_dir: str, cfg: ExperimentConfig | None):
    """The instance a trace was produced on: ``problem.json`` next to it, else rebuilt from ``cfg``."""
    for cand in (os.path.join(trace_dir, "problem.json"), os.path.join(os.path.dirname(os.path.abspath(trace_dir)),
                                                                       "problem.json")):
        if os.path.exists(cand):
            with open(cand) as fh:
                return problem_from_dict(json.load(fh))
    if cfg is None:
        raise ConfigError("no problem.json beside the trace; pass --config")
    return build_problem(cfg)


def cmd_validate(trace_dir: str, cfg: ExperimentConfig | None = None) -> dict:
    trace = Trace.load(trace_dir)
    trace.require_dense()
    problem = load_run_problem(trace_dir, cfg)
    fwd = problem.forward()
    pair = problem.pair(trace.config["gamma"])
    report = {"trace": trace_dir, "n_computes": trace.n_computes}

    dec = check_decomposition(trace, pair)
    report["decomposition"] = {"passed": dec.first_failure is None, "max_violation": dec.max_violation,
                               "worst_k": dec.worst_k, "first_failure_k": dec.first_failure,
                               "n_checked": dec.n_checked, "norm_bound_violations": dec.bound_violations}

    tau_decl = int(trace.config.get("tau_epochs", 0)) or None
    tau_rep = measure_tau(trace) if trace.n_computes else None
    tau_obs = tau_rep.tau_obs if tau_rep else math.inf
    delay = {"tau_declared": tau_decl, "tau_obs": tau_obs}
    if tau_decl is not None:
        dr = verify_delay_bounds(trace, tau_decl)
        delay.update(passed=dr.passed and tau_obs <= tau_decl, max_read=dr.max_read, max_write=dr.max_write,
                     max_prev=dr.max_prev, violations=dr.violations[:20])
        if tau_obs > tau_decl:
            worst = max(tau_rep.per_agent, key=lambda a: tau_rep.per_agent[a])
            delay["gap_violation"] = {"agent": worst, "gap": tau_rep.per_agent[worst]}
    else:
        delay["passed"] = True
    report["delay"] = delay

    iss = {"applicable": False}
    if math.isfinite(tau_obs):
        x_star = reference_of(problem)
        V = np.sum((trace.iterates - x_star) ** 2, axis=1)
        theo = theory_report(pair.N, max(int(tau_obs), 1), pair.gamma, fwd.L, fwd.mu, trace.config["eta"],
                             trace.config["beta"], TheorySpec())
        if theo.get("guaranteed"):
            try:
                rep = check_iss(V, theo["r"], theo["q"], 6 * int(tau_obs))
            except ParameterError as exc:
                iss["note"] = f"contraction below floating-point resolution ({exc})"
            else:
                iss = {"applicable": True, "passed": rep.envelope_ok, "recursion_fraction": rep.recursion_fraction,
                       "s": rep.s, "first_violation": rep.first_violation}
        else:
            iss["note"] = theo.get("note", "outside the guaranteed parameter range")
    report["iss"] = iss
    report["passed"] = bool(report["decomposition"]["passed"] and delay["passed"] and iss.get("passed", True))
    return _clean(report)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="asyncfbs", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "run the configured algorithms"), ("theory", "print the rate constants"),
                      ("validate", "check a dense trace")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        if name == "run":
            p.add_argument("--out", help="output directory (default: config output_dir)")
            p.add_argument("--dense-trace", action="store_true", help="keep every iterate")
        if name == "theory":
            p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
        if name == "validate":
            p.add_argument("trace", help="trace directory written by run")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "validate":
            cfg = None
        else:
            cfg = ExperimentConfig().validate()
        if cfg is not None and args.seed is not None:
            cfg.seed = args.seed
        if args.command == "run":
            out = args.out or cfg.output_dir
            summary = cmd_run(cfg, out, dense=args.dense_trace)
            print("ranking: " + " < ".join(summary["ranking"]))
            return 0
        if args.command == "theory":
            rows = cmd_theory(cfg)
            print(json.dumps(rows, indent=2, sort_keys=True) if args.json else format_theory(rows))
            return 0
        report = cmd_validate(args.trace, cfg)
        print(json.dumps(report, indent=2, sort_keys=True))
        return 0 if report["passed"] else 1
    except (ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
