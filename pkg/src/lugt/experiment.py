"""Config-driven sweeps over topologies, schedules and step sizes."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .algorithms import ALGORITHMS, RunConfig, Schedule, run
from .errors import ConfigError, InadmissibleError
from .metrics import CSV_FIELDS, zeta0
from .objective import Objective, generate_synthetic, load_data
from .plotting import AXIS_LABELS, convergence_figure, save_svg
from .topology import KINDS, build_graph, metropolis_weights, read_edge_list

log = logging.getLogger(__name__)

OUTPUT_ENV = "LUGT_OUTPUT_DIR"
ETA_SAFETY = 0.9

_SYNTH_KEYS = {"seed", "p", "m", "rho", "noise_scale", "hetero_scale", "ls_weight",
               "regularizer", "f_star_lower"}
_RUN_KEYS = {"algorithm", "T_o", "eta", "alpha", "eta_alpha", "K", "record_every",
             "override", "label", "seed"}


@dataclass
class RunSpec:
    algorithm: str
    T_o: int
    K: int
    eta: float | None = None
    alpha: float | None = None
    eta_alpha: float | None = None
    record_every: int = 1
    override: bool = False
    label: str | None = None
    seed: int = 0


@dataclass
class TopologySpec:
    name: str
    kind: str
    n: int
    edge_list: str | None = None
    runs: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    topologies: list
    objective: dict
    output_dir: str = "results"
    plot: bool = True
    x_axis: str = "comm_rounds"
    init: list | float = 0.0


@dataclass
class ExperimentResult:
    status: int
    artifacts: list
    summary: dict | None = None


def split_eta_alpha(eta_alpha, lam, T_o, L=None):
    """Split a step product into ``(eta, alpha)`` with ``eta`` proportional to ``1/T_o``.

    ``eta = 0.9 * eta_max(lam, 1) / T_o``, which stays below
    ``eta_max(lam, T_o)`` for every ``T_o >= 1``; ``alpha`` takes the rest.
    ``L`` is accepted for symmetry with the bound calculators and not used.
    """
    if not eta_alpha > 0:
        raise ConfigError(f"eta_alpha must be positive, got {eta_alpha}")
    eta = ETA_SAFETY * theory.eta_max(lam, 1) / T_o
    alpha = eta_alpha / eta
    if not alpha > 0:
        raise ConfigError(f"split produced non-positive alpha={alpha}")
    return eta, alpha


# -- parsing -------------------------------------------------------------------

def _req(d, key, where, kind=None):
    if key not in d:
        raise ConfigError(f"{where}: missing required field {key!r}")
    v = d[key]
    if kind is not None and (not isinstance(v, kind) or isinstance(v, bool) and kind is not bool):
        raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {v!r}")
    return v


def _num(d, key, where, default=None, positive=True):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v!r}")
    return v


def _parse_run(d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(d) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    alg = d.get("algorithm", "lu_gt")
    if alg not in ALGORITHMS:
        raise ConfigError(f"{where}.algorithm: expected one of {ALGORITHMS}, got {alg!r}")
    T_o = _req(d, "T_o", where, int) if alg != "atc_gt" else d.get("T_o", 1)
    if not isinstance(T_o, int) or T_o < 1:
        raise ConfigError(f"{where}.T_o: must be a positive integer, got {T_o!r}")
    K = _req(d, "K", where, int)
    if K < 1:
        raise ConfigError(f"{where}.K: must be >= 1, got {K}")
    eta, alpha = _num(d, "eta", where), _num(d, "alpha", where)
    eta_alpha = _num(d, "eta_alpha", where)
    if (eta is None) != (alpha is None):
        raise ConfigError(f"{where}: give both eta and alpha, or eta_alpha alone")
    if eta is None and eta_alpha is None:
        raise ConfigError(f"{where}: step sizes missing (eta and alpha, or eta_alpha)")
    if eta is not None and eta_alpha is not None:
        raise ConfigError(f"{where}: eta/alpha and eta_alpha are mutually exclusive")
    rec = d.get("record_every", 1)
    if not isinstance(rec, int) or isinstance(rec, bool) or rec < 1:
        raise ConfigError(f"{where}.record_every: must be a positive integer, got {rec!r}")
    override = d.get("override", False)
    if not isinstance(override, bool):
        raise ConfigError(f"{where}.override: expected true/false, got {override!r}")
    return RunSpec(alg, T_o, K, eta, alpha, eta_alpha, rec, override, d.get("label"),
                   int(d.get("seed", 0)))


def _parse_topology(d, where, base_dir):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    runs = d.get("runs", [])
    if not isinstance(runs, list):
        raise ConfigError(f"{where}.runs: expected a list")
    if "edge_list" in d:
        path = d["edge_list"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        g = read_edge_list(path)
        kind, n = "custom", g.n
        name = d.get("name", os.path.splitext(os.path.basename(path))[0])
    else:
        kind = _req(d, "kind", where, str)
        if kind not in KINDS[:-1]:
            raise ConfigError(f"{where}.kind: expected one of {KINDS[:-1]}, got {kind!r}")
        n = _req(d, "n", where, int)
        name, path = d.get("name", kind), None
    parsed = [_parse_run(r, f"{where}.runs[{i}]") for i, r in enumerate(runs)]
    return TopologySpec(name, kind, n, path, parsed)


def parse_config(raw, base_dir="."):
    """Validate a config mapping; errors name the offending field."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    if "topologies" in raw:
        if "topology" in raw:
            raise ConfigError("config: use either 'topology' or 'topologies', not both")
        tops = raw["topologies"]
        if not isinstance(tops, list):
            raise ConfigError("config.topologies: expected a list")
        if "runs" in raw:
            raise ConfigError("config.runs: with 'topologies', put runs inside each topology")
        topologies = [_parse_topology(t, f"config.topologies[{i}]", base_dir)
                      for i, t in enumerate(tops)]
    else:
        top = dict(_req(raw, "topology", "config", dict))
        top.setdefault("runs", raw.get("runs", []))
        topologies = [_parse_topology(top, "config.topology", base_dir)]
    names = [t.name for t in topologies]
    if len(set(names)) != len(names):
        raise ConfigError(f"config.topologies: duplicate names {names}")

    obj = _req(raw, "objective", "config", dict)
    if "dataset" in obj:
        path = obj["dataset"]
        obj = dict(obj, dataset=path if os.path.isabs(path) else os.path.join(base_dir, path))
    else:
        unknown = set(obj) - _SYNTH_KEYS
        if unknown:
            raise ConfigError(f"config.objective: unknown field(s) {sorted(unknown)}")
    x_axis = raw.get("x_axis", "comm_rounds")
    if x_axis not in AXIS_LABELS:
        raise ConfigError(f"config.x_axis: expected one of {sorted(AXIS_LABELS)}, got {x_axis!r}")
    plot = raw.get("plot", True)
    if not isinstance(plot, bool):
        raise ConfigError(f"config.plot: expected true/false, got {plot!r}")
    out = raw.get("output_dir", "results")
    if not isinstance(out, str):
        raise ConfigError(f"config.output_dir: expected a path string, got {out!r}")
    if not os.path.isabs(out):
        out = os.path.normpath(os.path.join(base_dir, out))
    return ExperimentConfig(topologies, obj, out, plot, x_axis, raw.get("init", 0.0))


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))


# -- execution -----------------------------------------------------------------

def build_objective(spec, n):
    if "dataset" in spec:
        data = load_data(spec["dataset"])
        if data.n != n:
            raise ConfigError(f"config.objective.dataset: holds {data.n} agents, topology has {n}")
    else:
        kw = {k: v for k, v in spec.items() if k not in ("seed", "f_star_lower")}
        data = generate_synthetic(spec.get("seed", 0), n, **kw)
    return Objective(data)


def resolve_steps(rs, lam):
    if rs.eta is not None:
        return rs.eta, rs.alpha
    return split_eta_alpha(rs.eta_alpha, lam, rs.T_o if rs.algorithm != "atc_gt" else 1)


def _finite(v):
    return v if v is None or math.isfinite(v) else None


def theory_report(lam, eta, alpha, T_o, L, n, K, f_tilde_0, z0):
    rep = {"eta": eta, "alpha": alpha, "eta_alpha": eta * alpha, "T_o": T_o,
           "theta": theory.theta(lam, eta, T_o), "lambda_bar": theory.lambda_bar(lam),
           "eta_max": theory.eta_max(lam, T_o), "well_connected": theory.remark2_regime(lam),
           "violations": theory.violations(lam, eta, alpha, T_o, L)}
    rep["admissible"] = not rep["violations"]
    try:
        terms = theory.alpha_terms(lam, eta, T_o, L)
        rep["alpha_terms"] = {k: _finite(v) for k, v in terms.items()}
        rep["alpha_max"] = min(terms.values())
        rep["binding_term"] = min(terms, key=terms.get)
        rep["alpha_terms_consensus"] = {
            k: _finite(v) for k, v in theory.alpha_terms_consensus(lam, eta, T_o, L).items()}
        c = theory.lemma5_constants(lam, eta, alpha, T_o, L, n)
        rep["e1"], rep["e2"] = c.e1, c.e2
        rep["rate_rhs"] = theory.rate_rhs(theory.TheoryParams(
            lam, T_o, eta, alpha, L, n, K, f_tilde_0, z0))
    except InadmissibleError as exc:
        rep["theory_error"] = str(exc)
    return rep


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else format(float(v), ".17g")


def write_csv(records, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(CSV_FIELDS) + "\n")
        for r in records:
            fh.write(",".join(_fmt(getattr(r, f)) for f in CSV_FIELDS) + "\n")
    os.replace(tmp, path)


def _write_json(obj, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False,
                  default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o))
        fh.write("\n")
    os.replace(tmp, path)


def run_experiment(config, output_dir=None):
    """Execute every run of every topology and write CSVs, summary and figures.

    Admissibility of all runs is checked before anything executes. Status is
    0 on success and 2 when at least one run diverged.
    """
    out = output_dir or os.environ.get(OUTPUT_ENV) or config.output_dir
    if not any(t.runs for t in config.topologies):
        log.warning("config has no runs; nothing to do")
        return ExperimentResult(0, [])

    f_star = config.objective.get("f_star_lower", 0.0)
    prepared = []
    objectives = {}
    for top in config.topologies:
        g = read_edge_list(top.edge_list) if top.edge_list else build_graph(top.kind, top.n)
        mix = metropolis_weights(g)
        if g.n not in objectives:
            objectives[g.n] = build_objective(config.objective, g.n)
        obj = objectives[g.n]
        init = np.broadcast_to(np.asarray(config.init, dtype=float), (obj.m,)).copy()
        for i, rs in enumerate(top.runs):
            eta, alpha = resolve_steps(rs, mix.lam)
            T_eff = 1 if rs.algorithm == "atc_gt" else rs.T_o
            bad = theory.violations(mix.lam, eta, alpha, T_eff, obj.smoothness())
            if bad and not rs.override:
                raise ConfigError(
                    f"{top.name}.runs[{i}] ({rs.algorithm}, T_o={rs.T_o}) is outside the "
                    f"admissible region and has no override: " + "; ".join(bad))
            prepared.append((top, g, mix, obj, init, i, rs, eta, alpha))

    os.makedirs(out, exist_ok=True)
    artifacts = []
    summary = {"objective": {}, "topologies": {},
               "assumptions": [f"f* lower bound taken as {f_star} for the rate bound"]}
    curves = {}
    status = 0
    for top, g, mix, obj, init, i, rs, eta, alpha in prepared:
        tsum = summary["topologies"].setdefault(top.name, {
            "kind": top.kind, "n": g.n, "edges": len(g.edges), "lambda": mix.lam,
            "lambda_bar": mix.lam_bar, "eigenvalues": list(mix.eigenvalues), "runs": []})
        T_eff = 1 if rs.algorithm == "atc_gt" else rs.T_o
        cfg = RunConfig(rs.algorithm, eta, alpha, Schedule(T_eff, rs.K), rs.seed, rs.record_every)
        L = obj.smoothness()
        z0 = zeta0(obj, init)
        summary["objective"][str(g.n)] = {
            **{k: v for k, v in config.objective.items() if k != "f_star_lower"},
            "n": g.n, "L": _finite(L), "zeta_0": z0, "f_x0": obj.global_value(init)}
        res = run(cfg, mix, obj, init)
        name = f"{top.name}__{rs.algorithm}__To{rs.T_o}__{i:02d}.csv"
        path = os.path.join(out, name)
        write_csv(res.records, path)
        artifacts.append(path)
        last = res.records[-1] if res.records else None
        tsum["runs"].append({
            "csv": name, "algorithm": rs.algorithm, "K": rs.K, "record_every": rs.record_every,
            "override": rs.override, "diverged": res.diverged, "diverged_at": res.diverged_at,
            "comm_rounds": last.comm_rounds if last else 0,
            "vector_transmissions": 2 * (last.comm_rounds if last else 0) * len(g.edges),
            "final": {f: getattr(last, f) for f in CSV_FIELDS} if last else None,
            "wallclock": last.wallclock if last else 0.0,
            "theory": theory_report(mix.lam, eta, alpha, T_eff, L, g.n, rs.K,
                                    obj.global_value(init) - f_star,
                                    z0),
        })
        if res.diverged:
            log.warning("%s: run %d diverged at iteration %s", top.name, i, res.diverged_at)
            status = 2
        label = rs.label or (f"$T_o$={rs.T_o}" if rs.algorithm == "lu_gt"
                             else f"{rs.algorithm} $T_o$={rs.T_o}")
        curves.setdefault(top.name, []).append((label, res.records))

    spath = os.path.join(out, "summary.json")
    _write_json(summary, spath)
    artifacts.append(spath)
    if config.plot:
        for tname, cs in curves.items():
            fig = convergence_figure(cs, config.x_axis, title=f"{tname} (n={summary['topologies'][tname]['n']})")
            fpath = os.path.join(out, f"{tname}.svg")
            save_svg(fig, fpath)
            artifacts.append(fpath)
    return ExperimentResult(status, artifacts, summary)
