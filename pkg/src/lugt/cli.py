"""Command line entry point.

    lugt run <config.json>
    lugt spectrum <topology|edge-list> <n>
    lugt bounds <lambda> <T_o> <L> [--eta E] [--alpha A] [--n N]
    lugt gen-data <params.json|inline-json> <out>

Exit status: 0 success, 1 configuration error, 2 divergence in some run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import theory
from .errors import ConfigError, InadmissibleError, TopologyError
from .experiment import load_config, run_experiment
from .objective import dump_data, generate_synthetic
from .topology import build_graph, metropolis_weights, read_edge_list

log = logging.getLogger("lugt")

_GEN_KEYS = {"seed", "n", "p", "m", "noise_scale", "hetero_scale", "rho", "ls_weight", "regularizer"}


def _emit(key, value):
    if isinstance(value, float):
        value = format(value, ".17g")
    elif isinstance(value, (list, tuple)):
        value = ",".join(format(float(v), ".17g") for v in value)
    print(f"{key},{value}")


def cmd_run(args):
    cfg = load_config(args.config)
    res = run_experiment(cfg, output_dir=args.output_dir)
    for path in res.artifacts:
        print(path)
    return res.status


def cmd_spectrum(args):
    if os.path.isfile(args.topology):
        g = read_edge_list(args.topology)
    else:
        if args.n is None:
            raise ConfigError("spectrum: n is required for a named topology")
        g = build_graph(args.topology, args.n)
    mix = metropolis_weights(g)
    _emit("kind", g.kind)
    _emit("n", g.n)
    _emit("edges", len(g.edges))
    _emit("lambda", mix.lam)
    _emit("lambda_bar", mix.lam_bar)
    _emit("well_connected", str(theory.remark2_regime(mix.lam)).lower())
    _emit("eigenvalues", list(mix.eigenvalues))
    return 0


def cmd_bounds(args):
    lam, T_o, L = args.lam, args.T_o, args.L
    em = theory.eta_max(lam, T_o)
    _emit("lambda", lam)
    _emit("lambda_bar", theory.lambda_bar(lam))
    _emit("T_o", T_o)
    _emit("L", L)
    _emit("eta_max", em)
    _emit("well_connected", str(theory.remark2_regime(lam)).lower())
    if args.eta is None:
        return 0
    eta = args.eta
    _emit("eta", eta)
    _emit("theta", theory.theta(lam, eta, T_o))
    terms = theory.alpha_terms(lam, eta, T_o, L)
    for name, v in terms.items():
        _emit(f"alpha_cap_{name}", v)
    _emit("alpha_max", min(terms.values()))
    _emit("binding_term", min(terms, key=terms.get))
    for name, v in theory.alpha_terms_consensus(lam, eta, T_o, L).items():
        _emit(f"consensus_alpha_cap_{name}", v)
    if args.alpha is not None:
        c = theory.lemma5_constants(lam, eta, args.alpha, T_o, L, args.n)
        _emit("alpha", args.alpha)
        _emit("e1", c.e1)
        _emit("e2", c.e2)
        _emit("consensus_margin", 1.0 - c.lambda_bar - c.e1 * T_o)
        bad = theory.violations(lam, eta, args.alpha, T_o, L)
        _emit("admissible", str(not bad).lower())
    return 0


def _load_params(text):
    if os.path.isfile(text):
        with open(text) as fh:
            text = fh.read()
    try:
        params = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"gen-data params: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(params, dict):
        raise ConfigError("gen-data params: expected a JSON object")
    unknown = set(params) - _GEN_KEYS
    if unknown:
        raise ConfigError(f"gen-data params: unknown field(s) {sorted(unknown)}")
    if "n" not in params:
        raise ConfigError("gen-data params: missing required field 'n'")
    return params


def cmd_gen_data(args):
    params = _load_params(args.params)
    seed = params.pop("seed", 0)
    n = params.pop("n")
    data = generate_synthetic(seed, n, **params)
    dump_data(data, args.out)
    print(args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="lugt", description="Decentralized gradient tracking experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None,
                   help="overrides the config and the LUGT_OUTPUT_DIR environment variable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("spectrum", help="spectrum of the Metropolis mixing matrix")
    p.add_argument("topology", help="ring, star, grid2d, complete, or an edge-list file")
    p.add_argument("n", type=int, nargs="?")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("bounds", help="step-size conditions and consensus constants")
    p.add_argument("lam", type=float, metavar="lambda")
    p.add_argument("T_o", type=int)
    p.add_argument("L", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, default=1, help="agent count for e2 (default 1)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("params", help="JSON object or path to a JSON file")
    p.add_argument("out")
    p.set_defaults(func=cmd_gen_data)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TopologyError, InadmissibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
