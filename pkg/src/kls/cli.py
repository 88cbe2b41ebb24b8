"""``kls`` command line: decompose, sample, analyze and certify from a JSON run config.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 the eigenvalue decay violates the small-ball hypothesis.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

import jsonschema
import numpy as np

from . import analysis
from .exceptions import HypothesisViolated, InvalidArgument, KLError
from .grid import from_config as grid_from_config
from .io import atomic_write_text, fmt, format_table, write_json
from .kernels import Tabulated, kernel_from_dict, load_tabulated
from .sampling import CoefficientLaw, resolve_threads, sample_batch
from .spectral import SpectralDecomposition, check_invariants, decompose

log = logging.getLogger("kls")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 2, 3, 4

_POS = {"type": "number", "exclusiveMinimum": 0}
_KERNEL_SCHEMAS = [
    {"properties": {"variant": {"const": "BrownianMotion"}, "sigma2": _POS}},
    {"properties": {"variant": {"const": "BrownianBridge"}, "sigma2": _POS}},
    {"properties": {"variant": {"const": "OrnsteinUhlenbeck"}, "a": _POS, "sigma": _POS}},
    {"properties": {"variant": {"const": "Matern"}, "a": _POS, "sigma": _POS, "alpha": _POS,
                    "d": {"type": "integer", "minimum": 1}}},
    {"properties": {"variant": {"const": "Constant"}, "c": _POS}},
    {"properties": {"variant": {"const": "Tabulated"}, "gram_csv": {"type": "string"},
                    "grid_json": {"type": "string"}, "gram": {"type": "array"},
                    "grid": {"type": "object"}}},
]
for _s in _KERNEL_SCHEMAS:
    _s.update(type="object", required=["variant"], additionalProperties=False)

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kernel", "grid"],
    "properties": {
        "kernel": {"oneOf": _KERNEL_SCHEMAS},
        "grid": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["n"],
                 "properties": {"rule": {"enum": ["uniform_midpoint", "uniform", "gauss_legendre", "gauss"]},
                                "a": {"type": "number"}, "b": {"type": "number"},
                                "n": {"type": "integer", "minimum": 1}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["a", "b", "nodes", "weights"],
                 "properties": {"a": {"type": "number"}, "b": {"type": "number"},
                                "nodes": {"type": "array", "items": {"type": "number"}},
                                "weights": {"type": "array", "items": {"type": "number"}},
                                "rule_tag": {"type": "string"}}},
            ]
        },
        "rank": {"type": ["integer", "null"], "minimum": 0},
        "drop_tol": {"type": "number", "minimum": 0},
        "law": {"oneOf": [
            {"enum": ["Gaussian", "Rademacher", "StudentT"]},
            {"type": "object", "additionalProperties": False, "required": ["name"],
             "properties": {"name": {"enum": ["Gaussian", "Rademacher", "StudentT"]},
                            "dof": {"type": "number"}}},
        ]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "replicates": {"type": "integer"},
        "truncation": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "full"}]},
        "truncations": {"type": "array", "minItems": 1,
                        "items": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "full"}]}},
        "norm": {"enum": ["L2", "power"]},
        "beta": {"type": "number"},
        "epsilons": {"type": "array", "items": {"type": "number"}},
        "method": {"enum": ["plain", "tilted"]},
        "fit_range": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        "d": {"type": "integer", "minimum": 1},
        "window": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "threshold": {"type": "number", "exclusiveMinimum": 0},
    },
}


class ConfigError(Exception):
    pass


def load_config(path: str, seed_override: int | None = None) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    if seed_override is not None:
        cfg["seed"] = seed_override
    cfg["_base"] = os.path.dirname(os.path.abspath(path))
    return cfg


def build_inputs(cfg):
    grid = grid_from_config(cfg["grid"])
    kd = dict(cfg["kernel"])
    if kd["variant"] == "Tabulated" and "gram_csv" in kd:
        base = cfg["_base"]
        gram_csv = os.path.join(base, kd["gram_csv"])
        if "grid_json" in kd:
            kernel = load_tabulated(gram_csv, os.path.join(base, kd["grid_json"]))
        else:
            kernel = Tabulated(grid, np.loadtxt(gram_csv, delimiter=",", ndmin=2))
    elif kd["variant"] == "Tabulated" and "grid" not in kd:
        kernel = Tabulated(grid, np.asarray(kd.get("gram"), dtype=float))
    else:
        kernel = kernel_from_dict(kd)
    return kernel, grid


def _cache_key(kernel, grid, rank, drop_tol) -> str:
    blob = json.dumps({"kernel": kernel.to_dict(), "grid": grid.to_dict(), "rank": rank,
                       "drop_tol": drop_tol}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def get_decomposition(cfg, cache_dir: str | None):
    kernel, grid = build_inputs(cfg)
    rank = cfg.get("rank")
    drop_tol = cfg.get("drop_tol", 1e-12)
    path = None
    if cache_dir:
        path = os.path.join(cache_dir, f"decomp-{_cache_key(kernel, grid, rank, drop_tol)}.npz")
        if os.path.exists(path):
            with np.load(path) as data:
                log.info("reusing cached decomposition %s", path)
                dec = SpectralDecomposition(grid, data["mu"], data["efuns"], str(data["tag"]),
                                            float(data["drop_tol"]), float(data["trace"]))
            return kernel, dec
    dec = decompose(kernel, grid, max_rank=rank, drop_tol=drop_tol)
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = path + f".{os.getpid()}.tmp.npz"
        np.savez(tmp, mu=dec.mu, efuns=dec.efuns, tag=dec.kernel_tag,
                 drop_tol=dec.drop_tol, trace=dec.trace)
        os.replace(tmp, path)
    return kernel, dec


def _provenance(cfg, dec, **extra):
    d = {"kernel": dec.kernel_tag, "grid_size": dec.grid.n, "rank": dec.rank,
         "seed": cfg.get("seed", 0)}
    d.update(extra)
    return d


def _truncation_value(value, rank):
    return rank if value in (None, "full") else int(value)


# ------------------------------------------------------------------ commands


def cmd_eig(cfg, out, cache, threads):
    kernel, dec = get_decomposition(cfg, cache)
    problems = check_invariants(dec, kernel)
    dec.save(out)
    if problems:
        for p in problems:
            print(f"invariant violated: {p}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"rank {dec.rank}; mu_1 = {fmt(dec.mu[0])}; sum mu = {fmt(dec.mu.sum())}")
    return EXIT_OK


def cmd_sample(cfg, out, cache, threads):
    replicates = cfg.get("replicates", 1)
    if replicates < 1:
        raise ConfigError("replicates must be at least 1")
    _, dec = get_decomposition(cfg, cache)
    law = CoefficientLaw.parse(cfg.get("law", "Gaussian"))
    m = _truncation_value(cfg.get("truncation"), dec.rank)
    seed = cfg.get("seed", 0)
    paths = sample_batch(dec, law, m, replicates, seed, n_jobs=threads)
    lines = [",".join([str(seed), str(p.replicate_index)] + [fmt(v) for v in p.values]) for p in paths]
    atomic_write_text(os.path.join(out, "paths.csv"), "\n".join(lines) + "\n")
    write_json(os.path.join(out, "manifest.json"),
               _provenance(cfg, dec, law=law.to_dict(), m=m, replicates=replicates,
                           nodes=dec.grid.nodes, columns="seed,replicate_index,values..."))
    print(f"wrote {replicates} paths of {dec.grid.n} values")
    return EXIT_OK


def cmd_truncation(cfg, out, cache, threads):
    _, dec = get_decomposition(cfg, cache)
    law = CoefficientLaw.parse(cfg.get("law", "Gaussian"))
    truncs = [_truncation_value(v, dec.rank) for v in cfg.get("truncations", [0, "full"])]
    rep = analysis.truncation_error_curve(
        dec, law, truncs, cfg.get("replicates", 10_000), cfg.get("seed", 0),
        norm=cfg.get("norm", "L2"), beta=cfg.get("beta"), n_jobs=threads)
    atomic_write_text(os.path.join(out, "truncation.csv"), rep.to_csv())
    write_json(os.path.join(out, "truncation.json"), {**_provenance(cfg, dec), **rep.to_dict()})
    for m, e, s, p in zip(rep.truncations, rep.empirical_mse, rep.std_error, rep.predicted_tail):
        print(f"m={m}: empirical {e:.6g} +- {s:.2g}, predicted {p:.6g}")
    return EXIT_OK


def _fit(cfg, dec):
    fr = cfg.get("fit_range")
    return analysis.fit_decay(dec, tuple(fr) if fr else None)


def cmd_smallball(cfg, out, cache, threads):
    _, dec = get_decomposition(cfg, cache)
    if "beta" not in cfg or "epsilons" not in cfg:
        raise ConfigError("smallball needs 'beta' and 'epsilons'")
    rep = analysis.small_ball_estimate(
        dec, cfg["beta"], cfg["epsilons"], cfg.get("replicates", 100_000), cfg.get("seed", 0),
        law=cfg.get("law", "Gaussian"), fit=_fit(cfg, dec), method=cfg.get("method", "plain"),
        n_jobs=threads)
    atomic_write_text(os.path.join(out, "smallball.csv"), rep.to_csv())
    write_json(os.path.join(out, "smallball.json"), {**_provenance(cfg, dec), **rep.to_dict()})
    print(f"fitted exponent {rep.fitted_exponent:.4g}; predicted {rep.predicted_exponent:.4g}")
    return EXIT_OK


def cmd_certify(cfg, out, cache, threads):
    _, dec = get_decomposition(cfg, cache)
    fit = _fit(cfg, dec)
    cert = analysis.smoothness_certificate(fit, cfg.get("d", 1))
    i = np.arange(1, dec.rank + 1)
    fitted = np.exp(fit.log_c_hat) * i.astype(float) ** (-fit.alpha_hat)
    atomic_write_text(os.path.join(out, "decay.csv"),
                      format_table(["i", "mu", "fitted"], [i, dec.mu, fitted]))
    write_json(os.path.join(out, "certificate.json"),
               {**_provenance(cfg, dec), "fit": fit.to_dict(), "certificate": cert.to_dict()})
    print(f"decay exponent {fit.alpha_hat:.4f} over indices {fit.fit_range[0]}..{fit.fit_range[1]}")
    print(cert.describe())
    if cert.certified_range is not None:
        print(f"certified interval: ({cert.certified_range[0]:g}, {cert.certified_range[1]:.4f})")
    return EXIT_OK


def cmd_probe(cfg, out, cache, threads):
    _, dec = get_decomposition(cfg, cache)
    rep = analysis.dichotomy_probe(
        dec, cfg.get("law", "Gaussian"), cfg.get("beta", 0.75), cfg.get("replicates", 1000),
        cfg.get("seed", 0), window=cfg.get("window", 0.9), threshold=cfg.get("threshold", 0.01),
        n_jobs=threads)
    atomic_write_text(os.path.join(out, "partial_sums.csv"), rep.to_csv())
    write_json(os.path.join(out, "probe.json"), {**_provenance(cfg, dec), **rep.to_dict()})
    print(f"converged fraction {rep.converged_fraction:.4f} at beta = {rep.beta:g}")
    return EXIT_OK


COMMANDS = {
    "eig": cmd_eig,
    "sample": cmd_sample,
    "truncation": cmd_truncation,
    "smallball": cmd_smallball,
    "certify": cmd_certify,
    "probe": cmd_probe,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $KLS_THREADS or 1)")
        sp.add_argument("--cache", default=None,
                        help="decomposition cache directory (default: OUT/.kls-cache)")
        sp.add_argument("--no-cache", action="store_true")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cache = None if args.no_cache else (args.cache or os.path.join(args.out, ".kls-cache"))
    try:
        cfg = load_config(args.config, args.seed)
        threads = resolve_threads(args.threads)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, cache, threads)
    except ConfigError as exc:
        print(f"kls: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisViolated as exc:
        print(f"kls: small-ball hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except InvalidArgument as exc:
        print(f"kls: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KLError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"kls: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
