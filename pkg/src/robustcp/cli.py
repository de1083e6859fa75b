"""Command-line interface.

Exit codes: 0 success, 1 input or usage error (or a failed Kruskal check in
``certify``), 2 budget exhausted or refused, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import io as kio
from .decompose import NetSearchConfig, bounded_low_rank_general
from .experiments import planted_multiview, planted_tensor
from .matching import SignFixFailure, align
from .models import gaussian as gm
from .models import hmm
from .models import multiview as mv
from .models._common import LearnerConfig, RecoveryFailure
from .spectral import BudgetExceeded, SeparationFailure, check_kruskal_condition

CONFIG_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_NUMERIC = 0, 1, 2, 3
MODELS = ("multiview", "topic", "hmm", "gaussian")


@dataclass
class ExperimentConfig:
    """Every tunable parameter of every subcommand, with its default."""

    version: int = CONFIG_VERSION
    rank: int = 2
    order: int = 3
    n: int = 3
    tau: list = field(default_factory=lambda: [10.0])
    rho: float | None = None
    eps: float = 0.05
    eta: float = 0.05
    samples: str | None = None
    seed: int = 0
    budget: int = 2_000_000
    net_resolution: float | None = None
    search: str = "guided"
    sigma: str = "estimate"
    window_q: int = 1
    model: str = "multiview"
    n_grid: list = field(default_factory=lambda: [1000, 10000, 100000])
    replications: int = 5
    exact: bool = False
    truth: str | None = None
    timings: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config fields: {unknown}")
        if d.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {d.get('version')!r} (expected {CONFIG_VERSION})")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# flag name -> (config field, parser)
def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> list:
    return [int(float(v)) for v in text.split(",") if v]


FLAGS = {
    "--rank": ("rank", int),
    "--order": ("order", int),
    "--n": ("n", int),
    "--tau": ("tau", _floats),
    "--rho": ("rho", float),
    "--eps": ("eps", float),
    "--eta": ("eta", float),
    "--samples": ("samples", str),
    "--seed": ("seed", int),
    "--budget": ("budget", int),
    "--net-resolution": ("net_resolution", float),
    "--search": ("search", str),
    "--sigma": ("sigma", str),
    "--window-q": ("window_q", int),
    "--model": ("model", str),
    "--n-grid": ("n_grid", _ints),
    "--replications": ("replications", int),
    "--truth": ("truth", str),
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON ExperimentConfig file (flags override it)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--timings", action="store_true", default=None,
                        help="include wall-clock timings (breaks byte-identical reports)")
    common.add_argument("--exact", action="store_true", default=None,
                        help="learn from the exact population moments of the planted model")
    for flag, (_, kind) in FLAGS.items():
        common.add_argument(flag, dest=FLAGS[flag][0], type=kind, default=None)

    p = argparse.ArgumentParser(prog="robustcp", description="Robust tensor decomposition tools.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("decompose", parents=[common], help="bounded low-rank approximation of a JSON tensor")
    d.add_argument("tensor")
    c = sub.add_parser("certify", parents=[common], help="robust Kruskal ranks and condition of a decomposition")
    c.add_argument("decomposition")
    a = sub.add_parser("align", parents=[common], help="align two decompositions")
    a.add_argument("reference")
    a.add_argument("candidate")
    sub.add_parser("learn", parents=[common], help="learn model parameters from samples or a planted model")
    sub.add_parser("sweep", parents=[common], help="median parameter error over a grid of sample sizes")
    g = sub.add_parser("generate", parents=[common], help="write a planted tensor or sample file")
    g.add_argument("kind", choices=("tensor",) + MODELS)
    g.add_argument("--params-out", help="where to write the planted parameters (JSON)")
    sub.add_parser("show-config", parents=[common], help="print the effective configuration")
    return p


def resolve_config(args) -> ExperimentConfig:
    """Defaults, then the config file, then explicit flags."""
    data = ExperimentConfig().to_dict()
    if getattr(args, "config", None):
        loaded = ExperimentConfig.from_dict(kio.load_json(args.config))
        data.update(loaded.to_dict())
    for name in list(FLAGS.values()) + [("timings", None), ("exact", None)]:
        value = getattr(args, name[0], None)
        if value is not None:
            data[name[0]] = value
    cfg = ExperimentConfig.from_dict(data)
    if cfg.model not in MODELS:
        raise ValueError(f"unknown model {cfg.model!r}; choose from {MODELS}")
    return cfg


def _report(command: str, cfg: ExperimentConfig, outputs: dict, started: float) -> dict:
    rep = {"command": command, "config": cfg.to_dict(), "seed": cfg.seed,
           "version": __version__, "outputs": outputs}
    if cfg.timings:
        rep["timings"] = {"wall_seconds": time.perf_counter() - started}
    return rep


def _emit(obj: dict, out: str | None) -> None:
    text = kio.dumps(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _net_config(cfg: ExperimentConfig) -> NetSearchConfig:
    return NetSearchConfig(rank=cfg.rank, rho=cfg.rho if cfg.rho is not None else 1.0, target_eps=cfg.eps,
                           net_resolution=cfg.net_resolution, seed=cfg.seed, budget=cfg.budget,
                           search=cfg.search)


def _learner_config(cfg: ExperimentConfig, target_eps=None) -> LearnerConfig:
    return LearnerConfig(target_eps=target_eps, rho=cfg.rho, net_resolution=cfg.net_resolution,
                         seed=cfg.seed, budget=cfg.budget, search=cfg.search)


def cmd_decompose(args, cfg):
    t = kio.load_tensor(args.tensor)
    res = bounded_low_rank_general(t, _net_config(cfg))
    return res.to_dict(), (EXIT_BUDGET if res.partial else EXIT_OK)


def cmd_certify(args, cfg):
    cp = kio.load_cp(args.decomposition)
    taus = cfg.tau if len(cfg.tau) > 1 else cfg.tau[0]
    report = check_kruskal_condition(cp, taus)
    return report.to_dict(), (EXIT_OK if report.passed else EXIT_INPUT)


def cmd_align(args, cfg):
    ref, cand = kio.load_cp(args.reference), kio.load_cp(args.candidate)
    res = align(ref, cand)
    out = res.to_dict()
    out["within_eta"] = bool(max(res.per_mode_residuals + (res.scaling_product_deviation,)) <= cfg.eta)
    return out, EXIT_OK


def _planted(cfg: ExperimentConfig):
    """Planted parameters for the configured model."""
    if cfg.model in ("multiview", "topic"):
        params = planted_multiview(cfg.seed, cfg.n, cfg.rank, cfg.order)
        if cfg.model == "topic":
            params = mv.topic_params(params.weights, params.means[0], cfg.order)
        return params
    if cfg.model == "hmm":
        return hmm.random_hmm(cfg.n, cfg.rank, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    sigma = 1.0 if cfg.sigma == "estimate" else float(cfg.sigma)
    return gm.GaussianMixtureParams(rng.dirichlet(np.full(cfg.rank, 5.0)),
                                    rng.standard_normal((cfg.n, cfg.rank)), sigma)


def _draw(cfg, params, count: int, seed: int):
    if cfg.model in ("multiview", "topic"):
        return mv.sample_multiview(params, count, seed=seed), "categorical"
    if cfg.model == "hmm":
        return hmm.sample_hmm(params, count, 2 * cfg.window_q + 1, seed=seed), "categorical"
    return gm.sample_gaussian_mixture(params, count, seed=seed), "real"


def _is_count(text) -> bool:
    try:
        float(text)
    except (TypeError, ValueError):
        return False
    return not os.path.exists(str(text))


def _load_truth(cfg):
    d = kio.load_json(cfg.truth)
    if cfg.model in ("multiview", "topic"):
        return mv.MultiViewParams(d["weights"], tuple(np.array(m) for m in d["means"]), probability_columns=False)
    if cfg.model == "hmm":
        return hmm.HMMParams(d["transition"], d["observation"], d["stationary"])
    return gm.GaussianMixtureParams(d["weights"], d["means"], d["sigma"])


def _learn(cfg, samples=None, truth=None):
    """Run the configured learner; returns (estimate, diagnostics)."""
    lc = _learner_config(cfg)
    if cfg.model in ("multiview", "topic"):
        if samples is None:
            return mv.learn_multiview_from_tensor(mv.population_tensor(truth), cfg.rank, lc)
        learn = mv.learn_topic if cfg.model == "topic" else mv.learn_multiview
        return learn(samples, cfg.rank, cfg.order, dims=cfg.n, config=lc)
    if cfg.model == "hmm":
        q = cfg.window_q
        if samples is None:
            tensors = {k: hmm.population_tensor(truth, k) for k in range(max(1, q - 1), q + 1)}
            return hmm.learn_hmm_from_tensors(tensors, cfg.rank, q, cfg.n, lc)
        return hmm.learn_hmm(samples, cfg.rank, q, cfg.n, lc)
    if samples is None:
        return gm.learn_gaussian_from_moments(gm.population_moms(truth, cfg.order), cfg.rank, cfg.order,
                                              truth.sigma, lc)
    sigma = cfg.sigma if cfg.sigma == "estimate" else float(cfg.sigma)
    return gm.learn_gaussian_mixture(samples, cfg.rank, cfg.order, sigma, lc)


def _error(cfg, truth, est) -> dict:
    if cfg.model in ("multiview", "topic"):
        return mv.parameter_error(truth, est)
    if cfg.model == "hmm":
        return hmm.hmm_error(truth, est)
    return gm.gaussian_error(truth, est)


def _json_safe(d):
    if isinstance(d, dict):
        return {str(k): _json_safe(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_json_safe(v) for v in d]
    if isinstance(d, np.ndarray):
        return d.tolist()
    if isinstance(d, np.generic):
        return d.item()
    return d


def cmd_learn(args, cfg):
    truth = None
    samples = None
    if cfg.model == "hmm" and cfg.n ** cfg.window_q > hmm.WINDOW_BUDGET:
        raise ValueError(f"window alphabet n^q = {cfg.n ** cfg.window_q} exceeds the budget {hmm.WINDOW_BUDGET}")
    if cfg.exact:
        truth = _planted(cfg)
    elif cfg.samples is None or _is_count(cfg.samples):
        truth = _planted(cfg)
        count = int(float(cfg.samples)) if cfg.samples is not None else 10000
        samples, _ = _draw(cfg, truth, count, cfg.seed + 1)
    else:
        samples, _ = kio.read_samples(cfg.samples)
        if cfg.truth:
            truth = _load_truth(cfg)
    est, diag = _learn(cfg, samples, truth)
    out = {"model": cfg.model, "estimate": est.to_dict(), "diagnostics": _json_safe(diag)}
    if truth is not None:
        out["truth"] = truth.to_dict()
        out["error"] = _error(cfg, truth, est)
    return out, EXIT_OK


def cmd_sweep(args, cfg):
    grid = list(cfg.n_grid)
    if grid != sorted(grid):
        raise ValueError("the sample-size grid must be ascending")
    truth = _planted(cfg)
    rows = []
    for big_n in grid:
        errs = []
        for rep in range(cfg.replications):
            samples, _ = _draw(cfg, truth, int(big_n), cfg.seed * 1000 + rep)
            est, _ = _learn(cfg, samples, truth)
            err = _error(cfg, truth, est)
            errs.append(max(v for k, v in err.items() if isinstance(v, float)))
        rows.append((int(big_n), float(np.median(errs)), errs))
    lines = ["n_samples,median_error," + ",".join(f"rep{i}" for i in range(cfg.replications))]
    for big_n, med, errs in rows:
        lines.append(f"{big_n},{med!r}," + ",".join(repr(float(e)) for e in errs))
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_generate(args, cfg):
    if args.kind == "tensor":
        shape = (cfg.n,) * cfg.order
        t, cp, _ = planted_tensor(shape, cfg.rank, cfg.eps, cfg.seed)
        if args.params_out:
            kio.save_json(kio.cp_to_dict(cp), args.params_out)
        return kio.tensor_to_dict(t), EXIT_OK
    cfg.model = args.kind
    truth = _planted(cfg)
    count = int(float(cfg.samples)) if cfg.samples is not None else 10000
    samples, kind = _draw(cfg, truth, count, cfg.seed + 1)
    if args.params_out:
        kio.save_json(truth.to_dict(), args.params_out)
    return (samples, kind), EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    started = time.perf_counter()
    try:
        cfg = resolve_config(args)
        if args.command == "show-config":
            _emit(cfg.to_dict(), args.out)
            return EXIT_OK
        handler = {"decompose": cmd_decompose, "certify": cmd_certify, "align": cmd_align,
                   "learn": cmd_learn, "sweep": cmd_sweep, "generate": cmd_generate}[args.command]
        result, code = handler(args, cfg)
        if args.command == "sweep":
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(result)
            else:
                sys.stdout.write(result)
        elif args.command == "generate" and isinstance(result, tuple):
            samples, kind = result
            if not args.out:
                raise ValueError("generate needs --out for sample files")
            kio.write_samples(args.out, samples, kind)
        elif args.command == "generate":
            _emit(result, args.out)
        else:
            _emit(_report(args.command, cfg, result, started), args.out)
        return code
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (RecoveryFailure, SignFixFailure, SeparationFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError, TypeError, json.JSONDecodeError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
