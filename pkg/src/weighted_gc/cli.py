"""Command-line experiments: code-check, regression, mnist, leverage.

Configuration is a flat ``key = value`` file; every key can be overridden
by the matching ``--key`` flag. Seeds have no defaults. Outputs are CSV
files under ``--out`` and contain no timestamps, so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .coding import CodingScheme, build_scheme, cyclic_mask, decode_vector, interleaved_mask, responder_sets, validate_params, weight_scheme
from .data import Dataset, from_csv, load_mnist, synth_regression
from .errors import DivergenceError, WeightedGCError
from .numkit import leverage_scores, normalize_scores, numerical_rank, pinv_solve, reduced_svd
from .optimize import GdConfig, LossModel
from .simulate import StragglerModel, run_distributed_gd
from .sketch import identity_sketch, make_partition, sample_weighted

TASKS = ("code-check", "regression", "mnist", "leverage")
EXHAUSTIVE_LIMIT = 5000
MASKS = {"cyclic": cyclic_mask, "interleaved": interleaved_mask}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    task: str = "regression"
    n: int = 50
    k: int = 20
    d: int = 30
    rho: str = "2"
    runs: int = 20
    seed_data: int | None = None
    seed_sampler: int | None = None
    seed_straggler: int | None = None
    weighted: str = "both"
    step: float = 1e-7
    tol: float = 0.1
    max_iters: int = 5000
    stragglers: int | None = None
    subsets: int = 100
    mask: str = "cyclic"
    dataset: str = "synthetic"
    input: str = ""
    mnist_dir: str = ""
    classes: str = "4,9"
    train_limit: int = 10000
    out: str = "out"

    @property
    def rhos(self) -> list[int]:
        return [int(v) for v in str(self.rho).split(",") if v.strip()]

    @property
    def variants(self) -> list[str]:
        return {"on": ["weighted"], "off": ["unweighted"], "both": ["weighted", "unweighted"]}[self.weighted]

    @property
    def class_pair(self) -> tuple[int, int]:
        a, b = (int(v) for v in self.classes.split(","))
        return a, b

    def digest(self) -> str:
        items = sorted((k, v) for k, v in asdict(self).items() if k != "out")
        text = "\n".join(f"{k}={v}" for k, v in items)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def require_seeds(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError("missing mandatory seed(s): " + ", ".join(missing))


TASK_DEFAULTS = {
    "mnist": {"step": 1e-5, "tol": 5.0, "max_iters": 1000, "rho": "4", "runs": 6, "dataset": "mnist"},
}


def _convert(name: str, raw: str):
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    if raw in ("", "none", "None") and "None" in str(kind):
        return None
    try:
        if "int" in str(kind):
            return int(raw)
        if "float" in str(kind):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def read_config_file(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in {f.name for f in fields(ExperimentConfig)}:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(task: str, file_values: dict[str, str], overrides: dict[str, str]) -> ExperimentConfig:
    cfg = ExperimentConfig(task=task)
    for key, value in TASK_DEFAULTS.get(task, {}).items():
        setattr(cfg, key, value)
    for key, value in {**file_values, **overrides}.items():
        if key == "task":
            continue
        setattr(cfg, key, _convert(key, value))
    if cfg.weighted not in ("on", "off", "both"):
        raise ConfigError("weighted must be on, off or both")
    if cfg.mask not in MASKS:
        raise ConfigError("mask must be cyclic or interleaved")
    return cfg


# -- output helpers -----------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _provenance(cfg: ExperimentConfig, code_residual: float) -> list:
    return [cfg.digest(), cfg.seed_data, cfg.seed_sampler, cfg.seed_straggler, code_residual]


PROVENANCE = ["config_digest", "seed_data", "seed_sampler", "seed_straggler", "code_residual"]


def scheme_residuals(scheme: CodingScheme, subsets: int, seed) -> tuple[float, float, int, bool]:
    """Worst decode residual for unit and random weights over responder sets.

    Exhaustive when C(n, f) <= EXHAUSTIVE_LIMIT, otherwise ``subsets``
    uniform samples. Residuals are relative to max |w|.
    """
    params = scheme.params
    rng = np.random.default_rng(seed)
    exhaustive = math.comb(params.n, params.f) <= EXHAUSTIVE_LIMIT
    if exhaustive:
        sets = [np.array(I) for I in responder_sets(params)]
    else:
        sets = [np.sort(rng.choice(params.n, params.f, replace=False)) for _ in range(subsets)]
    w = rng.uniform(0.5, 4.0, params.k)
    Bw = weight_scheme(scheme, w)
    ones = np.ones(params.k)
    unweighted = weighted = 0.0
    for I in sets:
        a = decode_vector(scheme, I)
        unweighted = max(unweighted, float(np.max(np.abs(a @ scheme.B[I] - ones))))
        weighted = max(weighted, float(np.max(np.abs(a @ Bw[I] - w)) / np.max(np.abs(w))))
    return unweighted, weighted, len(sets), exhaustive


def _scheme(cfg: ExperimentConfig) -> CodingScheme:
    params = validate_params(cfg.n, cfg.k, cfg.d)
    return build_scheme(params, MASKS[cfg.mask](params))


# -- commands -------------------------------------------------------------------


def cmd_code_check(cfg: ExperimentConfig) -> dict:
    cfg.require_seeds("seed_straggler")
    scheme = _scheme(cfg)
    unweighted, weighted, count, exhaustive = scheme_residuals(scheme, cfg.subsets, cfg.seed_straggler)
    p = scheme.params
    row = [p.n, p.k, p.d, p.w_supp, p.s, p.f, count, exhaustive, unweighted, weighted]
    write_csv(
        Path(cfg.out) / "code_check.csv",
        ["n", "k", "d", "w", "s", "f", "subsets_checked", "exhaustive", "unweighted_max_residual", "weighted_max_residual"]
        + PROVENANCE,
        [row + _provenance(cfg, max(unweighted, weighted))],
    )
    print(f"n={p.n} k={p.k} d={p.d} w={p.w_supp} s={p.s} f={p.f}: {count} responder sets "
          f"({'exhaustive' if exhaustive else 'sampled'}), max residual unweighted {unweighted:.3e}, weighted {weighted:.3e}")
    return {"subsets": count, "unweighted": unweighted, "weighted": weighted, "exhaustive": exhaustive}


def _straggler_model(cfg: ExperimentConfig, scheme: CodingScheme) -> StragglerModel:
    s = scheme.params.s if cfg.stragglers is None else cfg.stragglers
    return StragglerModel.uniform(s) if s > 0 else StragglerModel()


def _sketch_for(plan_pi, N: int, rho: int, k: int, seed):
    if rho == 1:
        plan = make_partition(N, k, plan_pi)
        return plan, identity_sketch(plan)
    plan = make_partition(N, rho * k, plan_pi)
    return plan, sample_weighted(plan, k, seed)


def _mean_trace(traces: list[list[float]]) -> list[tuple[int, float, int]]:
    """Per-iteration mean over the runs still active at that iteration."""
    out = []
    for t in range(max((len(tr) for tr in traces), default=0)):
        vals = [tr[t] for tr in traces if t < len(tr)]
        out.append((t, float(np.mean(vals)), len(vals)))
    return out


def cmd_regression(cfg: ExperimentConfig) -> dict:
    cfg.require_seeds("seed_data", "seed_sampler", "seed_straggler")
    if len(cfg.rhos) != 1:
        raise ConfigError("regression takes a single rho")
    rho = cfg.rhos[0]
    scheme = _scheme(cfg)
    code_residual = scheme_residuals(scheme, 20, cfg.seed_straggler)[1]
    gd_cfg = GdConfig(cfg.step, cfg.max_iters, cfg.tol)
    stragglers = _straggler_model(cfg, scheme)
    run_rows, trace_rows = [], []
    norms: dict[str, list[list[float]]] = {v: [] for v in cfg.variants}
    for run in range(cfg.runs):
        synth = synth_regression(cfg.seed_data + run)
        X, y = synth.dataset.X, synth.dataset.y
        U, sigma, V = reduced_svd(X)
        pi = normalize_scores(np.einsum("ij,ij->i", U, U))
        theta_ols = pinv_solve(U, sigma, V, y)
        plan, sp = _sketch_for(pi, X.shape[0], rho, cfg.k, cfg.seed_sampler + run)
        model = LossModel.least_squares(X, y)
        for variant in cfg.variants:
            spv = sp if variant == "weighted" else sp.unweighted()
            try:
                res = run_distributed_gd(model, plan, spv, scheme, gd_cfg, stragglers, cfg.seed_straggler + run)
                trace, diverged, flagged = res.trace, False, res.flagged_rounds
            except DivergenceError as exc:
                trace, diverged, flagged = exc.trace, True, 0
            error = float(np.sum((trace.theta - theta_ols) ** 2))
            run_rows.append([run, variant, trace.iterations, trace.converged, diverged, error,
                             spv.n_distinct, int(spv.weights.sum()), flagged])
            norms[variant].append([r.grad_norm for r in trace.records])
            for rec in trace.records:
                trace_rows.append([run, variant, rec.iteration, rec.grad_norm, rec.loss,
                                   ";".join(str(i) for i in rec.responders)])
    out = Path(cfg.out)
    write_csv(out / "runs.csv",
              ["run", "variant", "iterations", "converged", "diverged", "error", "distinct_parts", "draws", "flagged_rounds"],
              run_rows)
    write_csv(out / "trace.csv", ["run", "variant", "iteration", "grad_norm", "loss", "responders"], trace_rows)
    write_csv(out / "trace_mean.csv", ["variant", "iteration", "mean_grad_norm", "active_runs"],
              [[v, *row] for v in cfg.variants for row in _mean_trace(norms[v])])
    summary = {}
    rows = []
    for variant in cfg.variants:
        mine = [r for r in run_rows if r[1] == variant]
        it = float(np.mean([r[2] for r in mine]))
        err = float(np.mean([r[5] for r in mine]))
        conv = sum(r[3] for r in mine)
        summary[variant] = {"mean_iterations": it, "mean_error": err, "converged": conv,
                            "iterations": [r[2] for r in mine], "errors": [r[5] for r in mine]}
        rows.append([variant, rho, cfg.runs, it, err, conv] + _provenance(cfg, code_residual))
        print(f"rho={rho} {variant}: mean iterations {it:.2f}, mean error {err:.3e}, converged {conv}/{cfg.runs}")
    write_csv(out / "summary.csv",
              ["variant", "rho", "runs", "mean_iterations", "mean_error", "converged_runs"] + PROVENANCE, rows)
    return summary


def _mnist_paths(cfg: ExperimentConfig) -> dict[str, Path]:
    if not cfg.mnist_dir:
        raise ConfigError("mnist_dir is required for MNIST tasks")
    root = Path(cfg.mnist_dir)
    found = {}
    for split, stem in (("train", "train"), ("test", "t10k")):
        for kind, tag in (("images", "idx3"), ("labels", "idx1")):
            candidates = [root / f"{stem}-{kind}-{tag}-ubyte", root / f"{stem}-{kind}.{tag}-ubyte",
                          root / f"{stem}-{kind}-{tag}-ubyte.gz"]
            hit = next((c for c in candidates if c.exists()), None)
            if hit is None:
                raise ConfigError(f"no {stem} {kind} file under {root}")
            found[f"{split}_{kind}"] = hit
    return found


def cmd_mnist(cfg: ExperimentConfig) -> dict:
    cfg.require_seeds("seed_sampler", "seed_straggler")
    paths = _mnist_paths(cfg)
    scheme = _scheme(cfg)
    code_residual = scheme_residuals(scheme, 20, cfg.seed_straggler)[1]
    train = load_mnist(paths["train_images"], paths["train_labels"], cfg.class_pair, limit=cfg.train_limit)
    test = load_mnist(paths["test_images"], paths["test_labels"], cfg.class_pair)
    N = train.N
    for rho in cfg.rhos:
        if N % (rho * cfg.k):
            raise ConfigError(f"rho*k = {rho * cfg.k} does not divide N = {N}")
    pi = normalize_scores(leverage_scores(train.X, allow_rank_deficient=True))
    model = LossModel.logistic(train.X, train.y)
    gd_cfg = GdConfig(cfg.step, cfg.max_iters, cfg.tol)
    stragglers = _straggler_model(cfg, scheme)
    run_rows, rows, summary = [], [], {}
    for rho in cfg.rhos:
        variants = ["uncompressed"] if rho == 1 else cfg.variants
        for variant in variants:
            errs, its = [], []
            for run in range(cfg.runs):
                plan, sp = _sketch_for(pi, N, rho, cfg.k, cfg.seed_sampler + run)
                spv = sp.unweighted() if variant == "unweighted" else sp
                try:
                    res = run_distributed_gd(model, plan, spv, scheme, gd_cfg, stragglers,
                                             cfg.seed_straggler + run, track_loss=False)
                    trace, diverged = res.trace, False
                except DivergenceError as exc:
                    trace, diverged = exc.trace, True
                err = float(np.mean(np.where(test.X @ trace.theta >= 0, 1.0, -1.0) != test.y))
                errs.append(err)
                its.append(trace.iterations)
                run_rows.append([rho, variant, run, trace.iterations, trace.converged, diverged, err])
            summary[(rho, variant)] = {"mean_error": float(np.mean(errs)), "mean_iterations": float(np.mean(its))}
            rows.append([rho, variant, cfg.runs, float(np.mean(errs)), float(np.mean(its)), train.N, test.N]
                        + _provenance(cfg, code_residual))
            print(f"rho={rho} {variant}: mean test error {100 * np.mean(errs):.2f}%, mean iterations {np.mean(its):.2f}")
    out = Path(cfg.out)
    write_csv(out / "runs.csv", ["rho", "variant", "run", "iterations", "converged", "diverged", "test_error"], run_rows)
    write_csv(out / "summary.csv",
              ["rho", "variant", "runs", "mean_test_error", "mean_iterations", "train_samples", "test_samples"] + PROVENANCE,
              rows)
    return summary


def _leverage_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "synthetic":
        cfg.require_seeds("seed_data")
        return synth_regression(cfg.seed_data).dataset
    if cfg.dataset == "csv":
        if not cfg.input:
            raise ConfigError("dataset=csv needs input=PATH")
        return from_csv(cfg.input)
    if cfg.dataset == "mnist":
        paths = _mnist_paths(cfg)
        return load_mnist(paths["train_images"], paths["train_labels"], cfg.class_pair, limit=cfg.train_limit)
    raise ConfigError(f"unknown dataset {cfg.dataset!r}")


def cmd_leverage(cfg: ExperimentConfig) -> dict:
    data = _leverage_dataset(cfg)
    rho = cfg.rhos[0]
    K = rho * cfg.k
    U, sigma, _ = reduced_svd(data.X)
    rank = numerical_rank(sigma)
    if rank < data.X.shape[1] and cfg.dataset != "mnist":
        leverage_scores(data.X)  # raises with the rank in the message
    ell = np.clip(np.einsum("ij,ij->i", U[:, :rank], U[:, :rank]), 0.0, 1.0)
    pi = normalize_scores(ell)
    plan = make_partition(data.N, K, pi)
    size = plan.part_size
    out = Path(cfg.out)
    write_csv(out / "leverage_rows.csv", ["row", "ell", "pi", "part"],
              ([i, ell[i], pi[i], i // size] for i in range(data.N)))
    write_csv(out / "leverage_parts.csv", ["part", "Pi"], ([j, plan.Pi[j]] for j in range(K)))
    ratio_pi = float(pi.max() / pi.min()) if pi.min() > 0 else math.inf
    ratio_Pi = float(plan.Pi.max() / plan.Pi.min()) if plan.Pi.min() > 0 else math.inf
    summary = {"N": data.N, "p": data.X.shape[1], "rank": rank, "K": K, "sum_ell": float(ell.sum()),
               "sum_pi": float(pi.sum()), "pi_ratio": ratio_pi, "Pi_ratio": ratio_Pi}
    write_csv(out / "summary.csv", list(summary) + PROVENANCE,
              [list(summary.values()) + _provenance(cfg, float("nan"))])
    print(", ".join(f"{k}={v}" for k, v in summary.items()))
    return summary


COMMANDS = {"code-check": cmd_code_check, "regression": cmd_regression, "mnist": cmd_mnist, "leverage": cmd_leverage}

OVERRIDE_FLAGS = {
    "n": "n", "k": "k", "d": "d", "rho": "rho", "runs": "runs",
    "seed-data": "seed_data", "seed-sampler": "seed_sampler", "seed-straggler": "seed_straggler",
    "weighted": "weighted", "step": "step", "tol": "tol", "max-iters": "max_iters",
    "stragglers": "stragglers", "subsets": "subsets", "mask": "mask", "dataset": "dataset", "input": "input",
    "mnist-dir": "mnist_dir", "classes": "classes", "train-limit": "train_limit",
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weighted-gc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", help="output directory")
        for flag, key in OVERRIDE_FLAGS.items():
            p.add_argument(f"--{flag}", dest=key, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in OVERRIDE_FLAGS.values() if getattr(args, key) is not None}
    if args.out is not None:
        overrides["out"] = args.out
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.task, file_values, overrides)
        COMMANDS[args.task](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WeightedGCError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
