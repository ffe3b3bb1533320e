"""Command-line interface: ``glirk {tableau,train,integrate,compare-activations,verify}``.

Exit codes: 0 on success, 1 on numerical failure (non-convergence,
training divergence), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .irk import NewtonSettings, dense_output, integrate, irk_residual, newton_solve, IrkError
from .mlp import ACTIVATIONS, MlpParams, TrainConfig, TrainingDiverged, init_mlp, pinn_loss, train
from .odes import Q0, make_system
from .predictor import PredictorKind, make_predictor, predict_neural
from .tableau import build_tableau
from . import verify as verify_mod

log = logging.getLogger("glirk")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    system: str = "lorenz"
    params: dict = field(default_factory=dict)
    y0: list | None = None
    n: int = 50
    h: float = 0.75
    steps: int = 1
    t0: float = 0.0
    predictor: str = "substep:10000"
    tol: float = 1e-10
    gamma: float = 1.0
    max_iters: int = 50
    epochs: int = 10_000
    lr: float = 1e-3
    activation: str = "elu"
    hidden: list = field(default_factory=lambda: [3, 3, 3])
    input_scale: float = 40.0
    bias_init: bool = True
    retrain_epochs: int = 0
    seed: int = 0
    seeds: list | None = None
    model: str | None = None
    out_prefix: str | None = None
    samples: int = 8

    def validate(self):
        if self.n < 1 or self.n > 200:
            raise UsageError("--n must lie in [1, 200]")
        if self.steps < 1:
            raise UsageError("--steps must be at least 1")
        if not self.h > 0:
            raise UsageError("--h must be positive")
        if not 0 < self.gamma <= 1:
            raise UsageError("--gamma must lie in (0, 1]")
        if not self.tol > 0 or self.max_iters < 1:
            raise UsageError("--tol must be positive and --max-iters at least 1")
        if self.activation not in ACTIVATIONS:
            raise UsageError(f"--activation must be one of {ACTIVATIONS}")
        if self.epochs < 0 or self.samples < 0:
            raise UsageError("--epochs and --samples must be non-negative")
        try:
            PredictorKind.parse(self.predictor)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def initial_state(self, dim: int) -> np.ndarray:
        if self.y0 is not None:
            y0 = np.asarray(self.y0, dtype=float)
        else:
            y0 = np.array(Q0) if self.system == "lorenz" else np.ones(dim)
        if y0.shape != (dim,):
            raise UsageError(f"initial state must have {dim} components")
        return y0

    def build_system(self):
        try:
            return make_system(self.system, **self.params)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None

    def newton(self) -> NewtonSettings:
        return NewtonSettings(tol=self.tol, max_iters=self.max_iters, gamma=self.gamma)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def stream_seed(seed: int, stream: str) -> int:
    """Derive an independent, reproducible seed for a named random stream."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stream.encode())])
    return int(ss.generate_state(1)[0])


# flag name -> config field; values left as None are not overrides
_FLAG_FIELDS = {
    "system": "system", "n": "n", "h": "h", "steps": "steps", "predictor": "predictor",
    "tol": "tol", "gamma": "gamma", "max_iters": "max_iters", "epochs": "epochs", "lr": "lr",
    "activation": "activation", "seed": "seed", "model": "model", "out_prefix": "out_prefix",
    "samples": "samples", "retrain_epochs": "retrain_epochs", "y0": "y0", "seeds": "seeds",
    "bias_init": "bias_init",
}


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        names = {f.name for f in dataclasses.fields(cfg)}
        # Lorenz parameters and lambda may sit at the top level of the file
        params = dict(data.pop("params", {}) or {})
        for key in ("sigma", "rho", "beta", "lambda"):
            if key in data:
                params[key] = data.pop(key)
        unknown = set(data) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = dataclasses.replace(cfg, **data, params=params)
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, name, value)
    lam = getattr(args, "lam", None)
    if lam is not None:
        cfg.params = {**cfg.params, "lambda": lam}
    cfg.validate()
    return cfg


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    common.add_argument("--system", choices=["lorenz", "linear"])
    common.add_argument("--lambda", dest="lam", type=float, help="rate of the linear test system")
    common.add_argument("--y0", type=_float_list, help="initial state, comma separated")
    common.add_argument("--n", type=int, help="number of Gauss-Legendre stages")
    common.add_argument("--h", type=float, help="step size")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-prefix", dest="out_prefix")
    common.add_argument("-v", "--verbose", action="store_true")

    newton = argparse.ArgumentParser(add_help=False)
    newton.add_argument("--tol", type=float)
    newton.add_argument("--gamma", type=float, help="Newton damping factor in (0, 1]")
    newton.add_argument("--max-iters", dest="max_iters", type=int)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--epochs", type=int)
    training.add_argument("--lr", type=float)
    training.add_argument("--activation", choices=list(ACTIVATIONS))
    training.add_argument("--no-bias-init", dest="bias_init", action="store_const", const=False,
                          help="start the output bias at zero instead of the initial state")

    parser = argparse.ArgumentParser(prog="glirk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tableau", help="print a Gauss-Legendre Butcher tableau")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--out-prefix", dest="out_prefix")

    sub.add_parser("train", parents=[common, training], help="train the stage-predicting network")

    p = sub.add_parser("integrate", parents=[common, newton], help="integrate with Newton-corrected IRK steps")
    p.add_argument("--steps", type=int)
    p.add_argument("--predictor", help="constant | euler | substep:M | nn")
    p.add_argument("--model", help="model JSON for --predictor nn")
    p.add_argument("--samples", type=int, help="dense-output samples per stage interval")
    p.add_argument("--retrain-epochs", dest="retrain_epochs", type=int,
                   help="with --predictor nn, continue training this many epochs on each later step")

    p = sub.add_parser("compare-activations", parents=[common, newton, training],
                       help="train tanh and ELU networks side by side")
    p.add_argument("--seeds", type=_int_list, help="comma-separated seeds (default: --seed)")

    p = sub.add_parser("verify", help="run the invariant checks")
    p.add_argument("--suite", choices=["all", *verify_mod.SUITES], default="all")
    return parser


# ---------------------------------------------------------------- tableau

def format_tableau(tab, fmt: str) -> str:
    if fmt == "json":
        # repr-based floats round-trip exactly
        return json.dumps(tab.to_dict(), indent=1)
    lines = [f"n = {tab.n}", "c | A"]
    for i in range(tab.n):
        row = " ".join(f"{a: .17e}" for a in tab.A[i])
        lines.append(f"{tab.c[i]: .17e} | {row}")
    lines.append("b = " + " ".join(f"{v: .17e}" for v in tab.b))
    return "\n".join(lines)


def cmd_tableau(args) -> int:
    if args.n is None or args.n < 1 or args.n > 200:
        raise UsageError("--n must lie in [1, 200]")
    text = format_tableau(build_tableau(args.n), args.format)
    if args.out_prefix:
        Path(f"{args.out_prefix}.tableau.{args.format if args.format == 'json' else 'txt'}").write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------- train

def _require_prefix(cfg: ExperimentConfig) -> Path:
    if not cfg.out_prefix:
        raise UsageError("--out-prefix is required")
    prefix = Path(cfg.out_prefix)
    if not prefix.parent.is_dir():
        raise UsageError(f"output directory {prefix.parent} does not exist")
    return prefix


def _with_suffix(prefix: Path, suffix: str) -> Path:
    return prefix.parent / f"{prefix.name}{suffix}"


def new_model(cfg: ExperimentConfig, sys_, y0, activation: str | None = None, seed: int | None = None) -> MlpParams:
    seed = cfg.seed if seed is None else seed
    model = init_mlp(
        sys_.dim, cfg.n, tuple(cfg.hidden), activation or cfg.activation,
        seed=stream_seed(seed, "init"), y_m=y0 if cfg.bias_init else None, input_scale=cfg.input_scale,
    )
    model.meta.update({"h": cfg.h, "system": cfg.system, "system_params": sys_.params(), "seed": seed})
    return model


def write_loss_csv(path: Path, history) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(history, start=1):
            w.writerow([i, repr(float(loss))])


def objective_points(model: MlpParams, y0, tab, sys_, h):
    """Per-stage reconstructions of y0 from the network's stages (all equal y0 at a solution)."""
    stages, y_next = model.forward(y0)
    F = sys_.rhs_batch(tab.c * h, stages)
    recon = stages - h * (tab.A @ F)
    full = y_next - h * (tab.b @ F)
    return stages, recon, full


def cmd_train(args) -> int:
    cfg = load_config(args)
    prefix = _require_prefix(cfg)
    if cfg.epochs < 1:
        raise UsageError("--epochs must be at least 1 for training")
    sys_ = cfg.build_system()
    y0 = cfg.initial_state(sys_.dim)
    tab = build_tableau(cfg.n)
    model = new_model(cfg, sys_, y0)
    tcfg = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.lr, seed=stream_seed(cfg.seed, "train"))
    try:
        trained, history = train(model, y0, tab, sys_, cfg.h, tcfg, t_m=cfg.t0)
    except TrainingDiverged as exc:
        write_loss_csv(_with_suffix(prefix, ".loss.csv"), exc.history)
        log.error("training diverged at epoch %d", exc.epoch)
        return EXIT_NUMERIC
    trained.meta.update({"epochs": cfg.epochs, "lr": cfg.lr, "y0": list(map(float, y0))})
    trained.save(_with_suffix(prefix, ".model.json"))
    write_loss_csv(_with_suffix(prefix, ".loss.csv"), history)

    stages, recon, _ = objective_points(trained, y0, tab, sys_, cfg.h)
    with _with_suffix(prefix, ".objective.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        d = sys_.dim
        w.writerow(["stage", *[f"stage_y{a}" for a in range(d)], *[f"objective_y{a}" for a in range(d)], "distance"])
        for i in range(tab.n):
            w.writerow([i, *map(repr, stages[i].tolist()), *map(repr, recon[i].tolist()),
                        repr(float(np.linalg.norm(recon[i] - y0)))])
    print(f"final loss {history[-1]:.6e} after {cfg.epochs} epochs")
    return EXIT_OK


# ---------------------------------------------------------------- integrate

def _load_model(cfg: ExperimentConfig, sys_) -> MlpParams:
    if not cfg.model:
        raise UsageError("--predictor nn requires --model PATH")
    try:
        model = MlpParams.load(cfg.model)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load model {cfg.model}: {exc}") from None
    if model.n != cfg.n or model.dim != sys_.dim:
        raise UsageError(f"model was built for n={model.n}, dim={model.dim}; run uses n={cfg.n}, dim={sys_.dim}")
    if model.meta.get("h") not in (None, cfg.h):
        log.warning("model was trained for h=%s, run uses h=%s", model.meta.get("h"), cfg.h)
    return model


def cmd_integrate(args) -> int:
    cfg = load_config(args)
    prefix = _require_prefix(cfg)
    sys_ = cfg.build_system()
    y0 = cfg.initial_state(sys_.dim)
    tab = build_tableau(cfg.n)
    kind = PredictorKind.parse(cfg.predictor)
    settings = cfg.newton()

    if kind.kind == "neural":
        state = {"model": _load_model(cfg, sys_), "first": True}

        def predictor(y, t):
            if not state["first"] and cfg.retrain_epochs > 0:
                tcfg = TrainConfig(epochs=cfg.retrain_epochs, learning_rate=cfg.lr)
                state["model"], _ = train(state["model"], y, tab, sys_, cfg.h, tcfg, t_m=t)
            state["first"] = False
            return predict_neural(state["model"], y, tab, sys_, cfg.h, t)
    else:
        predictor = make_predictor(kind, sys_, tab, cfg.h)

    results = integrate(sys_, tab, cfg.h, cfg.t0, y0, cfg.steps, predictor, settings)
    all_ok = len(results) == cfg.steps and all(r.report.converged for r in results)

    with _with_suffix(prefix, ".trajectory.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "stage", "t", *[f"y{a}" for a in range(sys_.dim)]])
        for m, r in enumerate(results):
            w.writerow([m, "start", repr(r.t), *map(repr, r.y_start.tolist())])
            for i in range(tab.n):
                w.writerow([m, i, repr(r.t + tab.c[i] * r.h), *map(repr, r.stages[i].tolist())])
            if r.report.converged and cfg.samples > 0:
                knots = np.concatenate([[0.0], tab.c, [1.0]])
                frac = np.concatenate(
                    [np.linspace(a, b, cfg.samples, endpoint=False) for a, b in zip(knots[:-1], knots[1:])]
                )
                tq = r.t + frac * r.h
                dense = dense_output(tab, r.h, r.t, r.y_start, r.stages, tq)
                for tt, yy in zip(tq, dense):
                    w.writerow([m, "dense", repr(float(tt)), *map(repr, yy.tolist())])
            w.writerow([m, "final", repr(r.t + r.h), *map(repr, r.y_end.tolist())])

    report = {
        "config": cfg.to_dict(),
        "all_converged": all_ok,
        "steps_completed": sum(r.report.converged for r in results),
        "final_state": results[-1].y_end.tolist() if all_ok else None,
        "steps": [
            {
                "step": m,
                "t": r.t,
                "y_start": r.y_start.tolist(),
                "y_end": r.y_end.tolist(),
                "guess_residual": r.guess_residual,
                "newton": r.report.to_dict(),
            }
            for m, r in enumerate(results)
        ],
    }
    _with_suffix(prefix, ".report.json").write_text(json.dumps(report, indent=1, default=_json_default))
    for m, r in enumerate(results):
        print(f"step {m}: {r.report.status} after {r.report.iterations} iterations, "
              f"residual {r.report.final_residual:.3e}")
    return EXIT_OK if all_ok else EXIT_NUMERIC


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj))


# ---------------------------------------------------------------- compare

def compare_activations(cfg: ExperimentConfig) -> dict:
    sys_ = cfg.build_system()
    y0 = cfg.initial_state(sys_.dim)
    tab = build_tableau(cfg.n)
    settings = cfg.newton()
    rows = []
    for activation in ("tanh", "elu"):
        for seed in cfg.seeds or [cfg.seed]:
            model = new_model(cfg, sys_, y0, activation=activation, seed=seed)
            if cfg.epochs > 0:
                tcfg = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.lr, seed=stream_seed(seed, "train"))
                try:
                    model, history = train(model, y0, tab, sys_, cfg.h, tcfg, t_m=cfg.t0)
                    final_loss = history[-1]
                except TrainingDiverged:
                    final_loss = float("inf")
            else:
                final_loss = float(pinn_loss(model, y0, tab, sys_, cfg.h, cfg.t0))
            row = {"activation": activation, "seed": seed, "epochs": cfg.epochs, "final_loss": float(final_loss)}
            try:
                guess = predict_neural(model, y0, tab, sys_, cfg.h, cfg.t0)
                row["guess_residual"] = settings.measure(irk_residual(sys_, tab, cfg.h, cfg.t0, y0, guess))
                _, rep = newton_solve(sys_, tab, cfg.h, cfg.t0, y0, guess, settings)
            except IrkError as exc:
                row.setdefault("guess_residual", float("inf"))
                rep = exc.report
            row["converged"] = bool(rep and rep.converged)
            row["status"] = rep.status if rep else "diverged"
            row["iterations"] = rep.iterations if rep else 0
            row["final_residual"] = rep.final_residual if rep else float("inf")
            rows.append(row)
    return {"config": cfg.to_dict(), "rows": rows}


def cmd_compare(args) -> int:
    cfg = load_config(args)
    prefix = _require_prefix(cfg)
    report = compare_activations(cfg)
    _with_suffix(prefix, ".compare.json").write_text(json.dumps(report, indent=1, default=_json_default))
    print(f"{'activation':<10} {'seed':>4} {'final loss':>12} {'guess res':>12} {'newton':>10} {'iters':>5}")
    for r in report["rows"]:
        print(f"{r['activation']:<10} {r['seed']:>4} {r['final_loss']:>12.4e} {r['guess_residual']:>12.4e} "
              f"{r['status']:>10} {r['iterations']:>5}")
    return EXIT_OK


# ---------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    suites = verify_mod.SUITES if args.suite == "all" else {args.suite: verify_mod.SUITES[args.suite]}
    checks = [c for fn in suites.values() for c in fn()]
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC


COMMANDS = {
    "tableau": cmd_tableau,
    "train": cmd_train,
    "integrate": cmd_integrate,
    "compare-activations": cmd_compare,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"glirk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
