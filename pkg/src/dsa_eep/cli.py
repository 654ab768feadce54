"""Batch entry point: ``dsa-eep {gen,train,eval,sweep,ablate-horizon,gradcheck}``.

Every command writes its artifacts into ``--out-dir`` plus a ``manifest.json``
listing them with their SHA-256 digests. Exit codes: 0 success, 1 failed
check (gradcheck), 2 usage / config / IO error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .alarm_policy import PolicyConfig, raise_alarms, write_alarms_csv
from .benchmark import BenchmarkConfig, BenchmarkRun, horizon_ablation, risk_rows, timestep_auprc_of
from .core import TASK_PRESETS, StayError, read_stays_csv, split_episodes, write_stays_csv
from .event_metrics import CohortRisk, event_pr_curve, summarize, write_curve_csv, write_summary_json
from .event_metrics import alarm_precision, event_recall
from .hazard_model import ModelDims, init_params, load_checkpoint, save_checkpoint
from .labeling import SmoothingConfig
from .synthgen import GenConfig, generate_cohort, write_ground_truth_csv
from .training import DivergenceError, TrainConfig, build_batch, finite_difference_check, fit

log = logging.getLogger("dsa_eep")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

SMOKE_FIXTURE = "smoke"

_num = {"type": "number"}
_int = {"type": "integer"}
_pos_int = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "preset": {"enum": sorted(TASK_PRESETS)},
        "gen": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_stays": _pos_int, "min_len": _pos_int, "max_len": _pos_int, "n_features": _pos_int,
                "latent_ar_coeff": _num, "hazard_scale": _num, "onset_logit": _num, "signal_decay": _num,
                "noise_std": _num, "event_duration": _pos_int,
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "objective": {"enum": ["eep", "dsa_full", "dsa_trunc", "survtls"]},
                "horizon": _pos_int, "max_horizon": _pos_int, "loss_horizon": _pos_int,
                "batch_size": _pos_int, "learning_rate": {"type": "number", "minimum": 0},
                "l1_strength": {"type": "number", "minimum": 0}, "patience": _pos_int, "max_epochs": _pos_int,
                "embed_dim": _pos_int, "hidden_dim": _pos_int, "lengthscale": {"type": "number", "exclusiveMinimum": 0},
                "val_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "policy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["fixed", "prioritized"]},
                "tau": {"type": "number", "minimum": 0, "maximum": 1},
                "sigma": _pos_int, "gamma": {"type": "number", "exclusiveMinimum": 0}, "h_max": _pos_int,
                "priority_shape": {"enum": ["convex", "identity"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gammas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "h_maxes": {"type": "array", "items": _pos_int, "minItems": 1},
            },
        },
        "ablation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "factors": {"type": "array", "items": _pos_int, "minItems": 1},
                "n_stays": {"type": "integer", "minimum": 10},
                "max_epochs": _pos_int,
            },
        },
    },
}


class UsageError(Exception):
    """Bad config, unreadable input or inconsistent flags (exit 2)."""


# --------------------------------------------------------------------------
# config handling
# --------------------------------------------------------------------------


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config {path}: {where}: {exc.message}") from None
    return doc


def _override(section: dict, **flags) -> dict:
    out = dict(section)
    out.update({k: v for k, v in flags.items() if v is not None})
    return out


def _seed(args, cfg) -> int:
    return args.seed if args.seed is not None else int(cfg.get("seed", 0))


def _horizon(args, cfg, fallback=None) -> int:
    if getattr(args, "horizon", None) is not None:
        return args.horizon
    tr = cfg.get("train", {})
    if "horizon" in tr:
        return tr["horizon"]
    if fallback is not None:
        return fallback
    return TASK_PRESETS[args.preset or cfg.get("preset", "synthetic")].horizon


def policy_from(args, cfg) -> PolicyConfig:
    sec = _override(cfg.get("policy", {}), mode=args.policy, tau=args.tau, sigma=args.sigma, gamma=args.gamma,
                    h_max=args.hmax, priority_shape=args.shape)
    try:
        return PolicyConfig(**sec)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"policy: {exc}") from None


# --------------------------------------------------------------------------
# artifacts and manifest
# --------------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _validate_artifact(path: Path) -> None:
    if not path.is_file() or path.stat().st_size == 0:
        raise UsageError(f"artifact {path} missing or empty")
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            json.load(fh)


def write_json_atomic(path: Path, doc: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Run:
    """Collects inputs/outputs of one command and writes the manifest."""

    def __init__(self, command: str, argv, out_dir, config: dict, seed: int):
        self.command = command
        self.argv = list(argv)
        self.out_dir = Path(out_dir)
        self.config = config
        self.seed = seed
        self.inputs = {}
        self.outputs = {}
        self.started = time.time()
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out_dir}: {exc}") from None

    def path(self, name: str) -> Path:
        self.outputs[name] = None
        return self.out_dir / name

    def add_input(self, label: str, path) -> None:
        self.inputs[label] = {"path": str(path), "sha256": _sha256(path)}

    def finish(self) -> Path:
        outputs = {}
        for name in sorted(self.outputs):
            p = self.out_dir / name
            _validate_artifact(p)
            outputs[name] = {"sha256": _sha256(p), "bytes": p.stat().st_size}
        finished = time.time()
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": outputs,
            "version": __version__,
            # wall-clock fields; not part of the reproducibility contract
            "started_at": self.started,
            "finished_at": finished,
            "duration_s": finished - self.started,
        }
        target = self.out_dir / "manifest.json"
        write_json_atomic(target, manifest)
        return target


def _read_stays(source, run: Run):
    if source in (None, SMOKE_FIXTURE):
        ref = resources.files("dsa_eep").joinpath("data", "smoke_stays.csv")
        with resources.as_file(ref) as p:
            stays = read_stays_csv(p)
            run.add_input("stays", p)
        return stays
    try:
        stays = read_stays_csv(source)
    except OSError as exc:
        raise UsageError(f"cannot read stays {source}: {exc}") from None
    except StayError as exc:
        raise UsageError(str(exc)) from None
    run.add_input("stays", source)
    return stays


def _read_checkpoint(path, run: Run):
    try:
        params, meta = load_checkpoint(path)
    except OSError as exc:
        raise UsageError(f"cannot read checkpoint {path}: {exc}") from None
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed checkpoint {path}: {exc}") from None
    run.add_input("checkpoint", path)
    return params, meta


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_gen(args, cfg, run: Run) -> int:
    sec = _override(cfg.get("gen", {}), n_stays=args.n_stays)
    try:
        gc = GenConfig(seed=run.seed, **sec)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"gen: {exc}") from None
    stays, truth = generate_cohort(gc, threads=args.threads)
    write_stays_csv(run.path("stays.csv"), stays)
    write_ground_truth_csv(run.path("ground_truth.csv"), stays, truth)
    run.config = {**run.config, "gen": gc.to_dict()}
    log.info("wrote %d stays", len(stays))
    return EXIT_OK


def train_config_from(args, cfg, seed) -> tuple:
    sec = dict(cfg.get("train", {}))
    sec = _override(sec, objective=args.objective, horizon=args.horizon, max_horizon=args.max_horizon,
                    learning_rate=args.lr, max_epochs=args.epochs, lengthscale=args.lengthscale)
    sec.setdefault("horizon", _horizon(args, cfg))
    val_fraction = sec.pop("val_fraction", 0.2)
    lengthscale = sec.pop("lengthscale", None)
    objective = sec.get("objective", "dsa_trunc")
    if objective == "survtls":
        K = sec.get("max_horizon") or sec["horizon"]
        trunc = sec.get("loss_horizon") or sec["horizon"]
        sec["smoothing"] = SmoothingConfig(lengthscale=lengthscale or 2.0, truncation=min(trunc, K))
    try:
        return TrainConfig(seed=seed, **sec), val_fraction, lengthscale
    except (TypeError, ValueError) as exc:
        raise UsageError(f"train: {exc}") from None


def cmd_train(args, cfg, run: Run) -> int:
    stays = _read_stays(args.stays, run)
    tc, val_fraction, lengthscale = train_config_from(args, cfg, run.seed)
    n_val = max(1, int(round(val_fraction * len(stays))))
    if len(stays) - n_val < 1:
        raise UsageError(f"need at least 2 stays, got {len(stays)}")
    order = np.random.Generator(np.random.PCG64(run.seed)).permutation(len(stays))
    val_idx = set(order[:n_val].tolist())
    train_eps = [e for i, s in enumerate(stays) if i not in val_idx for e in split_episodes(s).episodes]
    val_eps = [e for i, s in enumerate(stays) if i in val_idx for e in split_episodes(s).episodes]
    if not train_eps or not val_eps:
        raise UsageError("train or validation split has no labeled steps")
    snapshot = {k: v for k, v in asdict(tc).items() if k != "smoothing"}
    if tc.smoothing is not None:
        snapshot["smoothing"] = asdict(tc.smoothing)
    run.config = {**run.config, "train": snapshot, "val_fraction": val_fraction}

    log_path = run.path("train_log.csv")
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "val_timestep_auprc", "elapsed_s"])

        def progress(rec):
            w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_loss), repr(rec.val_timestep_auprc),
                        f"{rec.elapsed_s:.3f}"])
            fh.flush()

        params, records = fit(train_eps, val_eps, tc, progress=progress)
    save_checkpoint(run.path("checkpoint.json"), params, objective=tc.objective, horizon=tc.horizon,
                    max_horizon=tc.max_horizon, seed=run.seed, epochs=len(records))
    print(f"trained {tc.objective} for {len(records)} epochs; best val loss {min(r.val_loss for r in records):.6f}")
    return EXIT_OK


def _risks_for(params, meta, stays, h):
    objective = meta.get("objective", "dsa_trunc")
    if objective == "eep" and h != int(meta.get("horizon", h)):
        raise UsageError("an eep checkpoint only predicts at its training horizon")
    if objective != "eep" and h > params.dims.K:
        raise UsageError(f"horizon {h} exceeds the checkpoint's {params.dims.K} hazard outputs")
    tc = TrainConfig(objective=objective if objective in ("eep",) else "dsa_trunc", horizon=h,
                     max_horizon=max(h, params.dims.K) if objective != "eep" else None)
    return risk_rows(params, tc, stays), objective


def cmd_eval(args, cfg, run: Run) -> int:
    stays = _read_stays(args.stays, run)
    params, meta = _read_checkpoint(args.checkpoint, run)
    h = _horizon(args, cfg, fallback=int(meta.get("horizon", 24)))
    policy = policy_from(args, cfg)
    risks, objective = _risks_for(params, meta, stays, h)
    if policy.mode == "prioritized" and objective == "eep":
        raise UsageError("the prioritized policy needs per-horizon risk from a hazard model")
    run.config = {**run.config, "policy": asdict(policy), "horizon": h}

    traces = [raise_alarms(r, s.events.astype(bool), policy) for r, s in zip(risks, stays)]
    write_alarms_csv(run.path("alarms.csv"), [s.id for s in stays], traces)
    cohort = CohortRisk.from_stays(risks, [s.events for s in stays], h)
    points, auprc = event_pr_curve(cohort, policy)
    write_curve_csv(run.path("event_curve.csv"), points)
    summary = summarize(points, auprc)
    alarms = [t.alarms for t in traces]
    events = [s.events for s in stays]
    at_tau = {"tau": policy.tau, "n_alarms": int(sum(a.sum() for a in alarms))}
    for name, fn in (("event_recall", event_recall), ("alarm_precision", alarm_precision)):
        try:
            at_tau[name] = fn(alarms, events, h)
        except ValueError:
            at_tau[name] = None
    try:
        ts = timestep_auprc_of(risks, stays, h)
    except ValueError:
        ts = None
    summary.update({"timestep_auprc": ts, "at_tau": at_tau, "objective": objective, "horizon": h})
    write_summary_json(run.path("eval_summary.json"), summary)
    print(f"timestep AuPRC {ts}; event AuPRC {auprc:.4f}")
    return EXIT_OK


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args, cfg, run: Run) -> int:
    stays = _read_stays(args.stays, run)
    params, meta = _read_checkpoint(args.checkpoint, run)
    h = _horizon(args, cfg, fallback=int(meta.get("horizon", 24)))
    base = policy_from(args, cfg)
    risks, objective = _risks_for(params, meta, stays, h)
    cohort = CohortRisk.from_stays(risks, [s.events for s in stays], h)
    sec = cfg.get("sweep", {})
    gammas = args.gammas if args.gammas is not None else sec.get("gammas")
    h_maxes = args.hmaxes if args.hmaxes is not None else sec.get("h_maxes")
    policies = [base]
    if base.mode == "prioritized" and (gammas or h_maxes):
        policies = [
            PolicyConfig(**{**asdict(base), "gamma": g, "h_max": m})
            for g in (gammas or [base.gamma]) for m in (h_maxes or [base.h_max])
        ]
    results = []
    for i, pol in enumerate(policies):
        if pol.mode == "prioritized" and objective == "eep":
            raise UsageError("the prioritized policy needs per-horizon risk from a hazard model")
        points, auprc = event_pr_curve(cohort, pol)
        name = f"curve_{i:02d}.csv"
        write_curve_csv(run.path(name), points)
        results.append({"curve": name, "policy": asdict(pol), **summarize(points, auprc)})
    run.config = {**run.config, "horizon": h, "policies": [asdict(p) for p in policies]}
    write_summary_json(run.path("sweep_summary.json"), {"results": results})
    best = max(results, key=lambda r: r["event_auprc"])
    print(f"{len(results)} policies; best event AuPRC {best['event_auprc']:.4f} ({best['curve']})")
    return EXIT_OK


def cmd_ablate(args, cfg, run: Run) -> int:
    sec = cfg.get("ablation", {})
    factors = args.factors or sec.get("factors", [1, 2, 4])
    kw = {"horizon": _horizon(args, cfg)}
    if args.n_stays or sec.get("n_stays"):
        kw["n_stays"] = args.n_stays or sec["n_stays"]
    if args.epochs or sec.get("max_epochs"):
        kw["max_epochs"] = args.epochs or sec["max_epochs"]
    if cfg.get("gen"):
        kw["gen"] = dict(cfg["gen"])
    try:
        bench = BenchmarkConfig(**kw)
        bench.gen_config(run.seed)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"ablation: {exc}") from None
    run.config = {**run.config, "benchmark": asdict(bench), "factors": factors}
    rows = horizon_ablation(BenchmarkRun(run.seed, bench), factors=tuple(factors))
    with open(run.path("ablation.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "K", "timestep_auprc", "epochs"])
        for r in rows:
            w.writerow([r["seed"], r["K"], repr(r["timestep_auprc"]), r["epochs"]])
            print(f"K={r['K']}: timestep AuPRC {r['timestep_auprc']:.4f}")
    return EXIT_OK


def gradcheck_dims(budget: int, d: int, K: int) -> ModelDims:
    """Largest GRU (with embed = hidden // 2) whose parameter count fits ``budget``."""
    best = None
    for n in range(1, 129):
        dims = ModelDims(d=d, m=max(1, n // 2), n=n, K=K)
        if dims.n_params() <= budget:
            best = dims
    if best is None:
        raise UsageError(f"--params {budget} is too small for any network")
    return best


def cmd_gradcheck(args, cfg, run: Run) -> int:
    objectives = [args.objective] if args.objective else ["eep", "dsa_trunc", "survtls"]
    h = args.horizon or 4
    gc = GenConfig(n_stays=8, min_len=12, max_len=24, n_features=3, onset_logit=-3.0, seed=run.seed)
    stays, _ = generate_cohort(gc)
    eps = [e for s in stays for e in split_episodes(s).episodes]
    results = {}
    worst = 0.0
    for obj in objectives:
        smoothing = SmoothingConfig(lengthscale=args.lengthscale or 2.0, truncation=h) if obj == "survtls" else None
        tc = TrainConfig(objective=obj, horizon=h, l1_strength=0.01, smoothing=smoothing, seed=run.seed)
        dims = gradcheck_dims(args.params, d=gc.n_features, K=tc.n_outputs)
        rng = np.random.default_rng(run.seed)
        params = init_params(dims, rng.uniform(0.05, 0.5, tc.n_outputs), seed=run.seed)
        err = finite_difference_check(params, build_batch(eps, tc), tc, n_probes=args.probes, seed=run.seed)
        results[obj] = {"max_relative_error": err, "n_params": dims.n_params()}
        worst = max(worst, err)
        print(f"{obj}: {dims.n_params()} params, max relative error {err:.3e}")
    ok = worst <= args.tolerance
    run.config = {**run.config, "tolerance": args.tolerance, "probes": args.probes, "params": args.params}
    write_summary_json(run.path("gradcheck.json"), {"results": results, "tolerance": args.tolerance, "passed": bool(ok)})
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate-horizon": cmd_ablate,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (validated against the embedded schema)")
    common.add_argument("--seed", type=int, help="RNG seed (default: config value or 0)")
    common.add_argument("--out-dir", default=".", help="directory for artifacts and manifest.json")
    common.add_argument("--threads", type=int, default=1, help="max worker threads")
    common.add_argument("--preset", choices=sorted(TASK_PRESETS), help="task preset supplying the horizon")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dsa-eep", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic cohort")
    g.add_argument("--n-stays", type=int)

    def model_flags(sp):
        sp.add_argument("--stays", help=f"stay CSV, or '{SMOKE_FIXTURE}' for the bundled 50-stay fixture")
        sp.add_argument("--horizon", type=int)

    def policy_flags(sp):
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--policy", choices=["fixed", "prioritized"])
        sp.add_argument("--tau", type=float)
        sp.add_argument("--sigma", type=int)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--hmax", type=int)
        sp.add_argument("--shape", choices=["convex", "identity"])

    t = sub.add_parser("train", parents=[common], help="fit a model on a stay CSV")
    model_flags(t)
    t.add_argument("--objective", choices=["eep", "dsa_full", "dsa_trunc", "survtls"])
    t.add_argument("--max-horizon", type=int)
    t.add_argument("--lengthscale", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)

    e = sub.add_parser("eval", parents=[common], help="alarms and metrics of a checkpoint")
    model_flags(e)
    policy_flags(e)

    s = sub.add_parser("sweep", parents=[common], help="event PR curves over tau (and gamma / h_max grids)")
    model_flags(s)
    policy_flags(s)
    s.add_argument("--gammas", type=_float_list, help="comma-separated gamma grid")
    s.add_argument("--hmaxes", type=_int_list, help="comma-separated h_max grid")

    a = sub.add_parser("ablate-horizon", parents=[common], help="timestep AuPRC against K on the benchmark")
    a.add_argument("--horizon", type=int)
    a.add_argument("--factors", type=_int_list, help="K / h multiples (default 1,2,4)")
    a.add_argument("--n-stays", type=int)
    a.add_argument("--epochs", type=int)

    c = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the gradients")
    c.add_argument("--params", type=int, default=1000, help="parameter budget of the random nets")
    c.add_argument("--objective", choices=["eep", "dsa_full", "dsa_trunc", "survtls"])
    c.add_argument("--horizon", type=int)
    c.add_argument("--lengthscale", type=float)
    c.add_argument("--probes", type=int, default=40)
    c.add_argument("--tolerance", type=float, default=1e-4)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        run = Run(args.command, argv, args.out_dir, cfg, _seed(args, cfg))
        code = COMMANDS[args.command](args, cfg, run)
        run.finish()
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
