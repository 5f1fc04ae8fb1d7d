"""Multi-seed experiment orchestration and reports.

A configuration is a plain JSON-compatible dict; :func:`parse_config` checks
it against a fixed schema (unknown keys are rejected with the offending
path), materialises defaults and returns an :class:`ExperimentConfig`.
"""

from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .distributions import DataError, DiscreteDistribution, DomainSequence
from .models import LinearModel, Loss
from .optimize import SolverConfig, erm_constrained, erm_exact_1d2d, penalized_logistic
from .selftrain import (
    ConfigurationError,
    SelfTrainConfig,
    gradual_self_train,
    pooled_self_train,
    repeated_target_self_train,
    step_seed,
)
from .shiftgen import (
    GaussianDriftSpec,
    drift_endpoints,
    gen_gaussian_drift,
    gen_mixing_interpolation,
    gen_rotation_drift,
)

__all__ = [
    "METHODS",
    "ABLATIONS",
    "ExperimentConfig",
    "parse_config",
    "default_config",
    "build_sequence",
    "train_source",
    "run_method",
    "run_experiment",
    "run_ablation",
    "ablated_config",
    "confidence_interval",
    "report_to_json",
]

VERSION = "0.1.0"
METHODS = ("source_only", "target_st", "all_st", "gradual_st")
ABLATIONS = ("no_filter", "window_override", "no_reg", "soft_labels")

_DATASET_KEYS = {
    "gaussian_drift": {"kind", "seed", "d", "n_labeled", "n_unlabeled", "min_var", "max_var", "n_target_eval"},
    "mixing": {"kind", "seed", "d", "n_labeled", "min_var", "max_var", "n_domains", "n_per_domain", "n_target_eval"},
    "rotation": {"kind", "seed", "n_points", "n_domains", "total_angle_deg", "radius_band", "n_target_eval"},
    "import": {"kind", "path"},
}
_DATASET_DEFAULTS = {
    "gaussian_drift": {"seed": None, "d": 100, "n_labeled": 500, "n_unlabeled": 5000, "min_var": 0.05, "max_var": 0.1, "n_target_eval": 1000},
    "mixing": {"seed": None, "d": 100, "n_labeled": 500, "min_var": 0.05, "max_var": 0.1, "n_domains": 10, "n_per_domain": 500, "n_target_eval": 1000},
    "rotation": {"seed": None, "n_points": 200, "n_domains": 12, "total_angle_deg": 60.0, "radius_band": [8.0, 10.0], "n_target_eval": 1000},
    "import": {},
}
_MODEL_DEFAULTS = {"loss": "logistic", "regularization": {"kind": "penalty", "lam": 0.02}}
_ST_DEFAULTS = {
    "confidence_filter_frac": 0.1,
    "window": 500,
    "epochs": 100,
    "label_mode": "hard",
    "solver": "auto",
    "batch_size": 32,
    "learning_rate": 1e-3,
    "rounds": None,
    "window_override": None,
}
_TOP_KEYS = {"dataset", "model", "methods", "selftrain", "seeds"}


def default_config() -> dict:
    return {
        "dataset": {"kind": "gaussian_drift", **_DATASET_DEFAULTS["gaussian_drift"]},
        "model": copy.deepcopy(_MODEL_DEFAULTS),
        "methods": list(METHODS),
        "selftrain": dict(_ST_DEFAULTS),
        "seeds": [0, 1, 2, 3, 4],
    }


def _reject_unknown(obj: dict, allowed: set, path: str):
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{path}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigurationError(f"{path}: unknown key(s) {', '.join(extra)}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    loss: Loss
    R: float | None
    lam: float | None
    methods: tuple[str, ...]
    selftrain: dict
    seeds: tuple[int, ...]

    def resolved(self) -> dict:
        reg = {"kind": "constraint", "R": self.R} if self.R is not None else {"kind": "penalty", "lam": self.lam}
        return {
            "dataset": self.dataset,
            "model": {"loss": self.loss.value, "regularization": reg},
            "methods": list(self.methods),
            "selftrain": self.selftrain,
            "seeds": list(self.seeds),
        }

    def st_config(self, seed: int) -> SelfTrainConfig:
        s = self.selftrain
        window = s["window_override"] or s["window"]
        return SelfTrainConfig(
            loss=self.loss, R=self.R, lam=self.lam,
            confidence_filter_frac=s["confidence_filter_frac"], window=window, epochs=s["epochs"],
            label_mode=s["label_mode"], solver=s["solver"], solver_cfg=SolverConfig(),
            batch_size=s["batch_size"], learning_rate=s["learning_rate"], seed=seed,
        )


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw configuration and fill in defaults."""
    _reject_unknown(raw, _TOP_KEYS, "config")
    ds = raw.get("dataset", {"kind": "gaussian_drift"})
    _reject_unknown(ds, set().union(*_DATASET_KEYS.values()), "config.dataset")
    kind = ds.get("kind", "gaussian_drift")
    if kind not in _DATASET_KEYS:
        raise ConfigurationError(f"config.dataset.kind: unknown dataset {kind!r}")
    _reject_unknown(ds, _DATASET_KEYS[kind], "config.dataset")
    dataset = {"kind": kind, **_DATASET_DEFAULTS[kind], **ds}
    if kind == "import" and "path" not in dataset:
        raise ConfigurationError("config.dataset.path: required for kind 'import'")

    model = raw.get("model", {})
    _reject_unknown(model, {"loss", "regularization"}, "config.model")
    loss = model.get("loss", "logistic")
    try:
        loss = Loss(loss)
    except ValueError:
        raise ConfigurationError(f"config.model.loss: unknown loss {loss!r}") from None
    reg = model.get("regularization", _MODEL_DEFAULTS["regularization"])
    _reject_unknown(reg, {"kind", "R", "lam"}, "config.model.regularization")
    if reg.get("kind") == "constraint":
        if "lam" in reg or "R" not in reg:
            raise ConfigurationError("config.model.regularization: constraint needs R and no lam")
        R, lam = float(reg["R"]), None
    elif reg.get("kind") == "penalty":
        if "R" in reg:
            raise ConfigurationError("config.model.regularization: penalty takes lam, not R")
        R, lam = None, float(reg.get("lam", 0.02))
    else:
        raise ConfigurationError("config.model.regularization.kind: must be 'constraint' or 'penalty'")

    methods = raw.get("methods", list(METHODS))
    if not isinstance(methods, list) or not methods:
        raise ConfigurationError("config.methods: expected a nonempty list")
    for i, m in enumerate(methods):
        if m not in METHODS:
            raise ConfigurationError(f"config.methods[{i}]: unknown method {m!r}")

    st = raw.get("selftrain", {})
    _reject_unknown(st, set(_ST_DEFAULTS), "config.selftrain")
    st = {**_ST_DEFAULTS, **st}

    seeds = raw.get("seeds", [0, 1, 2, 3, 4])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigurationError("config.seeds: expected a nonempty list of integers")

    cfg = ExperimentConfig(dataset, loss, R, lam, tuple(methods), st, tuple(seeds))
    cfg.st_config(seeds[0])  # surfaces SelfTrainConfig validation errors early
    if st["rounds"] is not None and st["rounds"] < 1:
        raise ConfigurationError("config.selftrain.rounds: must be >= 1")
    return cfg


def build_sequence(dataset: dict, seed: int) -> DomainSequence:
    """Generate (or load) the domain sequence for one run.

    A fixed ``dataset["seed"]`` pins the data so that runs differ only in
    training randomness; when it is None the run seed is used.
    """
    kind = dataset["kind"]
    if dataset.get("seed") is not None:
        seed = int(dataset["seed"])
    if kind == "gaussian_drift":
        spec = GaussianDriftSpec(
            d=dataset["d"], n_labeled=dataset["n_labeled"], n_unlabeled=dataset["n_unlabeled"],
            min_var=dataset["min_var"], max_var=dataset["max_var"], n_target_eval=dataset["n_target_eval"], seed=seed,
        )
        return gen_gaussian_drift(spec)
    if kind == "mixing":
        spec = GaussianDriftSpec(d=dataset["d"], min_var=dataset["min_var"], max_var=dataset["max_var"], seed=seed)
        src, tgt = drift_endpoints(spec, np.random.default_rng(seed))
        return gen_mixing_interpolation(
            src, tgt, dataset["n_domains"], dataset["n_per_domain"], seed + 1,
            n_labeled=dataset["n_labeled"], n_target_eval=dataset["n_target_eval"],
        )
    if kind == "rotation":
        return gen_rotation_drift(
            dataset["n_points"], dataset["n_domains"], dataset["total_angle_deg"],
            tuple(dataset["radius_band"]), seed, dataset["n_target_eval"],
        )
    return DomainSequence.load(dataset["path"])


def train_source(seq: DomainSequence, st: SelfTrainConfig) -> LinearModel:
    """Fit the initial model on the labeled source sample."""
    x, y = seq.source.x, seq.source.y
    seed = step_seed(st.seed, 0)
    if st.penalized:
        return penalized_logistic(x, y, st.lam, st.epochs, seed=seed, batch_size=st.batch_size, lr=st.learning_rate)
    data = DiscreteDistribution(x, y)
    if st.solver == "exact" or (st.solver == "auto" and x.shape[1] <= 2 and len(data) <= 64):
        return erm_exact_1d2d(st.loss, data, st.R)
    return erm_constrained(st.loss, data, st.R, replace(st.solver_cfg, seed=seed % (2**31)))


def _rounds(seq: DomainSequence, cfg: ExperimentConfig, st: SelfTrainConfig) -> int:
    if cfg.selftrain["rounds"] is not None:
        return cfg.selftrain["rounds"]
    n = seq.flat_intermediate().shape[0]
    if n % st.window != 0:
        raise ConfigurationError(f"window size {st.window} does not divide the number of unlabeled points {n}")
    return max(1, n // st.window)


def run_method(method: str, seq: DomainSequence, model0: LinearModel, cfg: ExperimentConfig, st: SelfTrainConfig) -> LinearModel:
    if method == "source_only":
        return model0
    rounds = _rounds(seq, cfg, st)
    target_pool = seq.target_unlabeled if seq.target_unlabeled is not None else seq.intermediate[-1]
    if method == "target_st":
        return repeated_target_self_train(model0, target_pool, rounds, st)[0]
    if method == "all_st":
        # the same unlabeled data gradual self-training sees, without its ordering
        return pooled_self_train(model0, [seq.flat_intermediate()], rounds, st)[0]
    if method == "gradual_st":
        return gradual_self_train(model0, seq, st)[0]
    raise ConfigurationError(f"unknown method {method!r}")


def _accuracy(model: LinearModel, seq: DomainSequence) -> float:
    return float(100.0 * np.mean(model.predict(seq.target_eval.x) == seq.target_eval.y))


def _run_seed(args) -> dict:
    cfg, seed = args
    st = cfg.st_config(seed)
    seq = build_sequence(cfg.dataset, seed)
    model0 = train_source(seq, st)
    return {m: _accuracy(run_method(m, seq, model0, cfg, st), seq) for m in cfg.methods}


def confidence_interval(values, level: float = 0.90) -> float | None:
    """Half-width of the Student-t interval for the mean (k - 1 degrees of freedom); None for one value."""
    v = np.asarray(values, float)
    k = v.size
    if k < 2:
        return None
    sem = v.std(ddof=1) / np.sqrt(k)
    return float(stats.t.ppf(0.5 + level / 2, k - 1) * sem)


def _workers(n_jobs: int) -> int:
    env = os.environ.get("GDA_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every configured method on every seed and aggregate target accuracies (in percent)."""
    t0 = time.perf_counter()
    jobs = [(cfg, s) for s in cfg.seeds]
    n = _workers(len(jobs))
    if n > 1:
        with ProcessPoolExecutor(n) as ex:
            per_seed = list(ex.map(_run_seed, jobs))
    else:
        per_seed = [_run_seed(j) for j in jobs]
    methods = {}
    for m in cfg.methods:
        acc = [r[m] for r in per_seed]
        methods[m] = {
            "accuracies": acc,
            "mean": float(np.mean(acc)),
            "ci90": confidence_interval(acc),
        }
    return {
        "methods": methods,
        "seeds": list(cfg.seeds),
        "config": cfg.resolved(),
        "ci_method": "student-t, k-1 degrees of freedom, 90%",
        "notes": {"target_st_refilters_each_round": True},
        "version": VERSION,
        "timing": {"wall_clock_s": time.perf_counter() - t0},
    }


def ablated_config(cfg: ExperimentConfig, ablation: str) -> ExperimentConfig:
    if ablation == "no_filter":
        return replace(cfg, selftrain={**cfg.selftrain, "confidence_filter_frac": 0.0})
    if ablation == "window_override":
        w = cfg.selftrain["window_override"] or max(1, cfg.selftrain["window"] // 2)
        return replace(cfg, selftrain={**cfg.selftrain, "window_override": w})
    if ablation == "no_reg":
        if cfg.lam is None:
            raise ConfigurationError("no_reg applies to the penalised (lam) regularisation only")
        return replace(cfg, lam=0.0)
    if ablation == "soft_labels":
        return replace(cfg, selftrain={**cfg.selftrain, "label_mode": "soft"})
    raise ConfigurationError(f"unknown ablation {ablation!r}; choose from {', '.join(ABLATIONS)}")


def run_ablation(cfg: ExperimentConfig, ablation: str) -> dict:
    """Run the base and the ablated configuration on shared seeds; report per-seed deltas (base - ablated)."""
    abl = ablated_config(cfg, ablation)
    base = run_experiment(cfg)
    other = run_experiment(abl)
    deltas = {
        m: [b - a for b, a in zip(base["methods"][m]["accuracies"], other["methods"][m]["accuracies"])]
        for m in cfg.methods
    }
    return {"ablation": ablation, "base": base, "ablated": other, "deltas": deltas, "version": VERSION}


def report_to_json(report: dict, include_timing: bool = True) -> str:
    def strip(o):
        if isinstance(o, dict):
            return {k: strip(v) for k, v in o.items() if include_timing or k != "timing"}
        if isinstance(o, list):
            return [strip(v) for v in o]
        return o

    return json.dumps(strip(report), indent=2, sort_keys=True)
