"""Pseudolabeling and the self-training operators.

Two regularisation encodings are supported through :class:`SelfTrainConfig`:
a hard norm budget ``||w|| <= R`` (the theory path, solved exactly for d <= 2
or by CCCP / accelerated descent otherwise) and a squared penalty
``lam * ||w||^2`` on the logistic loss (the experiment path, trained for a
fixed number of epochs per round). Unlabeled inputs are either plain arrays
of points (uniform weight) or a :class:`DiscreteDistribution` whose labels are
ignored for training and only used for diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .distributions import DiscreteDistribution, DomainSequence
from .models import LinearModel, Loss, loss_fn, sigmoid
from .optimize import (
    SolverConfig,
    erm_constrained,
    erm_exact_1d2d,
    penalized_logistic,
    soft_target_logistic,
)

__all__ = [
    "ConfigurationError",
    "StepError",
    "SelfTrainConfig",
    "STRecord",
    "STTrace",
    "PseudoLabeled",
    "pseudolabel",
    "filter_low_confidence",
    "self_train_step",
    "gradual_self_train",
    "repeated_target_self_train",
    "pooled_self_train",
    "step_seed",
]


class ConfigurationError(ValueError):
    pass


class StepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SelfTrainConfig:
    """Settings shared by every self-training operator.

    Exactly one of ``R`` (norm budget) and ``lam`` (squared penalty) is set.
    ``solver`` selects the constrained-path optimiser: ``"exact"`` (global,
    d <= 2 only), ``"local"`` (CCCP / accelerated descent with restarts) or
    ``"auto"`` (exact when possible).
    """

    loss: Loss = Loss.LOGISTIC
    R: float | None = None
    lam: float | None = 0.02
    confidence_filter_frac: float = 0.1
    window: int = 500
    epochs: int = 100
    label_mode: str = "hard"
    solver: str = "auto"
    solver_cfg: SolverConfig = field(default_factory=SolverConfig)
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss(self.loss))
        if (self.R is None) == (self.lam is None):
            raise ConfigurationError("set exactly one of R (norm budget) and lam (penalty)")
        if self.R is not None and not self.R > 0:
            raise ConfigurationError("R must be positive")
        if self.lam is not None:
            if self.lam < 0:
                raise ConfigurationError("lam must be non-negative")
            if self.loss is not Loss.LOGISTIC:
                raise ConfigurationError("the penalised path trains the logistic loss only")
        if not 0 <= self.confidence_filter_frac < 1:
            raise ConfigurationError("confidence_filter_frac must lie in [0, 1)")
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.label_mode not in ("hard", "soft"):
            raise ConfigurationError(f"label_mode must be 'hard' or 'soft', got {self.label_mode!r}")
        if self.solver not in ("auto", "exact", "local"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")

    @property
    def penalized(self) -> bool:
        return self.lam is not None

    def with_(self, **kw) -> "SelfTrainConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class STRecord:
    t: int
    objective: float
    n_filtered: int
    agreement: float | None
    model: LinearModel

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "objective": self.objective,
            "n_filtered": self.n_filtered,
            "agreement": self.agreement,
            "model_ref": f"step_{self.t:05d}",
        }


@dataclass
class STTrace:
    records: list[STRecord] = field(default_factory=list)

    def append(self, rec: STRecord) -> None:
        if self.records and rec.t <= self.records[-1].t:
            raise ValueError("trace steps must be strictly increasing")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def next_t(self) -> int:
        return self.records[-1].t + 1 if self.records else 1

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def export(self, out_dir) -> None:
        """Write ``trace.jsonl`` and ``models.json`` (model_ref -> serialised model)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.jsonl").write_text(self.to_jsonl())
        models = {r.to_dict()["model_ref"]: r.model.to_dict() for r in self.records}
        (out / "models.json").write_text(json.dumps(models, indent=1))


class PseudoLabeled(NamedTuple):
    x: np.ndarray
    labels: np.ndarray
    confidence: np.ndarray
    masses: np.ndarray | None = None


def step_seed(seed: int, step: int) -> int:
    """Independent per-step seed derived from (seed, step)."""
    return int(np.random.SeedSequence([seed, step]).generate_state(1)[0])


def _unpack(xs) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    if isinstance(xs, DiscreteDistribution):
        return xs.points, xs.masses, xs.labels
    x = np.asarray(xs, float)
    if x.ndim == 1:
        x = x[:, None]
    return x, None, None


def pseudolabel(model: LinearModel, xs) -> PseudoLabeled:
    """Label points by the model's sign (0 -> +1); confidence is |score|."""
    x, masses, _ = _unpack(xs)
    s = model.scores(x)
    return PseudoLabeled(x, np.where(s >= 0, 1, -1), np.abs(s), masses)


def filter_low_confidence(batch: PseudoLabeled, alpha: float) -> PseudoLabeled:
    """Drop the floor(alpha * n) least confident entries.

    Entries are ranked by a stable ascending sort on confidence, so among
    exact ties the earlier entries are the ones removed.
    """
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    n = batch.x.shape[0]
    k = int(np.floor(alpha * n))
    if k == 0:
        return batch
    if batch.masses is not None:
        raise ValueError("confidence filtering applies to unweighted samples only")
    drop = np.argsort(batch.confidence, kind="stable")[:k]
    keep = np.ones(n, bool)
    keep[drop] = False
    return PseudoLabeled(batch.x[keep], batch.labels[keep], batch.confidence[keep], None)


def _train(model: LinearModel, batch: PseudoLabeled, cfg: SelfTrainConfig, seed: int) -> tuple[LinearModel, float]:
    x = batch.x
    soft = cfg.label_mode == "soft"
    if cfg.penalized:
        targets = sigmoid(model.scores(x)) if soft else batch.labels
        new = penalized_logistic(
            x, targets, cfg.lam, cfg.epochs, seed=seed, warm_start=model,
            batch_size=cfg.batch_size, lr=cfg.learning_rate,
        )
        p = np.clip(sigmoid(new.scores(x)), 1e-12, 1 - 1e-12)
        t = targets if soft else (batch.labels > 0).astype(float)
        obj = float(np.mean(-(t * np.log(p) + (1 - t) * np.log1p(-p))) + cfg.lam * new.w @ new.w)
        return new, obj

    masses = batch.masses if batch.masses is not None else np.full(x.shape[0], 1.0 / x.shape[0])
    warm = model.with_budget(cfg.R) if np.linalg.norm(model.w) <= cfg.R + 1e-9 else model.scaled(
        cfg.R / np.linalg.norm(model.w)).with_budget(cfg.R)
    if soft:
        new = soft_target_logistic(x, sigmoid(model.scores(x)), masses, cfg.R, warm)
        p = np.clip(sigmoid(new.scores(x)), 1e-12, 1 - 1e-12)
        q = sigmoid(model.scores(x))
        return new, float(np.dot(masses, -(q * np.log(p) + (1 - q) * np.log1p(-p))))

    data = DiscreteDistribution(x, batch.labels, masses)
    use_exact = cfg.solver == "exact" or (cfg.solver == "auto" and x.shape[1] <= 2 and len(data) <= 64)
    scfg = replace(cfg.solver_cfg, seed=seed % (2**31))
    if use_exact:
        new = erm_exact_1d2d(cfg.loss, data, cfg.R, grid=scfg.grid_resolution, warm_start=warm)
    else:
        new = erm_constrained(cfg.loss, data, cfg.R, scfg, warm_start=warm)
    obj = float(np.dot(data.masses, loss_fn(cfg.loss, data.labels * new.scores(data.points))))
    return new, obj


def self_train_step(
    model: LinearModel,
    xs,
    cfg: SelfTrainConfig,
    trace: STTrace | None = None,
    truth: np.ndarray | None = None,
) -> LinearModel:
    """One round: pseudolabel, filter, retrain from the current model.

    ``truth`` (optional, diagnostics only) gives the true labels of ``xs`` and
    is used solely to record the pseudolabel agreement rate in the trace.
    When ``xs`` is a DiscreteDistribution its labels serve that purpose.
    """
    x, masses, dist_labels = _unpack(xs)
    if x.shape[0] == 0:
        raise StepError("no unlabeled points to self-train on")
    batch = pseudolabel(model, xs)
    truth = dist_labels if truth is None else np.asarray(truth)
    agreement = None
    if truth is not None:
        w = masses if masses is not None else np.full(x.shape[0], 1.0 / x.shape[0])
        agreement = float(np.dot(w, batch.labels == truth))
    kept = filter_low_confidence(batch, cfg.confidence_filter_frac)
    if kept.x.shape[0] == 0:
        raise StepError("all examples were filtered out")
    t = trace.next_t if trace is not None else 1
    new, obj = _train(model, kept, cfg, step_seed(cfg.seed, t))
    if trace is not None:
        trace.append(STRecord(t, obj, batch.x.shape[0] - kept.x.shape[0], agreement, new))
    return new


def _windows(pool: np.ndarray, W: int) -> list[np.ndarray]:
    n = pool.shape[0]
    if n % W != 0:
        raise ConfigurationError(f"window size {W} does not divide the number of unlabeled points {n}")
    return [pool[i : i + W] for i in range(0, n, W)]


def gradual_self_train(
    model: LinearModel,
    sequence,
    cfg: SelfTrainConfig,
    trace: STTrace | None = None,
) -> tuple[LinearModel, STTrace]:
    """Self-train through the intermediate domains in temporal order.

    ``sequence`` is a :class:`DomainSequence` (its flat unlabeled stream is cut
    into consecutive windows of ``cfg.window`` points) or an explicit list of
    per-domain unlabeled sets (arrays or DiscreteDistributions), each used
    as one step.
    """
    trace = trace if trace is not None else STTrace()
    if isinstance(sequence, DomainSequence):
        steps = _windows(sequence.flat_intermediate(), cfg.window) if sequence.intermediate else []
    else:
        steps = list(sequence)
    for xs in steps:
        model = self_train_step(model, xs, cfg, trace)
    return model, trace


def repeated_target_self_train(
    model: LinearModel,
    target_xs,
    rounds: int,
    cfg: SelfTrainConfig,
    trace: STTrace | None = None,
) -> tuple[LinearModel, STTrace]:
    """Self-train ``rounds`` times on the same pool; pseudolabels and filtering are redone each round."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    trace = trace if trace is not None else STTrace()
    for _ in range(rounds):
        model = self_train_step(model, target_xs, cfg, trace)
    return model, trace


def pooled_self_train(
    model: LinearModel,
    all_unlabeled: Sequence,
    rounds: int,
    cfg: SelfTrainConfig,
    trace: STTrace | None = None,
) -> tuple[LinearModel, STTrace]:
    """Repeated self-training on the union of several unlabeled pools."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if isinstance(all_unlabeled, np.ndarray):
        pool = all_unlabeled
    else:
        pool = np.concatenate([np.atleast_2d(np.asarray(p, float)) for p in all_unlabeled], axis=0)
    return repeated_target_self_train(model, pool, rounds, cfg, trace)
