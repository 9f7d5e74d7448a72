"""Phase orchestration: basic training, the continual loop, randomized
ordering batteries, and few-shot experiments.

Samples handed to the trainer always carry model-space label indices
(basic classes first, compound classes in the order they are learned);
the translation from a dataset's own registry happens at phase entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import losses, replay
from .data.dataset import Dataset, FoldSplit, Sample
from .data.preprocess import augment
from .errors import ConfigError
from .metrics import RunLog, StepRecord
from .model import ModelState, TeacherSnapshot, apply_freezing, expand_head, snapshot_teacher
from .nn import adam_step, backward
from .rng import substream

REPLAY_MODES = ("psmr", "random", "none")


@dataclass
class PhaseConfig:
    """Knobs shared by every training phase."""

    epochs_cap: int = 1000
    patience: int = 10
    batch_size: int = 32
    lr_initial: float = 1e-4
    lr_finetune: float = 1e-6
    lr_continual: float = 1e-5
    temperature: float = 3.0
    gamma0: float = 0.1
    gamma_decay_enabled: bool = True
    memory_capacity: int = 60
    replay_mode: str = "psmr"
    distill: bool = True
    growing_capacity: bool = False
    augment: bool = True

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.epochs_cap < 1:
            raise ConfigError("epochs cap must be >= 1")
        if self.replay_mode not in REPLAY_MODES:
            raise ConfigError(f"replay mode must be one of {REPLAY_MODES}")
        if not 0.0 <= self.gamma0 <= 1.0:
            raise ConfigError("gamma0 must lie in [0, 1]")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")


def early_stop(history, patience: int):
    """(stop?, best epoch) for a per-epoch test accuracy history.

    Epochs are numbered from 1. Training stops once ``patience``
    consecutive epochs pass without strict improvement on the best value;
    the best epoch is the first one attaining the maximum.
    """
    if len(history) == 0:
        raise ValueError("history must be non-empty")
    best = max(history)
    best_epoch = list(history).index(best) + 1
    return (len(history) - best_epoch) >= patience, best_epoch


@dataclass
class TrainResult:
    best_acc: float
    best_epoch: int
    epochs_run: int
    steps_at_best: int
    steps_total: int
    history: list


def _to_model_space(samples, data_registry, model_registry):
    out = []
    for s in samples:
        out.append(Sample(s.image, model_registry.index_of(data_registry.label_of(s.label)), s.subject))
    return out


def _stack(samples):
    return np.stack([s.image for s in samples]), np.array([s.label for s in samples], dtype=np.int64)


def _evaluate(model: ModelState, test_x: np.ndarray, test_y: np.ndarray):
    preds = model.predict(test_x)
    return float(np.mean(preds == test_y)), preds


def _train_phase(
    model: ModelState,
    train_samples,
    test_x,
    test_y,
    cfg: PhaseConfig,
    lr: float,
    seed: int,
    stream_key: tuple,
    teacher: TeacherSnapshot | None = None,
    gamma: float = 0.0,
    iteration: int = 0,
    epoch_log: list | None = None,
    new_class_index: int | None = None,
    monitor: str = "all",
) -> TrainResult:
    """Generic epoch loop with early stopping and best-weight restore.

    ``monitor`` picks the early-stopping metric: test accuracy over the
    whole test set ("all") or over the new class only ("new").
    """
    train_x, train_y = _stack(train_samples)
    k = model.n_classes
    onehot = np.eye(k, dtype=np.float32)
    new_mask = (test_y == new_class_index) if new_class_index is not None else None
    if monitor == "new" and (new_mask is None or not new_mask.any()):
        raise ValueError("monitor='new' needs test samples of the new class")
    if teacher is None:
        gamma = 0.0
    distilling = teacher is not None and gamma > 0.0

    history: list[float] = []
    best_params = None
    best_epoch = 0
    steps_total = 0
    steps_at_best = 0
    epochs_run = 0
    for epoch in range(1, cfg.epochs_cap + 1):
        epochs_run = epoch
        order = substream(seed, *stream_key, "shuffle", epoch).permutation(len(train_samples))
        ep_loss, ep_ce, ep_dist, n_batches = 0.0, 0.0, 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if cfg.augment:
                xb = np.stack(
                    [augment(train_x[i], substream(seed, *stream_key, "aug", epoch, int(i))) for i in idx]
                )
            else:
                xb = train_x[idx]
            yb = onehot[train_y[idx]]
            logits, tape = model.forward(xb)
            if distilling:
                targets = losses.zero_pad_targets(teacher.soft_targets(xb, cfg.temperature), k)
                student_soft = losses.softmax_with_temperature(logits, cfg.temperature)
                dist = losses.distillation_loss(targets, student_soft)
            else:
                targets = None
                dist = 0.0
            ce = losses.cross_entropy(yb, losses.softmax_with_temperature(logits, 1.0))
            loss = (1.0 - gamma) * ce + gamma * dist
            dlogits = losses.combined_loss_grad(logits, yb, targets, cfg.temperature, gamma)
            grads = backward(model.params, tape, dlogits)
            adam_step(model.params, grads, lr)
            steps_total += 1
            ep_loss += loss
            ep_ce += ce
            ep_dist += dist
            n_batches += 1
        acc, preds = _evaluate(model, test_x, test_y)
        if monitor == "new":
            score = float(np.mean(preds[new_mask] == test_y[new_mask]))
        else:
            score = acc
        history.append(score)
        if best_params is None or score > max(history[:-1], default=-1.0):
            best_params = model.params.clone()
            best_epoch = epoch
            steps_at_best = steps_total
        if epoch_log is not None:
            hits = np.bincount(test_y[preds == test_y], minlength=k)
            totals = np.bincount(test_y, minlength=k)
            per_class = [
                (float(h / t) if t else None) for h, t in zip(hits.tolist(), totals.tolist())
            ]
            rec = {
                "phase": "/".join(str(p) for p in stream_key),
                "iteration": iteration,
                "epoch": epoch,
                "loss": ep_loss / n_batches,
                "loss_ce": ep_ce / n_batches,
                "loss_dist": ep_dist / n_batches,
                "gamma": gamma,
                "test_acc_all": acc,
                "test_acc_per_class": per_class,
                "steps": steps_total,
            }
            if new_mask is not None and new_mask.any():
                rec["test_acc_new"] = float(np.mean(preds[new_mask] == test_y[new_mask]))
            epoch_log.append(rec)
        stop, _ = early_stop(history, cfg.patience)
        if stop:
            break
    model.params.load_values(best_params)
    return TrainResult(max(history), best_epoch, epochs_run, steps_at_best, steps_total, history)


@dataclass
class BasicPhaseResult:
    model: ModelState
    teacher: TeacherSnapshot
    fold_accuracies: list
    best_fold: int
    stats: dict
    epoch_log: list = field(default_factory=list)


def train_basic_phase(
    dataset: Dataset,
    folds: FoldSplit,
    arch,
    cfg: PhaseConfig,
    seed: int,
    basic_labels=None,
) -> BasicPhaseResult:
    """Two-stage training (frozen extractor, then full fine-tune) per fold.

    Returns the best fold's model, its frozen teacher copy, and the
    max/mean/sd accuracy summary across folds.
    """
    from .model import new_model

    basic_labels = list(basic_labels or dataset.registry.basic_labels)
    for s in dataset.samples:
        if dataset.registry.label_of(s.label) not in basic_labels:
            raise ValueError(
                f"basic phase dataset contains non-basic class "
                f"{dataset.registry.label_of(s.label)!r}"
            )
    best = None
    accuracies = []
    epoch_log: list[dict] = []
    for f in range(len(folds)):
        model = new_model(arch, basic_labels, substream(seed, "init", f))
        train_samples = _to_model_space(
            dataset.filter_subjects(folds.train_subjects(f)).samples, dataset.registry, model.registry
        )
        test_samples = _to_model_space(
            dataset.filter_subjects(folds.test_subjects(f)).samples, dataset.registry, model.registry
        )
        test_x, test_y = _stack(test_samples)

        apply_freezing(model, "basic-initial")
        model.params.reset_optimizer_state()
        _train_phase(
            model, train_samples, test_x, test_y, cfg, cfg.lr_initial, seed,
            ("basic", f, "stage1"), epoch_log=epoch_log, iteration=0,
        )
        apply_freezing(model, "basic-finetune")
        model.params.reset_optimizer_state()
        _train_phase(
            model, train_samples, test_x, test_y, cfg, cfg.lr_finetune, seed,
            ("basic", f, "stage2"), epoch_log=epoch_log, iteration=0,
        )
        acc, _ = _evaluate(model, test_x, test_y)
        accuracies.append(acc)
        if best is None or acc > best[0]:
            best = (acc, f, model)
    stats = {
        "max": float(np.max(accuracies)),
        "mean": float(np.mean(accuracies)),
        "sd": float(np.std(accuracies)),
    }
    _, best_fold, best_model = best
    return BasicPhaseResult(
        best_model, snapshot_teacher(best_model), accuracies, best_fold, stats, epoch_log
    )


def _basic_step_record(model, test_x, test_y) -> StepRecord:
    _, preds = _evaluate(model, test_x, test_y)
    return StepRecord(step=0, truth=test_y.copy(), pred=preds, new_mask=None, label=None)


def run_continual(
    basic_model: ModelState,
    teacher: TeacherSnapshot,
    ordering,
    train_ds: Dataset,
    test_ds: Dataset,
    cfg: PhaseConfig,
    seed: int,
    ordering_id: int = 0,
) -> RunLog:
    """One class-incremental pass over ``ordering``.

    Per iteration: expand the head, select replay memory, merge the new
    class, train with the combined loss against zero-padded teacher
    targets, record test accuracy, then decay the distillation weight.
    """
    for label in ordering:
        if label not in train_ds.registry:
            raise ConfigError(f"ordering references unknown class {label!r}")
        if not train_ds.registry.is_compound(label):
            raise ConfigError(f"ordering class {label!r} is not a compound class")

    model = basic_model.clone()
    apply_freezing(model, "continual")
    log = RunLog(ordering_id, list(ordering))
    k_basic = model.n_classes

    basic_names = list(model.registry.labels)
    seen_names = list(basic_names)
    test_basic = _to_model_space(
        test_ds.filter_labels(basic_names).samples, test_ds.registry, model.registry
    )
    tx, ty = _stack(test_basic)
    log.steps.append(_basic_step_record(model, tx, ty))

    basic_train = _to_model_space(
        train_ds.filter_labels(basic_names).samples, train_ds.registry, model.registry
    )
    use_replay = cfg.replay_mode != "none" and cfg.memory_capacity > 0
    quota = cfg.memory_capacity // k_basic if cfg.growing_capacity else None
    gamma = cfg.gamma0 if cfg.distill else 0.0
    pool_prev = basic_train

    for i, label in enumerate(ordering, start=1):
        k_prev = model.n_classes
        model = expand_head(model, label, substream(seed, "expand", ordering_id, i))
        new_idx = model.registry.index_of(label)
        new_samples = _to_model_space(
            train_ds.filter_labels([label]).samples, train_ds.registry, model.registry
        )
        if use_replay:
            if i == 1:
                selected = replay.init_memory(
                    basic_train, cfg.memory_capacity, substream(seed, "memory", ordering_id)
                ).samples
            elif cfg.replay_mode == "psmr":
                capacity = (quota * k_prev) if quota is not None else cfg.memory_capacity
                selected = replay.psmr_select(pool_prev, model, capacity, k_prev, per_class_quota=quota)
            else:
                capacity = (quota * k_prev) if quota is not None else cfg.memory_capacity
                selected = replay.random_select_baseline(
                    pool_prev, capacity, substream(seed, "memory", ordering_id, i)
                )
        else:
            selected = []
        pool = replay.merge_new_class(selected, new_samples)

        seen_names.append(label)
        test_samples = _to_model_space(
            test_ds.filter_labels(seen_names).samples, test_ds.registry, model.registry
        )
        test_x, test_y = _stack(test_samples)

        model.params.reset_optimizer_state()
        result = _train_phase(
            model, pool, test_x, test_y, cfg, cfg.lr_continual, seed,
            ("continual", ordering_id, i),
            teacher=teacher if cfg.distill else None,
            gamma=gamma,
            iteration=i,
            epoch_log=log.epochs,
            new_class_index=new_idx,
        )
        _, preds = _evaluate(model, test_x, test_y)
        log.steps.append(
            StepRecord(
                step=i,
                truth=test_y.copy(),
                pred=preds,
                new_mask=(test_y == new_idx),
                label=label,
                best_epoch=result.best_epoch,
                train_steps=result.steps_at_best,
            )
        )
        if cfg.distill and cfg.gamma_decay_enabled:
            gamma = losses.gamma_decay(gamma)
        pool_prev = pool
    return log


def make_orderings(labels, count: int, seed: int):
    """``count`` seeded random permutations of ``labels`` (distinct when possible)."""
    if count < 1:
        raise ValueError("ordering count must be >= 1")
    labels = list(labels)
    orderings = []
    seen = set()
    for j in range(count):
        for attempt in range(1000):
            rng = substream(seed, "ordering", j, attempt)
            perm = tuple(labels[i] for i in rng.permutation(len(labels)))
            if perm not in seen:
                break
        seen.add(perm)
        orderings.append(list(perm))
    return orderings


def compound_ordering_pool(registry, exclude_singular: bool = False, singular_labels=()):
    """Compound labels eligible for ordering generation."""
    singular = set(singular_labels)
    pool = [l for l in registry.compound_labels if not (exclude_singular and l in singular)]
    return pool


def run_ordering_battery(
    basic_model: ModelState,
    teacher: TeacherSnapshot,
    train_ds: Dataset,
    test_ds: Dataset,
    cfg: PhaseConfig,
    seed: int,
    orderings_count: int,
    exclude_singular: bool = False,
    singular_labels=(),
    jobs: int = 1,
):
    """Run ``orderings_count`` randomized continual passes from one basic model."""
    pool = compound_ordering_pool(test_ds.registry, exclude_singular, singular_labels)
    orderings = make_orderings(pool, orderings_count, seed)
    args = [
        (basic_model, teacher, ordering, train_ds, test_ds, cfg, seed, j)
        for j, ordering in enumerate(orderings)
    ]
    if jobs > 1 and len(args) > 1:
        import concurrent.futures as cf

        with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
            logs = list(ex.map(_battery_worker, args))
    else:
        logs = [_battery_worker(a) for a in args]
    return logs


def _battery_worker(args):
    return run_continual(*args)


@dataclass
class FewshotResult:
    label: str
    shots: int
    new_class_accuracy: float
    all_class_accuracy: float
    train_steps: int
    best_epoch: int
    epochs_run: int


def run_fewshot(
    basic_model: ModelState,
    teacher: TeacherSnapshot,
    label: str,
    n_shots: int,
    train_ds: Dataset,
    test_ds: Dataset,
    cfg: PhaseConfig,
    seed: int,
    monitor: str = "new",
) -> FewshotResult:
    """Learn one compound class from ``n_shots`` samples, no replay memory.

    The model starts from a fresh copy of the basic model each time, so
    consecutive experiments are fully isolated. Early stopping follows the
    recorded single-class accuracy by default; with only a handful of
    training samples the all-class metric peaks before the new class is
    learned at all, so "all" is available but degenerate at small scale.
    """
    if n_shots < 1:
        raise ValueError("shot count must be >= 1")
    if label not in train_ds.registry or not train_ds.registry.is_compound(label):
        raise ValueError(f"{label!r} is not a registered compound class")
    model = basic_model.clone()
    apply_freezing(model, "few-shot")
    model = expand_head(model, label, substream(seed, "fewshot", label, "expand"))
    new_idx = model.registry.index_of(label)

    candidates = _to_model_space(
        train_ds.filter_labels([label]).samples, train_ds.registry, model.registry
    )
    if len(candidates) < n_shots:
        raise ValueError(f"class {label!r} has {len(candidates)} samples, need {n_shots}")
    pick = substream(seed, "fewshot", label, "shots").choice(len(candidates), n_shots, replace=False)
    shots = [candidates[i] for i in sorted(pick)]

    test_samples = _to_model_space(
        test_ds.filter_labels(list(basic_model.registry.labels) + [label]).samples,
        test_ds.registry,
        model.registry,
    )
    test_x, test_y = _stack(test_samples)

    model.params.reset_optimizer_state()
    gamma = cfg.gamma0 if cfg.distill else 0.0
    result = _train_phase(
        model, shots, test_x, test_y, cfg, cfg.lr_continual, seed,
        ("fewshot", label),
        teacher=teacher if cfg.distill else None,
        gamma=gamma,
        iteration=1,
        new_class_index=new_idx,
        monitor=monitor,
    )
    all_acc, preds = _evaluate(model, test_x, test_y)
    mask = test_y == new_idx
    new_acc = float(np.mean(preds[mask] == test_y[mask])) if mask.any() else float("nan")
    return FewshotResult(
        label, n_shots, new_acc, all_acc, result.steps_at_best, result.best_epoch, result.epochs_run
    )


def split_for_fold(dataset: Dataset, folds: FoldSplit, fold: int):
    """(train, test) datasets for one held-out fold."""
    return (
        dataset.filter_subjects(folds.train_subjects(fold)),
        dataset.filter_subjects(folds.test_subjects(fold)),
    )


def write_run_jsonl(path, log: RunLog):
    """One JSON object per line: a meta record, epoch records, step records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"type": "meta", "ordering_id": log.ordering_id, "ordering": log.ordering}) + "\n")
        for rec in log.epochs:
            f.write(json.dumps({"type": "epoch", **rec}, sort_keys=True) + "\n")
        for rec in log.steps:
            f.write(
                json.dumps(
                    {
                        "type": "step",
                        "step": rec.step,
                        "label": rec.label,
                        "truth": rec.truth.tolist(),
                        "pred": rec.pred.tolist(),
                        "new_mask": None if rec.new_mask is None else rec.new_mask.astype(int).tolist(),
                        "best_epoch": rec.best_epoch,
                        "train_steps": rec.train_steps,
                    }
                )
                + "\n"
            )


def read_run_jsonl(path) -> RunLog:
    log = RunLog(0, [])
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "meta":
                log.ordering_id = rec["ordering_id"]
                log.ordering = rec["ordering"]
            elif kind == "epoch":
                log.epochs.append(rec)
            elif kind == "step":
                log.steps.append(
                    StepRecord(
                        step=rec["step"],
                        truth=np.array(rec["truth"], dtype=np.int64),
                        pred=np.array(rec["pred"], dtype=np.int64),
                        new_mask=None if rec["new_mask"] is None else np.array(rec["new_mask"], dtype=bool),
                        label=rec["label"],
                        best_epoch=rec["best_epoch"],
                        train_steps=rec["train_steps"],
                    )
                )
    log.steps.sort(key=lambda r: r.step)
    return log
