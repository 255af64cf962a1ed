"""The round engine: local SGD loops, per-strategy selection and
aggregation, and full multi-round experiment runs.

Strategies
----------
* ``fedavg``         — plain local SGD, full gradient sums, Eq.-style average.
* ``bherd``          — greedy herding selection per client, 1/alpha-scaled step.
* ``grab``           — online balancing selection, step scaled by the realized
                       weighted selection fraction.
* ``fednova``        — step-count-normalized updates (optionally +BHerd).
* ``scaffold``       — control-variate-corrected local steps (optionally +BHerd).
* ``centralized``    — single-client SGD with reshuffling (N forced to 1).

A round is a strict barrier: client passes may run on worker threads, but
aggregation consumes their outputs in ascending client order, so results do
not depend on the thread count.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import models
from .config import ExperimentConfig
from .data import Dataset, DatasetShard, make_batches, partition, synth_dataset, load_mnist_idx
from .errors import AggregationError, ConfigError, RoundError
from .metrics import RoundRecord, selection_distance
from .numerics import rng_stream
from .selection import GradientBuffer, SelectionOutcome, grab_select, herding_order, select_all

DIVERGENCE_NORM = 1e8


@dataclass
class ClientState:
    index: int
    shard: DatasetShard
    p: float  # aggregation weight |D_i| / |D|
    control: np.ndarray | None = field(default=None, repr=False)  # SCAFFOLD c_i


@dataclass
class GlobalState:
    w: np.ndarray
    t: int = 0
    control: np.ndarray | None = field(default=None, repr=False)  # SCAFFOLD c


def local_round(
    w_t: np.ndarray,
    batches: list[tuple[np.ndarray, np.ndarray]],
    eta: float,
    lam: float = 0.0,
    correction: np.ndarray | None = None,
    retain: bool = False,
):
    """Run tau local SGD steps from w_t, storing each step's direction.

    Without a correction the stored directions are the raw batch gradients;
    with a SCAFFOLD correction c - c_i the corrected direction grad + c - c_i
    is both applied and stored.  Returns (directions (tau, d), final weights,
    max drift ||w_t - w^lambda||, trajectory or None).
    """
    if not batches:
        raise RoundError("no batches for local round")
    w = w_t.copy()
    directions = np.empty((len(batches), len(w_t)))
    traj = np.empty((len(batches), len(w_t))) if retain else None
    drift = 0.0
    for lam_idx, (features, y) in enumerate(batches):
        _, grad = models.svm_loss_grad(models.SvmModel(w=w, lam=lam), features, y)
        if correction is not None:
            grad = grad + correction
        directions[lam_idx] = grad
        w = w - eta * grad
        if retain:
            traj[lam_idx] = w
        drift = max(drift, float(np.linalg.norm(w - w_t)))
        if np.linalg.norm(w) > DIVERGENCE_NORM:
            raise RoundError(
                f"local weights diverged at step {lam_idx + 1}", step=lam_idx + 1
            )
    return directions, w, drift, traj


def _check_counts(name, per_client, n_clients):
    if len(per_client) != n_clients:
        raise AggregationError(
            f"{name}: got {len(per_client)} client outputs, expected {n_clients}"
        )


def aggregate_bherd(
    w_t: np.ndarray,
    outcomes: list[SelectionOutcome],
    ps: list[float],
    eta: float,
    alpha: float,
    epochs: float = 1.0,
) -> np.ndarray:
    """w - (eta*E/alpha) * sum_i p_i g_i."""
    _check_counts("aggregate_bherd", outcomes, len(ps))
    step = sum(p * out.g for p, out in zip(ps, outcomes))
    return w_t - (eta * epochs / alpha) * step


def aggregate_fedavg(
    w_t: np.ndarray, buffers: list[GradientBuffer], ps: list[float], eta: float
) -> np.ndarray:
    """w - eta * sum_i p_i * (full gradient sum of client i)."""
    _check_counts("aggregate_fedavg", buffers, len(ps))
    step = sum(p * select_all(buf).g for p, buf in zip(ps, buffers))
    return w_t - eta * step


def aggregate_grab(
    w_t: np.ndarray, outcomes: list[SelectionOutcome], ps: list[float], eta: float
) -> np.ndarray:
    """w - (eta/alpha_t) * sum_i p_i g_i with alpha_t = sum_i p_i alpha_i.

    A round where nothing was selected anywhere (alpha_t = 0) is skipped.
    """
    _check_counts("aggregate_grab", outcomes, len(ps))
    alpha_t = sum(p * out.effective_fraction for p, out in zip(ps, outcomes))
    if alpha_t == 0.0:
        return w_t.copy()
    step = sum(p * out.g for p, out in zip(ps, outcomes))
    return w_t - (eta / alpha_t) * step


def aggregate_fednova(
    w_t: np.ndarray,
    gs: list[np.ndarray],
    steps: list[int],
    ps: list[float],
    eta: float,
) -> np.ndarray:
    """Normalized averaging: w - eta * tau_eff * sum_i p_i g_i/steps_i."""
    _check_counts("aggregate_fednova", gs, len(ps))
    if any(s < 1 for s in steps):
        raise ConfigError(f"fednova step counts must be >= 1, got {steps}")
    tau_eff = sum(p * s for p, s in zip(ps, steps))
    normalized = sum(p * g / s for p, g, s in zip(ps, gs, steps))
    return w_t - eta * tau_eff * normalized


def scaffold_control_update(
    c: np.ndarray, c_i: np.ndarray, w_t: np.ndarray, w_final: np.ndarray, tau: int, eta: float
) -> np.ndarray:
    """Option-II client control variate: c_i - c + (w_t - w_final)/(tau*eta)."""
    return c_i - c + (w_t - w_final) / (tau * eta)


def build_dataset(cfg: ExperimentConfig, seed: int) -> tuple[Dataset, Dataset]:
    """(train, test) pair for the configured dataset."""
    if cfg.dataset == "mnist":
        import os

        train = load_mnist_idx(
            os.path.join(cfg.mnist_dir, "train-images-idx3-ubyte"),
            os.path.join(cfg.mnist_dir, "train-labels-idx1-ubyte"),
        )
        test = load_mnist_idx(
            os.path.join(cfg.mnist_dir, "t10k-images-idx3-ubyte"),
            os.path.join(cfg.mnist_dir, "t10k-labels-idx1-ubyte"),
        )
        return train, test
    per_class_test = max(cfg.synth_per_class // 6, 1)
    full = synth_dataset(
        cfg.synth_classes,
        cfg.synth_per_class + per_class_test,
        cfg.synth_features,
        cfg.synth_spread,
        seed,
    )
    n_train = cfg.synth_classes * cfg.synth_per_class
    train = Dataset(full.features[:n_train], full.labels[:n_train], full.n_classes)
    test = Dataset(full.features[n_train:], full.labels[n_train:], full.n_classes)
    return train, test


def _gather(ds: Dataset, y_signed: np.ndarray, batch_indices):
    return [(ds.features[idx], y_signed[idx]) for idx in batch_indices]


def _client_pass(client, ds, y_signed, w_t, cfg, seed, t, global_control):
    """Everything one client does inside a round; safe to run on a thread."""
    batch_indices = make_batches(client.shard, cfg.batch, cfg.epochs, cfg.rr, seed, t)
    batches = _gather(ds, y_signed, batch_indices)
    correction = None
    if global_control is not None:
        correction = global_control - client.control
    try:
        directions, w_final, drift, _ = local_round(
            w_t, batches, cfg.lr, cfg.lam, correction=correction
        )
    except RoundError as err:
        raise RoundError(str(err), round_index=t, client=client.index, step=err.step) from None
    buf = GradientBuffer(grads=directions)
    if cfg.strategy in ("bherd", "fednova-bherd", "scaffold-bherd"):
        outcome = herding_order(buf, cfg.alpha)
    elif cfg.strategy == "grab":
        outcome = grab_select(directions)
    else:
        outcome = select_all(buf)
    result = {
        "buffer": buf,
        "outcome": outcome,
        "w_final": w_final,
        "drift": drift,
        "tau": buf.tau,
    }
    if cfg.probes:
        frozen = np.empty_like(directions)
        for lam_idx, (features, y) in enumerate(batches):
            _, frozen[lam_idx] = models.svm_loss_grad(
                models.SvmModel(w=w_t, lam=cfg.lam), features, y
            )
        result["frozen_grads"] = frozen
    return result


def _aggregate(cfg: ExperimentConfig, w_t, results, ps):
    buffers = [r["buffer"] for r in results]
    outcomes = [r["outcome"] for r in results]
    if cfg.strategy == "bherd":
        return aggregate_bherd(w_t, outcomes, ps, cfg.lr, cfg.alpha, cfg.epochs)
    if cfg.strategy == "grab":
        return aggregate_grab(w_t, outcomes, ps, cfg.lr)
    if cfg.strategy == "fednova":
        return aggregate_fednova(
            w_t, [o.g for o in outcomes], [b.tau for b in buffers], ps, cfg.lr
        )
    if cfg.strategy == "fednova-bherd":
        return aggregate_fednova(
            w_t, [o.g for o in outcomes], [o.k for o in outcomes], ps, cfg.lr
        )
    if cfg.strategy == "scaffold-bherd":
        return aggregate_bherd(w_t, outcomes, ps, cfg.lr, cfg.alpha, cfg.epochs)
    # fedavg, scaffold, centralized: p_i-weighted full sums.  For SCAFFOLD the
    # buffers hold corrected directions, so this equals the p_i-weighted
    # average of the clients' final local parameters.
    return aggregate_fedavg(w_t, buffers, ps, cfg.lr)


def run_experiment(
    cfg: ExperimentConfig,
    seed: int | None = None,
    dataset: tuple[Dataset, Dataset] | None = None,
    weight_log: list | None = None,
) -> tuple[list[RoundRecord], np.ndarray]:
    """Execute T rounds and return (round records, final global weights).

    When ``weight_log`` is a list, the post-aggregation global weights of
    every round are appended to it (copies).
    """
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    train, test = dataset if dataset is not None else build_dataset(cfg, seed)
    effective = cfg
    if cfg.strategy == "centralized":
        effective = replace(cfg, rr=True)  # standard SGD + reshuffling protocol
    shards = partition(train, cfg.clients, cfg.case, seed)
    total = sum(len(s) for s in shards)
    scaffold = cfg.strategy in ("scaffold", "scaffold-bherd")
    d = train.feature_dim + 1
    clients = [
        ClientState(
            index=s.owner,
            shard=s,
            p=len(s) / total,
            control=np.zeros(d) if scaffold else None,
        )
        for s in shards
    ]
    state = GlobalState(w=np.zeros(d), control=np.zeros(d) if scaffold else None)
    y_train = models.parity_labels(train.labels)
    y_test = models.parity_labels(test.labels)
    ps = [c.p for c in clients]
    records: list[RoundRecord] = []
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for t in range(cfg.rounds):
            started = time.perf_counter()
            w_t = state.w

            def one(client):
                return _client_pass(
                    client, train, y_train, w_t, effective, seed, t, state.control
                )

            if pool is not None:
                results = list(pool.map(one, clients))
            else:
                results = [one(c) for c in clients]

            new_w = _aggregate(effective, w_t, results, ps)
            if np.linalg.norm(new_w) > DIVERGENCE_NORM:
                raise RoundError("global weights diverged", round_index=t)

            if scaffold:
                deltas = []
                for client, res in zip(clients, results):
                    new_ci = scaffold_control_update(
                        state.control, client.control, w_t, res["w_final"], res["tau"], cfg.lr
                    )
                    deltas.append(new_ci - client.control)
                    client.control = new_ci
                state.control = state.control + sum(deltas) / len(clients)

            state.w = new_w
            state.t = t + 1
            if weight_log is not None:
                weight_log.append(new_w.copy())

            model = models.SvmModel(w=new_w, lam=cfg.lam)
            distances = []
            for res in results:
                out = res["outcome"]
                if out.k:
                    distances.append(selection_distance(out, res["buffer"]))
                else:
                    distances.append(float("nan"))
            record = RoundRecord(
                t=t,
                global_loss=models.global_loss(model, train, [c.shard for c in clients]),
                test_accuracy=models.accuracy(model, test.features, y_test),
                distances=distances,
                selected_indices=[res["outcome"].order for res in results],
            )
            if cfg.probes:
                record.delta_t = max(res["drift"] for res in results)
                sigma2 = 0.0
                global_grad = np.zeros(d)
                for p, res in zip(ps, results):
                    frozen = res["frozen_grads"]
                    mean = frozen.mean(axis=0)
                    sigma2 = max(
                        sigma2, float(np.mean(np.sum((frozen - mean) ** 2, axis=1)))
                    )
                    global_grad += p * mean
                record.sigma2 = sigma2
                record.grad_norm_sq = float(global_grad @ global_grad)
            record.wall_time = time.perf_counter() - started
            records.append(record)
    finally:
        if pool is not None:
            pool.shutdown()
    return records, state.w
