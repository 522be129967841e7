"""SGD-with-momentum optimization, siamese pair training, and the 4-stage
hybrid schedule.

The hybrid schedule trades an intractable sweep over all training pairs for:

  1. tiny-scale: siamese training with the triangular loss on the exhaustive
     pairs of a few samples per class, until the layout converges;
  2. transplanting: the per-class mean embeddings of those samples become
     target vectors, and the learned parameters seed a single-track network;
  3. large-scale: ordinary MSE training of the single-track network against
     the per-class targets over the full training set;
  4. length normalization at inference time (see trisim.manifold), which
     projects the outputs onto the unit hypersphere.
"""

import time
from contextlib import nullcontext
from dataclasses import dataclass, field, fields
from typing import NamedTuple

import numpy as np

from . import model
from .data import NUM_CLASSES, Dataset, select_subset
from .losses import triangular_loss_batch


def reduction_context(deterministic):
    """Fixed-order gradient reductions: pin the BLAS pool to one thread so
    every sum happens in a reproducible order (also the faster setting on
    small matrices)."""
    if not deterministic:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=1)


@dataclass
class TrainConfig:
    """Optimizer and schedule knobs. Defaults follow the solver configuration
    the network architecture is taken from; r is the soft length constraint
    of the triangular loss."""

    r: float = 1.0
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    lr_gamma: float = 1e-4        # inverse decay: lr * (1 + gamma*t) ** -power
    lr_power: float = 0.75
    seed: int = 0
    samples_per_class: int = 2
    tiny_epochs: int = 2000
    tiny_early_stop: float = 1e-6
    large_iters: int = 10000
    deterministic_reduction: bool = True

    def validate(self):
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.samples_per_class < 2:
            raise ValueError("need at least 2 samples per class to form "
                             "similar pairs")
        return self

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


class TrainingPair(NamedTuple):
    i: int
    j: int
    s: int  # +1 similar, -1 dissimilar


@dataclass
class RunLog:
    """Per-iteration losses, degenerate-pair counter, stage timings, metrics."""

    records: list = field(default_factory=list)   # (stage, iteration, loss, elapsed)
    skipped_pairs: int = 0
    stage_seconds: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def add(self, stage, iteration, loss, elapsed):
        self.records.append((stage, int(iteration), float(loss), float(elapsed)))

    def losses(self, stage=None):
        return [r[2] for r in self.records if stage is None or r[0] == stage]

    def to_lines(self):
        """Line-delimited records for plotting: stage,iteration,loss,seconds."""
        lines = ["stage,iteration,loss,seconds"]
        for stage, it, loss, elapsed in self.records:
            lines.append(f"{stage},{it},{loss:.9g},{elapsed:.3f}")
        return lines

    def save(self, path):
        with open(path, "w") as f:
            f.write("\n".join(self.to_lines()) + "\n")


def learning_rate(config, iteration):
    return config.lr * (1.0 + config.lr_gamma * iteration) ** (-config.lr_power)


def sgd_step(net, grads, config, iteration):
    """One momentum step: v <- mu v - lr(t) (grad + wd * param); param += v."""
    lr = learning_rate(config, iteration)
    for i, p in enumerate(net.weights):
        if p is None:
            continue
        for name in ("w", "b"):
            g = grads[i][name] + config.weight_decay * p[name]
            v = net.momenta[i][name]
            v *= config.momentum
            v -= (lr * g).astype(net.dtype, copy=False)
            p[name] += v
    return net


def exhaustive_pair_count(n: int) -> int:
    """Number of unordered pairs over n samples: n(n-1)/2."""
    return n * (n - 1) // 2


def generate_pairs(labels, policy="exhaustive"):
    """All unordered index pairs with similarity flags.

    policy: "exhaustive" keeps every pair, "similar"/"dissimilar" keep only
    one kind and raise if the labels cannot produce it.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples to form pairs")
    pairs = []
    for i in range(n - 1):
        same = labels[i + 1:] == labels[i]
        for off, is_same in enumerate(same):
            pairs.append(TrainingPair(i, i + 1 + off, 1 if is_same else -1))
    if policy == "exhaustive":
        return pairs
    if policy == "similar":
        kept = [p for p in pairs if p.s == 1]
    elif policy == "dissimilar":
        kept = [p for p in pairs if p.s == -1]
    else:
        raise ValueError(f"unknown pair policy {policy!r}")
    if not kept:
        raise ValueError(f"policy {policy!r} is unsatisfiable for these labels")
    return kept


def sample_pairs(labels, count, rng):
    """Uniformly sampled pairs (with replacement) for streamed siamese runs
    where the exhaustive pair set would be intractable."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    ii = rng.integers(0, n, size=count)
    jj = rng.integers(0, n - 1, size=count)
    jj = np.where(jj >= ii, jj + 1, jj)  # j != i, uniform over the rest
    ss = np.where(labels[ii] == labels[jj], 1, -1)
    return [TrainingPair(int(i), int(j), int(s)) for i, j, s in zip(ii, jj, ss)]


def _smoothed(values, window=100):
    tail = values[-window:]
    return sum(tail) / len(tail)


def _siamese_batch_step(net, images, ia, ib, ss, config, t, log, stage, elapsed):
    """Forward both branches through the shared parameters, apply the
    triangular loss, backpropagate the summed gradient, and step. Returns the
    batch loss or None when every pair in the batch was degenerate."""
    nb = ia.shape[0]
    x = np.concatenate([images[ia], images[ib]])
    emb, trace = model.forward_batch(net, x)
    costs, ga, gb, degenerate = triangular_loss_batch(
        emb[:nb], emb[nb:], ss, config.r)
    n_valid = nb - int(degenerate.sum())
    log.skipped_pairs += int(degenerate.sum())
    if n_valid == 0:
        return None
    loss = float(costs.sum()) / n_valid
    if not np.isfinite(loss):
        raise RuntimeError(f"non-finite loss at iteration {t}")
    gout = np.concatenate([ga, gb]) / n_valid
    grads = model.backward_batch(net, trace, gout)
    sgd_step(net, grads, config, t)
    log.add(stage, t, loss, elapsed())
    return loss


def train_siamese(net, images, pairs, config, epochs=None, stage="tiny",
                  log=None, callback=None, callback_every=0):
    """Siamese training with the triangular loss over a fixed pair list.

    Both branches run through the one shared parameter store; the two gradient
    branches are summed before the optimizer step. Degenerate pairs (embedding
    pair summing to zero) are skipped and counted. Stops after ``epochs``
    sweeps, when the smoothed loss stops moving, or when ``callback`` (called
    every ``callback_every`` iterations with (iteration, net)) returns True.
    """
    config.validate()
    if log is None:
        log = RunLog()
    if epochs is None:
        epochs = config.tiny_epochs
    images = np.asarray(images)
    rng = np.random.default_rng(config.seed + 1)
    params_store = net.weights  # single parameter store shared by both branches
    t = 0
    start = time.perf_counter()
    cb_seconds = 0.0
    elapsed = lambda: time.perf_counter() - start - cb_seconds
    prev_smoothed = None
    stop = False
    with reduction_context(config.deterministic_reduction):
        for epoch in range(epochs):
            order = rng.permutation(len(pairs))
            for lo in range(0, len(order), config.batch_size):
                batch = [pairs[k] for k in order[lo:lo + config.batch_size]]
                nb = len(batch)
                ia = np.fromiter((p.i for p in batch), dtype=np.int64, count=nb)
                ib = np.fromiter((p.j for p in batch), dtype=np.int64, count=nb)
                ss = np.fromiter((p.s for p in batch), dtype=np.float64, count=nb)
                assert net.weights is params_store, \
                    "siamese branches must share parameters"
                if _siamese_batch_step(net, images, ia, ib, ss, config, t, log,
                                       stage, elapsed) is None:
                    continue
                t += 1
                if callback is not None and callback_every and t % callback_every == 0:
                    cb0 = time.perf_counter()
                    stop = bool(callback(t, net))
                    cb_seconds += time.perf_counter() - cb0
                    if stop:
                        break
            if stop:
                break
            losses = log.losses(stage)
            if len(losses) >= 200:
                smoothed = _smoothed(losses)
                if prev_smoothed is not None and \
                        abs(prev_smoothed - smoothed) < config.tiny_early_stop:
                    break
                prev_smoothed = smoothed
    return net, log


def train_siamese_stream(net, images, labels, config, iters, stage="siamese",
                         log=None, callback=None, callback_every=0):
    """Siamese training on uniformly sampled pairs, for runs where the
    exhaustive pair set is intractable (direct large-scale pair training).
    ``callback`` time is excluded from the recorded elapsed seconds."""
    config.validate()
    if log is None:
        log = RunLog()
    images = np.asarray(images)
    labels = np.asarray(labels)
    rng = np.random.default_rng(config.seed + 3)
    n = labels.shape[0]
    start = time.perf_counter()
    cb_seconds = 0.0
    elapsed = lambda: time.perf_counter() - start - cb_seconds
    with reduction_context(config.deterministic_reduction):
        for t in range(iters):
            ia = rng.integers(0, n, size=config.batch_size)
            ib = rng.integers(0, n - 1, size=config.batch_size)
            ib = np.where(ib >= ia, ib + 1, ib)
            ss = np.where(labels[ia] == labels[ib], 1.0, -1.0)
            _siamese_batch_step(net, images, ia, ib, ss, config, t, log, stage,
                                elapsed)
            if callback is not None and callback_every and (t + 1) % callback_every == 0:
                cb0 = time.perf_counter()
                stop = bool(callback(t + 1, net))
                cb_seconds += time.perf_counter() - cb0
                if stop:
                    break
    return net, log


def compute_class_centers(net, images, labels):
    """Per-class mean embedding; every class must be represented."""
    labels = np.asarray(labels)
    emb = model.embed_dataset(net, np.asarray(images))
    centers = np.empty((NUM_CLASSES, net.out_dim), dtype=np.float64)
    for cls in range(NUM_CLASSES):
        mask = labels == cls
        if not mask.any():
            raise ValueError(f"class {cls} has no samples; cannot place a center")
        centers[cls] = emb[mask].mean(axis=0)
    return centers


def train_supervised(net, images, targets, config, iters=None, stage="large",
                     log=None, callback=None, callback_every=0):
    """Single-track MSE training toward fixed per-sample target vectors."""
    config.validate()
    if log is None:
        log = RunLog()
    if iters is None:
        iters = config.large_iters
    images = np.asarray(images)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (images.shape[0], net.out_dim):
        raise ValueError(f"targets must be ({images.shape[0]}, {net.out_dim})")
    rng = np.random.default_rng(config.seed + 2)
    n = images.shape[0]
    order = rng.permutation(n)
    pos = 0
    start = time.perf_counter()
    cb_seconds = 0.0
    with reduction_context(config.deterministic_reduction):
        for t in range(iters):
            if pos + config.batch_size > n:
                order = rng.permutation(n)
                pos = 0
            idx = order[pos:pos + config.batch_size]
            pos += config.batch_size
            emb, trace = model.forward_batch(net, images[idx])
            diff = emb - targets[idx]
            loss = 0.5 * float(np.einsum("ij,ij->", diff, diff)) / idx.size
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss at iteration {t}")
            grads = model.backward_batch(net, trace, diff / idx.size)
            sgd_step(net, grads, config, t)
            log.add(stage, t, loss, time.perf_counter() - start - cb_seconds)
            if callback is not None and callback_every and (t + 1) % callback_every == 0:
                cb0 = time.perf_counter()
                stop = bool(callback(t + 1, net))
                cb_seconds += time.perf_counter() - cb0
                if stop:
                    break
    return net, log


def hybrid_train(dataset: Dataset, config, d, tiny_epochs=None, large_iters=None,
                 dtype=np.float32):
    """The 4-stage schedule. Returns (net, class_centers, RunLog).

    Stage 4 (length normalization) is applied at inference time by the caller
    via trisim.manifold.length_normalize; this function records timings for
    the three training-side stages. The trained pipeline runs in 32-bit by
    default (the checkpoint payload precision); pass float64 for oracle work.
    """
    config.validate()
    present = np.unique(dataset.labels)
    if present.size < NUM_CLASSES:
        raise ValueError(f"dataset covers {present.size} classes, need {NUM_CLASSES}")
    log = RunLog()

    t0 = time.perf_counter()
    tiny = select_subset(dataset, per_class=config.samples_per_class,
                         seed=config.seed)
    pairs = generate_pairs(tiny.labels)
    net = model.build_network(d, seed=config.seed, dtype=dtype)
    train_siamese(net, tiny.images, pairs, config, epochs=tiny_epochs,
                  stage="tiny", log=log)
    log.stage_seconds["tiny"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    centers = compute_class_centers(net, tiny.images, tiny.labels)
    log.stage_seconds["transplant"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    targets = centers[dataset.labels]
    train_supervised(net, dataset.images, targets, config, iters=large_iters,
                     stage="large", log=log)
    log.stage_seconds["large"] = time.perf_counter() - t0
    return net, centers, log
