"""Three-phase training pipeline.

Phase 1 pretrains a denoising autoencoder on the primary dataset with no
label information.  Phase 2 trains one deliberately under-fitted (biased)
autoencoder per evidence source on its one-hot values and freezes the
resulting bottleneck codes.  Phase 3 fine-tunes a copy of the primary
autoencoder on the evidenced samples, adding freshly initialised softmax
heads whose outputs are pulled towards the frozen codes by asymmetric
cross-entropy.  Consistent evidence reshapes the latent space; noisy
evidence yields near-uniform codes the heads can satisfy without touching
the encoder, which is what makes the step safe to apply blindly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .evidence import EvidenceError, EvidenceSource, apply_incompleteness, \
    make_source, one_hot
from .data import DatasetBundle
from .report import EvalReport
from .metrics import evaluate

# Evidence autoencoders must stay biased: their step budget is capped at
# this fraction of the pretraining step budget.
BIAS_RATIO_LIMIT = 0.05

DEFAULT_ARCH = (500, 500, 2000, 10)

# Stream ids for deriving independent, reproducible RNGs from one seed.
_S_INIT, _S_CORRUPT, _S_SHUFFLE, _S_EVGEN, _S_DROP, _S_EVAE, _S_HEAD, \
    _S_TRANSFER, _S_EVAL = range(9)


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _int_seed(*key) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


@dataclass
class TrainConfig:
    """Hyperparameters for all three phases.

    ``evidence_weight`` is the scalar mixing the cross-entropy term into the
    joint objective; reconstruction always has weight 1.
    """

    evidence_weight: float = 0.1
    corruption_rate: float = 0.2
    pretrain_epochs: int = 100
    evidence_ae_iters: int = 200
    transfer_epochs: int = 40
    batch_size: int = 256
    pretrain_lr: float = 1e-3
    evidence_lr: float = 1e-2
    transfer_lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0

    def validate(self) -> None:
        if self.evidence_weight < 0:
            raise ValueError("evidence_weight must be nonnegative")
        if not 0 <= self.corruption_rate < 1:
            raise ValueError("corruption_rate must be in [0, 1)")
        for name in ("pretrain_epochs", "evidence_ae_iters", "transfer_epochs",
                     "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("pretrain_lr", "evidence_lr", "transfer_lr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def pretrain_steps(self, n_samples: int) -> int:
        per_epoch = -(-n_samples // self.batch_size)
        return self.pretrain_epochs * per_epoch


@dataclass
class EvidenceCodes:
    """Frozen output of one biased evidence autoencoder."""

    model: nn.Network
    codes: np.ndarray          # M x code_dim, rows stochastic
    sample_indices: np.ndarray  # maps code rows to dataset positions


@dataclass
class TransferState:
    """Everything phase 3 consumes: the pretrained autoencoder, one frozen
    code block and one fresh softmax head per evidence source."""

    primary: nn.Network
    evidence_models: list[nn.Network]
    heads: list[nn.Network]
    codes: list[np.ndarray]
    code_indices: list[np.ndarray]

    def __post_init__(self):
        k = len(self.heads)
        if k == 0:
            raise ValueError("transfer needs at least one evidence source")
        if not len(self.evidence_models) == len(self.codes) == len(self.code_indices) == k:
            raise ValueError("per-source lists must have equal length")
        bottleneck = self.primary.layers[self.primary.bottleneck_index].out_size
        for i, head in enumerate(self.heads):
            if head.in_size != bottleneck:
                raise ValueError(
                    f"head {i} expects {head.in_size} inputs but the "
                    f"bottleneck is {bottleneck}-dimensional"
                )
        for i, (codes, idx) in enumerate(zip(self.codes, self.code_indices)):
            if codes.shape[0] != idx.shape[0]:
                raise ValueError(f"source {i}: code rows do not match index map")


@dataclass
class TransferResult:
    model: nn.Network
    heads: list[nn.Network]
    log: list[tuple[float, float, float]] = field(default_factory=list)
    """Per-batch (reconstruction, mean cross-entropy, total) loss values."""


# ---------------------------------------------------------------------------
# Model builders
# ---------------------------------------------------------------------------

def build_autoencoder(dims, seed: int, dtype=np.float32) -> nn.Network:
    """Symmetric autoencoder: ReLU hidden layers, linear bottleneck and
    linear reconstruction output, decoder mirroring the encoder."""
    dims = list(dims)
    if len(dims) < 2:
        raise ValueError("need at least input and bottleneck sizes")
    rng = _rng(seed, _S_INIT)
    layers = []
    for i in range(1, len(dims)):
        act = "linear" if i == len(dims) - 1 else "relu"
        layers.append(nn.DenseLayer.create(dims[i - 1], dims[i], act, rng, dtype))
    bottleneck_index = len(layers) - 1
    for i in range(len(dims) - 1, 0, -1):
        act = "linear" if i == 1 else "relu"
        layers.append(nn.DenseLayer.create(dims[i], dims[i - 1], act, rng, dtype))
    return nn.Network(layers, bottleneck_index)


def build_evidence_autoencoder(width: int, seed: int, code_dim: int | None = None,
                               dtype=np.float32) -> nn.Network:
    """Two softmax layers, the first being the bottleneck (code_dim defaults
    to the evidence width)."""
    code_dim = width if code_dim is None else code_dim
    rng = _rng(seed, _S_INIT)
    layers = [
        nn.DenseLayer.create(width, code_dim, "softmax", rng, dtype),
        nn.DenseLayer.create(code_dim, width, "softmax", rng, dtype),
    ]
    return nn.Network(layers, bottleneck_index=0)


def build_head(in_dim: int, out_dim: int, seed: int, dtype=np.float32) -> nn.Network:
    """Single softmax layer mapping the primary bottleneck to code space."""
    rng = _rng(seed, _S_HEAD)
    return nn.Network([nn.DenseLayer.create(in_dim, out_dim, "softmax", rng, dtype)],
                      bottleneck_index=0)


# ---------------------------------------------------------------------------
# Phase 1: denoising pretraining
# ---------------------------------------------------------------------------

def corrupt(batch: np.ndarray, rate: float, seed) -> np.ndarray:
    """Zero each entry independently with probability ``rate``.

    ``seed`` may be an int or a Generator; passing a Generator lets training
    loops draw a fresh pattern per batch from one reproducible stream.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"corruption rate must be in [0, 1), got {rate}")
    if rate == 0:
        return np.array(batch, copy=True)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    keep = rng.random(np.shape(batch)) >= rate
    return np.asarray(batch) * keep.astype(np.asarray(batch).dtype)


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, order.size, batch_size):
        yield order[start : start + batch_size]


def pretrain_primary(x: np.ndarray, dims, config: TrainConfig,
                     model: nn.Network | None = None) -> nn.Network:
    """Train a denoising autoencoder to reconstruct clean samples from
    corrupted ones.  Fully unsupervised; returns the trained model."""
    config.validate()
    x = np.asarray(x, dtype=np.float32)
    if x.size == 0:
        raise ValueError("empty dataset")
    if not np.isfinite(x).all():
        raise ValueError("dataset contains non-finite values")
    if model is None:
        model = build_autoencoder(dims, seed=_int_seed(config.seed, _S_INIT))
    if model.in_size != x.shape[1]:
        raise nn.ShapeError(
            f"model expects {model.in_size} features, data has {x.shape[1]}"
        )
    opt = nn.make_optimizer(config.optimizer, config.pretrain_lr)
    shuffle_rng = _rng(config.seed, _S_SHUFFLE)
    corrupt_rng = _rng(config.seed, _S_CORRUPT)
    for _ in range(config.pretrain_epochs):
        order = shuffle_rng.permutation(x.shape[0])
        for idx in _batches(order, config.batch_size):
            clean = x[idx]
            noisy = corrupt(clean, config.corruption_rate, corrupt_rng)
            _, grads = nn.loss_and_gradients(model, noisy, ("mse", clean))
            opt.step(model.parameters(), grads)
    return model


# ---------------------------------------------------------------------------
# Phase 2: biased evidence autoencoders
# ---------------------------------------------------------------------------

def train_evidence_ae(source: EvidenceSource, config: TrainConfig,
                      seed: int | None = None) -> EvidenceCodes:
    """Briefly train an autoencoder on the one-hot evidence and return its
    bottleneck codes for the available samples.

    The short step budget is deliberate: consistent evidence is learnable in
    few iterations while noisy evidence leaves the softmax bottleneck close
    to uniform, which downstream turns into a no-op transfer.
    """
    config.validate()
    if source.m == 0:
        raise EvidenceError("evidence source has no available samples")
    if seed is None:
        seed = _int_seed(config.seed, _S_EVAE)
    onehot, idx = one_hot(source)
    model = build_evidence_autoencoder(source.width, seed)
    opt = nn.make_optimizer(config.optimizer, config.evidence_lr)
    order_rng = _rng(seed, _S_SHUFFLE)
    batch_size = min(config.batch_size, onehot.shape[0])
    order = order_rng.permutation(onehot.shape[0])
    cursor = 0
    for _ in range(config.evidence_ae_iters):
        if cursor + batch_size > order.size:
            order = order_rng.permutation(onehot.shape[0])
            cursor = 0
        batch = onehot[order[cursor : cursor + batch_size]]
        cursor += batch_size
        _, grads = nn.loss_and_gradients(model, batch, ("mse", batch))
        opt.step(model.parameters(), grads)
    codes = model.encode(onehot)
    return EvidenceCodes(model, codes, idx)


def prepare_transfer(primary: nn.Network, sources: list[EvidenceSource],
                     config: TrainConfig,
                     source_seeds: list[int] | None = None) -> TransferState:
    """Run phase 2 for every source and attach one fresh head per source.

    Per-source seeds default to a derivation from ``config.seed`` by
    position; pass them explicitly to keep seed-source pairing under a
    reordering of the sources.
    """
    if not sources:
        raise ValueError("need at least one evidence source")
    if source_seeds is None:
        source_seeds = [_int_seed(config.seed, _S_EVAE, i) for i in range(len(sources))]
    if len(source_seeds) != len(sources):
        raise ValueError("one seed per source required")
    bottleneck_dim = primary.layers[primary.bottleneck_index].out_size
    models, heads, codes, indices = [], [], [], []
    for source, seed in zip(sources, source_seeds):
        trained = train_evidence_ae(source, config, seed)
        models.append(trained.model)
        codes.append(trained.codes)
        indices.append(trained.sample_indices)
        heads.append(build_head(bottleneck_dim, trained.codes.shape[1], seed))
    return TransferState(primary, models, heads, codes, indices)


# ---------------------------------------------------------------------------
# Phase 3: joint transfer
# ---------------------------------------------------------------------------

def evidence_transfer(x: np.ndarray, labeled_indices: np.ndarray,
                      state: TransferState, config: TrainConfig,
                      batch_hook=None) -> TransferResult:
    """Fine-tune a copy of the pretrained autoencoder on the evidenced
    samples under reconstruction plus weighted mean head cross-entropy.

    The frozen codes are fixed targets; no gradient reaches the evidence
    autoencoders.  All pretrained layers stay trainable alongside the new
    heads.  Inputs are left untouched: the returned model and heads are
    copies, so the baseline remains available for comparison.
    """
    config.validate()
    x = np.asarray(x, dtype=np.float32)
    labeled_indices = np.asarray(labeled_indices, dtype=np.int64)
    if labeled_indices.size == 0:
        raise ValueError("no evidenced samples to train on")
    if labeled_indices.min() < 0 or labeled_indices.max() >= x.shape[0]:
        raise IndexError("labeled index out of range")
    n = x.shape[0]
    k = len(state.heads)
    for idx in state.code_indices:
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError("evidence code index out of range")

    model = state.primary.copy()
    heads = [h.copy() for h in state.heads]
    bi = model.bottleneck_index
    weight = config.evidence_weight

    # rows_of[j][i] is the code row of sample i in source j, -1 if absent
    rows_of = []
    for idx in state.code_indices:
        lookup = np.full(n, -1, dtype=np.int64)
        lookup[idx] = np.arange(idx.size)
        rows_of.append(lookup)

    params = model.parameters()
    for head in heads:
        params = params + head.parameters()
    opt = nn.make_optimizer(config.optimizer, config.transfer_lr)
    shuffle_rng = _rng(config.seed, _S_TRANSFER)
    log: list[tuple[float, float, float]] = []
    step = 0
    for _ in range(config.transfer_epochs):
        order = labeled_indices[shuffle_rng.permutation(labeled_indices.size)]
        for batch_idx in _batches(order, config.batch_size):
            xb = x[batch_idx]
            acts = model.forward(xb)
            z = acts[bi]
            recon = acts[-1]
            mse_part = nn.mse_loss(xb, recon)
            g_recon = nn.mse_grad(xb, recon)
            dec_grads, g_z = nn.backprop(model.layers[bi + 1 :], z,
                                         acts[bi + 1 :], g_recon)
            ce_sum = 0.0
            head_grads: list[np.ndarray] = []
            for j, head in enumerate(heads):
                rows = rows_of[j][batch_idx]
                have = rows >= 0
                if not have.any():
                    head_grads += [np.zeros_like(p) for p in head.parameters()]
                    continue
                zj = z[have]
                hacts = head.forward(zj)
                predicted = hacts[-1]
                targets = state.codes[j][rows[have]]
                ce_sum += nn.cross_entropy(targets, predicted)
                g_pred = nn.cross_entropy_grad(targets, predicted) * (weight / k)
                hg, g_zj = nn.backprop(head.layers, zj, hacts,
                                       g_pred.astype(predicted.dtype))
                head_grads += hg
                g_z = g_z.copy() if g_z.base is not None else g_z
                g_z[have] += g_zj
            enc_grads, _ = nn.backprop(model.layers[: bi + 1], xb,
                                       acts[: bi + 1], g_z)
            ce_part = ce_sum / k
            total = mse_part + weight * ce_part
            opt.step(params, enc_grads + dec_grads + head_grads)
            log.append((mse_part, ce_part, total))
            if batch_hook is not None:
                batch_hook(step, model, batch_idx, (mse_part, ce_part, total))
            step += 1
    return TransferResult(model, heads, log)


# ---------------------------------------------------------------------------
# End-to-end experiment
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    report: EvalReport
    baseline: nn.Network
    transferred: nn.Network
    sources: list[EvidenceSource]


def _describe(spec: tuple) -> str:
    kind = spec[0]
    if kind in ("mod", "hash", "random"):
        return f"{kind}{spec[1]}"
    if kind == "superset":
        return "superset" + str(len(set(spec[1])))
    return kind


def config_label(evidence_specs, incompleteness, widths, reduced=None) -> str:
    """Human-readable row label in the result tables' house style."""
    gens = "+".join(_describe(s) for s in evidence_specs)
    w = ",".join(str(v) for v in widths)
    kind = incompleteness[0]
    if kind == "percent" and incompleteness[1] < 1:
        tail = f"w: {w}, M={incompleteness[1]:g} * N"
    elif kind == "classes":
        r = ",".join(str(v) for v in reduced)
        tail = f"w: {w} -> {r}"
    else:
        tail = f"w: {w}, M=N"
    return f"{gens} ({tail})"


def fingerprint(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def run_experiment(bundle: DatasetBundle, evidence_specs: list[tuple],
                   incompleteness: tuple, config: TrainConfig,
                   arch=DEFAULT_ARCH, eval_k: int | None = None,
                   eval_restarts: int = 10,
                   pretrained: nn.Network | None = None,
                   evidence_seeds: list[int] | None = None) -> ExperimentResult:
    """Pretrain (or reuse a checkpointed baseline), build evidence, transfer,
    and evaluate clustering before and after.

    Fully reproducible: every random stream derives from ``config.seed``.
    ``evidence_seeds`` overrides the derived per-source generation seeds,
    for protocols that sweep evidence draws against one trained baseline.
    """
    config.validate()
    if not evidence_specs:
        raise ValueError("need at least one evidence spec")
    steps = config.pretrain_steps(bundle.n)
    if config.evidence_ae_iters > BIAS_RATIO_LIMIT * steps:
        raise ValueError(
            f"evidence_ae_iters={config.evidence_ae_iters} exceeds "
            f"{BIAS_RATIO_LIMIT:g} x {steps} pretraining steps; the evidence "
            f"autoencoders would no longer be biased"
        )
    dims = [bundle.dim, *arch]
    k = bundle.n_classes if eval_k is None else eval_k
    eval_seed = _int_seed(config.seed, _S_EVAL)

    if pretrained is None:
        baseline = pretrain_primary(bundle.features, dims, config)
    else:
        baseline = pretrained.copy()
    base_acc, base_nmi = evaluate(baseline, bundle.features, bundle.labels,
                                  k, eval_seed, eval_restarts)

    if evidence_seeds is not None and len(evidence_seeds) != len(evidence_specs):
        raise ValueError("one evidence seed per spec required")
    sources = []
    for i, spec in enumerate(evidence_specs):
        gen_seed = (evidence_seeds[i] if evidence_seeds is not None
                    else _int_seed(config.seed, _S_EVGEN, i))
        src = make_source(bundle.labels, spec, seed=gen_seed)
        src = apply_incompleteness(src, incompleteness,
                                   seed=_int_seed(config.seed, _S_DROP, i))
        sources.append(src)
    labeled = np.flatnonzero(np.logical_or.reduce([s.mask for s in sources]))

    state = prepare_transfer(baseline, sources, config)
    result = evidence_transfer(bundle.features, labeled, state, config)
    post_acc, post_nmi = evaluate(result.model, bundle.features, bundle.labels,
                                  k, eval_seed, eval_restarts)

    widths = [s.width for s in sources]
    reduced = [int(np.unique(s.values[s.mask]).size) for s in sources]
    label = config_label(evidence_specs, incompleteness, widths, reduced)
    digest = fingerprint({
        "dataset": [bundle.name, bundle.n, bundle.dim],
        "arch": list(arch),
        "evidence": [list(map(str, s)) for s in evidence_specs],
        "evidence_seeds": (None if evidence_seeds is None
                           else [int(s) for s in evidence_seeds]),
        "incompleteness": list(map(str, incompleteness)),
        "train": {f: getattr(config, f) for f in (
            "evidence_weight", "corruption_rate", "pretrain_epochs",
            "evidence_ae_iters", "transfer_epochs", "batch_size",
            "pretrain_lr", "evidence_lr", "transfer_lr", "optimizer")},
        "eval": [k, eval_restarts],
    })
    report = EvalReport(
        label=label,
        baseline_acc=base_acc, baseline_nmi=base_nmi,
        post_acc=post_acc, post_nmi=post_nmi,
        acc_delta=post_acc - base_acc, nmi_delta=post_nmi - base_nmi,
        n_sources=len(sources), k=k, restarts=eval_restarts,
        seed=config.seed, fingerprint=digest,
    )
    return ExperimentResult(report, baseline, result.model, sources)
