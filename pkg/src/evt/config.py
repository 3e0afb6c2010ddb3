"""INI experiment configuration.

One file describes a full run: dataset, architecture, training budgets,
evidence sources, incompleteness protocol, evaluation and outputs.  Unknown
sections or keys are rejected by name so typos fail loudly instead of
silently falling back to defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .data import DatasetBundle, bundled_digits, load_evidence, load_idx, \
    load_matrix, simplex_centers, synthetic_gaussians
from .pipeline import DEFAULT_ARCH, TrainConfig


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "dataset": {"kind", "images", "labels", "features", "clusters",
                "per_cluster", "dim", "distance", "sigma", "seed", "limit",
                "name"},
    "arch": {"hidden", "bottleneck"},
    "train": {"lambda", "corruption", "pretrain_epochs", "evidence_iters",
              "transfer_epochs", "batch_size", "pretrain_lr", "evidence_lr",
              "transfer_lr", "optimizer", "seed"},
    "evidence": {"sources"},
    "incompleteness": {"mode", "percent", "remove"},
    "eval": {"k", "restarts"},
    "output": {"csv", "table", "checkpoint"},
}

_DATASET_KINDS = ("digits", "synthetic", "idx", "evtmat")


def parse_evidence_spec(text: str) -> tuple:
    """One evidence source from its compact form.

    ``mod:3`` ``hash:4`` ``labels`` ``random:5`` ``superset:0,0,1,1,2``
    where the superset list maps class c to its group.
    """
    head, _, rest = text.strip().partition(":")
    if head == "labels":
        if rest:
            raise ConfigError(f"'labels' takes no argument, got {text!r}")
        return ("labels",)
    if head in ("mod", "hash", "random"):
        try:
            k = int(rest)
        except ValueError:
            raise ConfigError(f"{head} needs an integer width, got {text!r}") from None
        if k < 2:
            raise ConfigError(f"{head} width must be at least 2, got {k}")
        return (head, k)
    if head == "superset":
        try:
            groups = tuple(int(v) for v in rest.split(","))
        except ValueError:
            raise ConfigError(f"superset needs a comma list of groups, got {text!r}") from None
        if not groups:
            raise ConfigError("superset grouping is empty")
        return ("superset", groups)
    raise ConfigError(f"unknown evidence source {text!r}")


def parse_evidence_list(text: str) -> list[tuple]:
    parts = text.replace(",", " ").split() if ":" not in text else text.split()
    return [parse_evidence_spec(p) for p in parts if p]


@dataclass
class ExperimentConfig:
    dataset: dict
    arch: tuple
    train: TrainConfig
    evidence: list = field(default_factory=list)
    incompleteness: tuple = ("none",)
    eval_k: int | None = None
    eval_restarts: int = 10
    outputs: dict = field(default_factory=dict)
    raw_text: str = ""


def _get(cfg, section, key, cast, default):
    if not cfg.has_option(section, key):
        return default
    raw = cfg.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r}: expected {cast.__name__}") from None


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def parse_config(text: str) -> ExperimentConfig:
    cfg = configparser.ConfigParser()
    try:
        cfg.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    for section in cfg.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cfg.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")

    if not cfg.has_section("dataset"):
        raise ConfigError("missing [dataset] section")
    kind = cfg.get("dataset", "kind", fallback=None)
    if kind not in _DATASET_KINDS:
        raise ConfigError(f"[dataset] kind must be one of {_DATASET_KINDS}, got {kind!r}")
    dataset = {"kind": kind}
    if kind == "idx":
        for key in ("images", "labels"):
            if not cfg.has_option("dataset", key):
                raise ConfigError(f"[dataset] kind=idx requires {key!r}")
            dataset[key] = cfg.get("dataset", key)
    elif kind == "evtmat":
        for key in ("features", "labels"):
            if not cfg.has_option("dataset", key):
                raise ConfigError(f"[dataset] kind=evtmat requires {key!r}")
            dataset[key] = cfg.get("dataset", key)
    elif kind == "synthetic":
        dataset["clusters"] = _get(cfg, "dataset", "clusters", int, 3)
        dataset["per_cluster"] = _get(cfg, "dataset", "per_cluster", int, 200)
        dataset["dim"] = _get(cfg, "dataset", "dim", int, 8)
        dataset["distance"] = _get(cfg, "dataset", "distance", float, 6.0)
        dataset["sigma"] = _get(cfg, "dataset", "sigma", float, 1.0)
        dataset["seed"] = _get(cfg, "dataset", "seed", int, 0)
    dataset["limit"] = _get(cfg, "dataset", "limit", int, 0)
    dataset["name"] = cfg.get("dataset", "name", fallback=kind)

    hidden = _get(cfg, "arch", "hidden", _int_list, DEFAULT_ARCH[:-1])
    bottleneck = _get(cfg, "arch", "bottleneck", int, DEFAULT_ARCH[-1])
    arch = (*hidden, bottleneck)

    train = TrainConfig(
        evidence_weight=_get(cfg, "train", "lambda", float, 0.1),
        corruption_rate=_get(cfg, "train", "corruption", float, 0.2),
        pretrain_epochs=_get(cfg, "train", "pretrain_epochs", int, 100),
        evidence_ae_iters=_get(cfg, "train", "evidence_iters", int, 200),
        transfer_epochs=_get(cfg, "train", "transfer_epochs", int, 40),
        batch_size=_get(cfg, "train", "batch_size", int, 256),
        pretrain_lr=_get(cfg, "train", "pretrain_lr", float, 1e-3),
        evidence_lr=_get(cfg, "train", "evidence_lr", float, 1e-2),
        transfer_lr=_get(cfg, "train", "transfer_lr", float, 1e-3),
        optimizer=_get(cfg, "train", "optimizer", str, "adam"),
        seed=_get(cfg, "train", "seed", int, 0),
    )
    try:
        train.validate()
    except ValueError as exc:
        raise ConfigError(f"[train] {exc}") from None

    evidence = []
    if cfg.has_option("evidence", "sources"):
        evidence = parse_evidence_list(cfg.get("evidence", "sources"))

    mode = _get(cfg, "incompleteness", "mode", str, "none")
    if mode == "none":
        incompleteness = ("none",)
    elif mode == "percent":
        p = _get(cfg, "incompleteness", "percent", float, 1.0)
        if not 0 < p <= 1:
            raise ConfigError(f"[incompleteness] percent must be in (0, 1], got {p}")
        incompleteness = ("percent", p)
    elif mode == "classes":
        if not cfg.has_option("incompleteness", "remove"):
            raise ConfigError("[incompleteness] mode=classes requires 'remove'")
        incompleteness = ("classes", _int_list(cfg.get("incompleteness", "remove")))
    else:
        raise ConfigError(f"[incompleteness] unknown mode {mode!r}")

    eval_k = _get(cfg, "eval", "k", int, 0) or None
    eval_restarts = _get(cfg, "eval", "restarts", int, 10)
    if eval_restarts < 1:
        raise ConfigError("[eval] restarts must be positive")

    outputs = {key: cfg.get("output", key)
               for key in ("csv", "table", "checkpoint")
               if cfg.has_option("output", key)}

    return ExperimentConfig(dataset, arch, train, evidence, incompleteness,
                            eval_k, eval_restarts, outputs, text)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def load_dataset(spec: dict) -> DatasetBundle:
    kind = spec["kind"]
    if kind == "digits":
        bundle = bundled_digits()
    elif kind == "synthetic":
        centers = simplex_centers(spec["clusters"], spec["dim"],
                                  spec["distance"] * spec["sigma"])
        bundle = synthetic_gaussians(spec["per_cluster"], centers,
                                     spec["sigma"], spec["seed"])
    elif kind == "idx":
        bundle = load_idx(spec["images"], spec["labels"])
    elif kind == "evtmat":
        features = load_matrix(spec["features"])
        source = load_evidence(spec["labels"])
        if not source.mask.all():
            raise ConfigError("evtmat label file has missing entries")
        bundle = DatasetBundle(features, source.values.astype(np.int64),
                               spec["name"], spec["features"])
    else:  # unreachable after parse_config
        raise ConfigError(f"unknown dataset kind {kind!r}")
    if spec.get("limit"):
        bundle = bundle.subset(np.arange(min(spec["limit"], bundle.n)))
    if spec.get("name"):
        bundle.name = spec["name"]
    return bundle
