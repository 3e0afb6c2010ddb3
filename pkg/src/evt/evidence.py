"""External categorical evidence: construction and incompleteness protocols.

An evidence source is a categorical variable observed for some subset of the
primary dataset's samples.  Generators derive sources from a label vector
(modular arithmetic, a fixed hash, label supersets, the labelset itself, or
uniform noise); two operators then simulate incompleteness by uniformly
dropping samples or removing whole evidence classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MISSING = -1


class EvidenceError(ValueError):
    """Invalid evidence construction or manipulation."""


@dataclass
class EvidenceSource:
    """One categorical auxiliary variable over N samples.

    ``values[i]`` is in [0, width) wherever ``mask[i]`` is true and the
    MISSING sentinel everywhere else.  All statistics downstream filter by
    the mask, never by sentinel comparison.
    """

    values: np.ndarray
    width: int
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.ndim != 1 or self.values.shape != self.mask.shape:
            raise EvidenceError("values and mask must be equal-length vectors")
        if self.width < 2:
            raise EvidenceError(f"evidence width must be at least 2, got {self.width}")
        on = self.values[self.mask]
        if on.size and (on.min() < 0 or on.max() >= self.width):
            raise EvidenceError("masked-in value outside [0, width)")
        if not np.all(self.values[~self.mask] == MISSING):
            raise EvidenceError("masked-out entries must hold the MISSING sentinel")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        """Number of samples with available evidence."""
        return int(self.mask.sum())

    def available_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def observed_classes(self) -> np.ndarray:
        return np.unique(self.values[self.mask])

    def copy(self) -> "EvidenceSource":
        return EvidenceSource(self.values.copy(), self.width, self.mask.copy())


@dataclass
class EvidenceSet:
    """Ordered collection of evidence sources over the same samples."""

    sources: list[EvidenceSource]

    def __post_init__(self):
        if not self.sources:
            raise EvidenceError("evidence set needs at least one source")
        n = self.sources[0].n
        if any(s.n != n for s in self.sources):
            raise EvidenceError("all sources must cover the same sample count")

    def __len__(self) -> int:
        return len(self.sources)

    def __iter__(self):
        return iter(self.sources)

    def __getitem__(self, i: int) -> EvidenceSource:
        return self.sources[i]


def _full(values: np.ndarray, width: int) -> EvidenceSource:
    return EvidenceSource(values, width, np.ones(len(values), dtype=bool))


def _check_labels(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise EvidenceError("labels must be a nonempty vector")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0:
        raise EvidenceError("labels must be nonnegative integers")
    return labels.astype(np.int64)


def mod_evidence(labels, k: int) -> EvidenceSource:
    """Evidence value = label mod k, available for every sample."""
    labels = _check_labels(labels)
    if k < 2:
        raise EvidenceError(f"modulus must be at least 2, got {k}")
    return _full(labels % k, k)


def fnv1a(text: str) -> int:
    """32-bit FNV-1a hash; fixed across runs and platforms."""
    h = 0x811C9DC5
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def hash_mod_evidence(labels, k: int) -> EvidenceSource:
    """Evidence value = fnv1a(decimal label) mod k, available everywhere."""
    labels = _check_labels(labels)
    if k < 2:
        raise EvidenceError(f"modulus must be at least 2, got {k}")
    distinct = np.unique(labels)
    table = {int(v): fnv1a(str(int(v))) % k for v in distinct}
    values = np.array([table[int(v)] for v in labels], dtype=np.int64)
    return _full(values, k)


def superset_evidence(labels, grouping: dict) -> EvidenceSource:
    """Regroup classes into coarser categories via ``grouping[class] = group``.

    Groups must be numbered 0..G-1; the evidence width is G.
    """
    labels = _check_labels(labels)
    observed = np.unique(labels)
    for c in observed:
        if int(c) not in grouping:
            raise EvidenceError(f"class {int(c)} missing from grouping")
    groups = sorted(set(grouping.values()))
    if groups != list(range(len(groups))):
        raise EvidenceError("groups must be numbered 0..G-1 without gaps")
    if len(groups) < 2:
        raise EvidenceError("grouping must produce at least 2 groups")
    values = np.array([grouping[int(v)] for v in labels], dtype=np.int64)
    return _full(values, len(groups))


def labelset_evidence(labels) -> EvidenceSource:
    """The label vector itself as evidence (width = max label + 1)."""
    labels = _check_labels(labels)
    width = int(labels.max()) + 1
    if width < 2:
        raise EvidenceError("labelset evidence needs at least 2 classes")
    return _full(labels.copy(), width)


def random_evidence(n: int, width: int, seed: int) -> EvidenceSource:
    """Uniformly random categorical values; the white-noise control source."""
    if width < 2:
        raise EvidenceError(f"evidence width must be at least 2, got {width}")
    rng = np.random.default_rng(seed)
    return _full(rng.integers(0, width, size=n), width)


def one_hot(source: EvidenceSource) -> tuple[np.ndarray, np.ndarray]:
    """One-hot rows for the available samples only.

    Returns (matrix of shape M x width, index map back into the original
    sample positions).
    """
    idx = source.available_indices()
    values = source.values[idx]
    out = np.zeros((idx.size, source.width), dtype=np.float32)
    out[np.arange(idx.size), values] = 1.0
    return out, idx


# ---------------------------------------------------------------------------
# Incompleteness protocols
# ---------------------------------------------------------------------------

# Below this many kept samples per class the coverage re-draw is skipped:
# tiny draws cannot be expected to hit every class.
_COVERAGE_FACTOR = 10
_REDRAW_LIMIT = 100


def drop_percent(source: EvidenceSource, keep_fraction: float,
                 seed: int) -> EvidenceSource:
    """Keep a uniformly random fraction of the evidence samples.

    Exactly round(keep_fraction * N) samples stay available.  When the kept
    count is at least 10x the width the draw is retried (up to 100 times)
    until every evidence class is still represented.
    """
    if not 0 < keep_fraction <= 1:
        raise EvidenceError(f"keep fraction must be in (0, 1], got {keep_fraction}")
    if not source.mask.all():
        raise EvidenceError("percent incompleteness applies to fully available evidence")
    n = source.n
    m = int(round(keep_fraction * n))
    if m == n:
        return source.copy()
    rng = np.random.default_rng(seed)
    want_coverage = m >= _COVERAGE_FACTOR * source.width
    classes = source.observed_classes()
    for _ in range(_REDRAW_LIMIT):
        keep = rng.choice(n, size=m, replace=False)
        if not want_coverage or len(np.unique(source.values[keep])) == len(classes):
            break
    else:
        raise EvidenceError(
            f"could not draw {m} samples covering all {len(classes)} classes"
        )
    mask = np.zeros(n, dtype=bool)
    mask[keep] = True
    values = np.where(mask, source.values, MISSING)
    return EvidenceSource(values, source.width, mask)


def drop_classes(source: EvidenceSource, removed: set) -> EvidenceSource:
    """Remove every sample of the given evidence classes.

    The declared width is unchanged; the removed classes simply never occur,
    so downstream one-hot encodings keep their shape.
    """
    removed = {int(c) for c in removed}
    observed = set(int(c) for c in source.observed_classes())
    unknown = removed - observed
    if unknown:
        raise EvidenceError(f"classes {sorted(unknown)} not present in evidence")
    if removed == observed:
        raise EvidenceError("cannot remove every evidence class")
    if not removed:
        return source.copy()
    hit = np.isin(source.values, sorted(removed)) & source.mask
    mask = source.mask & ~hit
    values = np.where(mask, source.values, MISSING)
    return EvidenceSource(values, source.width, mask)


# ---------------------------------------------------------------------------
# Spec-driven construction (used by the experiment runner and CLI)
# ---------------------------------------------------------------------------

def make_source(labels, spec: tuple, seed: int = 0) -> EvidenceSource:
    """Build a source from a (kind, *params) tuple.

    Kinds: ("mod", k), ("hash", k), ("labels",), ("superset", groups) with
    groups a per-class tuple, ("random", width).
    """
    kind = spec[0]
    if kind == "mod":
        return mod_evidence(labels, spec[1])
    if kind == "hash":
        return hash_mod_evidence(labels, spec[1])
    if kind == "labels":
        return labelset_evidence(labels)
    if kind == "superset":
        grouping = {cls: grp for cls, grp in enumerate(spec[1])}
        return superset_evidence(labels, grouping)
    if kind == "random":
        return random_evidence(len(labels), spec[1], seed)
    raise EvidenceError(f"unknown evidence generator {kind!r}")


def apply_incompleteness(source: EvidenceSource, spec: tuple,
                         seed: int = 0) -> EvidenceSource:
    """Apply ("none",), ("percent", p) or ("classes", ids) to a source."""
    kind = spec[0]
    if kind == "none":
        return source.copy()
    if kind == "percent":
        return drop_percent(source, spec[1], seed)
    if kind == "classes":
        return drop_classes(source, set(spec[1]))
    raise EvidenceError(f"unknown incompleteness kind {kind!r}")
