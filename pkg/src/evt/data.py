"""Dataset loading and bit-exact persistence.

Readers and writers for the formats the package speaks:

* IDX           big-endian MNIST container (magic 0x803 images / 0x801 labels)
* EVT-MAT       "EVTM" + u32le rows + u32le cols + float32le row-major values
* EVT-CAT       "EVTC" + u32le N + u32le width + N value bytes (0xFF missing)
                + N mask bytes
* checkpoint    "EVTK" + u32le version + topology + raw parameters

plus synthetic Gaussian bundles and the bundled handwritten-digits set used
for desk-scale experiments.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evidence import MISSING, EvidenceSource
from .nn import ACTIVATIONS, DenseLayer, Network

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# Allocation guard: declared element counts above this are treated as
# corrupt headers rather than attempted.
MAX_ELEMENTS = 1 << 40


class FormatError(ValueError):
    """Malformed file content."""


class MagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class DimensionError(FormatError):
    pass


class CountMismatchError(FormatError):
    pass


class VersionError(FormatError):
    pass


@dataclass
class DatasetBundle:
    """Feature matrix plus the ground-truth labels used only for evaluation
    and evidence synthesis."""

    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows vs "
                f"{self.labels.shape[0]} labels"
            )
        if not np.isfinite(self.features).all():
            raise ValueError("features contain non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.labels).size)

    def subset(self, indices: np.ndarray, name: str | None = None) -> "DatasetBundle":
        return DatasetBundle(self.features[indices], self.labels[indices],
                             name or self.name, self.provenance)


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------

def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise TruncatedError(f"file ends inside {what}")
    return data


def _read_idx_array(path, magic_expected: int, n_dims: int) -> np.ndarray:
    with open(path, "rb") as f:
        header = _read_exact(f, 4, "magic number")
        (magic,) = struct.unpack(">I", header)
        if magic != magic_expected:
            raise MagicError(
                f"{path}: magic 0x{magic:08x}, expected 0x{magic_expected:08x}"
            )
        dims = struct.unpack(f">{n_dims}I", _read_exact(f, 4 * n_dims, "dimensions"))
        total = 1
        for d in dims:
            total *= d
        if total > MAX_ELEMENTS:
            raise DimensionError(f"{path}: declared dimensions {dims} overflow")
        payload = _read_exact(f, total, "pixel data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> DatasetBundle:
    """Parse an IDX image/label file pair into a flat [0, 1] feature matrix."""
    images = _read_idx_array(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx_array(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    features = images.reshape(images.shape[0], -1).astype(np.float32) / 255.0
    return DatasetBundle(features, labels.astype(np.int64), name="idx",
                         provenance=str(images_path))


def save_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write an IDX pair; used to build fixtures and desk-scale subsets."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("images must be n x rows x cols")
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


# ---------------------------------------------------------------------------
# EVT-MAT
# ---------------------------------------------------------------------------

MAT_MAGIC = b"EVTM"
CAT_MAGIC = b"EVTC"
CHECKPOINT_MAGIC = b"EVTK"
CHECKPOINT_VERSION = 1

_DTYPE_IDS = {0: np.float32, 1: np.float64}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_matrix(m: np.ndarray, path) -> None:
    m = np.asarray(m, dtype="<f4")
    if m.ndim != 2:
        raise ValueError("matrix must be 2-d")
    with open(path, "wb") as f:
        f.write(MAT_MAGIC)
        f.write(struct.pack("<II", m.shape[0], m.shape[1]))
        f.write(np.ascontiguousarray(m).tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAT_MAGIC:
            raise MagicError(f"{path}: not an EVT-MAT file")
        rows, cols = struct.unpack("<II", _read_exact(f, 8, "dimensions"))
        if rows * cols > MAX_ELEMENTS:
            raise DimensionError(f"{path}: {rows}x{cols} overflows")
        payload = _read_exact(f, rows * cols * 4, "matrix values")
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after declared payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return values.astype(np.float32)


# ---------------------------------------------------------------------------
# EVT-CAT
# ---------------------------------------------------------------------------

_CAT_MISSING_BYTE = 0xFF


def save_evidence(source: EvidenceSource, path) -> None:
    if source.width > _CAT_MISSING_BYTE - 1:
        raise ValueError(f"width {source.width} does not fit the byte encoding")
    values = np.where(source.mask, source.values, _CAT_MISSING_BYTE)
    with open(path, "wb") as f:
        f.write(CAT_MAGIC)
        f.write(struct.pack("<II", source.n, source.width))
        f.write(values.astype(np.uint8).tobytes())
        f.write(source.mask.astype(np.uint8).tobytes())


def load_evidence(path) -> EvidenceSource:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != CAT_MAGIC:
            raise MagicError(f"{path}: not an EVT-CAT file")
        n, width = struct.unpack("<II", _read_exact(f, 8, "header"))
        if n > MAX_ELEMENTS:
            raise DimensionError(f"{path}: sample count {n} overflows")
        raw_values = np.frombuffer(_read_exact(f, n, "values"), dtype=np.uint8)
        raw_mask = np.frombuffer(_read_exact(f, n, "mask"), dtype=np.uint8)
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after declared payload")
    if np.any(raw_mask > 1):
        raise FormatError(f"{path}: mask bytes must be 0 or 1")
    mask = raw_mask.astype(bool)
    if np.any(raw_values[~mask] != _CAT_MISSING_BYTE):
        raise FormatError(f"{path}: unavailable entries must hold 0xFF")
    # widen before where: uint8 arithmetic would wrap the negative sentinel
    values = np.where(mask, raw_values.astype(np.int64), MISSING)
    return EvidenceSource(values, width, mask)


# ---------------------------------------------------------------------------
# Model checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: Network, path) -> None:
    """Persist topology and parameters; the round-trip is bit-exact."""
    dtype = np.dtype(model.layers[0].weights.dtype)
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported parameter dtype {dtype}")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<IIIB", CHECKPOINT_VERSION, len(model.layers),
                            model.bottleneck_index, _DTYPE_CODES[dtype]))
        for layer in model.layers:
            f.write(struct.pack("<IIB", layer.in_size, layer.out_size,
                                ACTIVATIONS.index(layer.activation)))
        for p in model.parameters():
            f.write(np.ascontiguousarray(p, dtype=dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path) -> Network:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != CHECKPOINT_MAGIC:
            raise MagicError(f"{path}: not a checkpoint file")
        version, n_layers, bottleneck, dtype_id = struct.unpack(
            "<IIIB", _read_exact(f, 13, "header"))
        if version != CHECKPOINT_VERSION:
            raise VersionError(
                f"{path}: version {version}, expected {CHECKPOINT_VERSION}"
            )
        if dtype_id not in _DTYPE_IDS:
            raise FormatError(f"{path}: unknown dtype id {dtype_id}")
        if n_layers == 0 or n_layers > 10_000:
            raise DimensionError(f"{path}: implausible layer count {n_layers}")
        dtype = np.dtype(_DTYPE_IDS[dtype_id])
        shapes = []
        for _ in range(n_layers):
            n_in, n_out, act_id = struct.unpack("<IIB", _read_exact(f, 9, "topology"))
            if act_id >= len(ACTIVATIONS):
                raise FormatError(f"{path}: unknown activation id {act_id}")
            if n_in * n_out > MAX_ELEMENTS:
                raise DimensionError(f"{path}: layer {n_in}x{n_out} overflows")
            shapes.append((n_in, n_out, ACTIVATIONS[act_id]))
        layers = []
        for n_in, n_out, act in shapes:
            w_bytes = _read_exact(f, n_in * n_out * dtype.itemsize, "weights")
            b_bytes = _read_exact(f, n_out * dtype.itemsize, "biases")
            w = np.frombuffer(w_bytes, dtype=dtype.newbyteorder("<"))
            b = np.frombuffer(b_bytes, dtype=dtype.newbyteorder("<"))
            layers.append(DenseLayer(w.astype(dtype).reshape(n_in, n_out),
                                     b.astype(dtype), act))
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after declared payload")
    return Network(layers, bottleneck)


# ---------------------------------------------------------------------------
# Synthetic and bundled data
# ---------------------------------------------------------------------------

def synthetic_gaussians(n_per_cluster: int, centers: np.ndarray, sigma,
                        seed: int) -> DatasetBundle:
    """Axis-aligned Gaussian blobs; labels are the generating component ids.

    ``sigma`` is a scalar for isotropic components or a per-dimension vector
    shared by all components.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] < 2:
        raise ValueError("need at least 2 centers as a k x dim array")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64),
                            (centers.shape[1],))
    if (sigma <= 0).any():
        raise ValueError("sigma must be positive")
    if n_per_cluster < 1:
        raise ValueError("need at least one sample per cluster")
    rng = np.random.default_rng(seed)
    k, dim = centers.shape
    features = np.empty((k * n_per_cluster, dim), dtype=np.float32)
    labels = np.empty(k * n_per_cluster, dtype=np.int64)
    for j in range(k):
        block = slice(j * n_per_cluster, (j + 1) * n_per_cluster)
        features[block] = centers[j] + sigma * rng.standard_normal((n_per_cluster, dim))
        labels[block] = j
    return DatasetBundle(features, labels, name="gaussians",
                         provenance=f"synthetic seed={seed}")


def simplex_centers(k: int, dim: int, distance: float) -> np.ndarray:
    """k mutually equidistant points in dim >= k dimensions."""
    if dim < k:
        raise ValueError(f"need dim >= k to place {k} equidistant centers")
    basis = np.eye(k, dim)
    basis -= basis.mean(axis=0)
    return basis * (distance / np.sqrt(2.0))


def blob_bundle(seed: int = 7) -> DatasetBundle:
    """The canonical 3-Gaussian bundle: 600 x 8, separation 6 sigma.

    Components are 6 within-cluster sigmas apart along the three informative
    coordinates; the remaining five coordinates carry shared nuisance
    variation at 2.5x that sigma.  Features live around the unit box, the
    scale the training defaults are tuned for.  The nuisance variance gives
    an undersized bottleneck a reason to discard class structure, which is
    the gap evidence transfer is meant to close.
    """
    sigma_c = 0.1
    centers = np.full((3, 8), 0.5)
    centers[:, :3] += simplex_centers(3, 3, 6.0 * sigma_c)
    sigma = np.array([sigma_c] * 3 + [2.5 * sigma_c] * 5)
    bundle = synthetic_gaussians(200, centers, sigma, seed)
    bundle.name = "blobs"
    bundle.provenance = f"canonical 3-gaussian bundle seed={seed}"
    return bundle


def bundled_digits() -> DatasetBundle:
    """The 8x8 handwritten-digits set shipped with scikit-learn.

    Serves as the offline desk-scale stand-in for MNIST: 1797 samples,
    64 features scaled to [0, 1], 10 classes.
    """
    from sklearn.datasets import load_digits

    raw = load_digits()
    features = (raw.data / 16.0).astype(np.float32)
    return DatasetBundle(features, raw.target.astype(np.int64),
                         name="digits", provenance="sklearn load_digits")
