"""Datasets: MNIST IDX parsing, FFT features, synthetic blobs, and the
weight-sparsity vs phase-sparsity (BMA) experiment."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .svd_layer import layer_from_weights

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
FEATURE_BLOCK = 8


class IdxFormatError(ValueError):
    """Malformed IDX file; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = path
        self.offset = offset


@dataclass(eq=False)
class Dataset:
    features: np.ndarray  # (count, dim) complex
    labels: np.ndarray  # (count,) int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=complex)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise ValueError("features must be a (count, dim) array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels differ in length")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx])


def _read_idx(path, magic: int, item_dims: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise IdxFormatError(path, len(raw), "file shorter than the IDX header")
    (found,) = struct.unpack(">i", raw[:4])
    if found != magic:
        raise IdxFormatError(path, 0, f"bad magic {found}, expected {magic}")
    ndim = 1 + item_dims
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(path, len(raw), "truncated dimension header")
    shape = struct.unpack(f">{ndim}i", raw[4:header])
    expected = header + int(np.prod(shape))
    if len(raw) != expected:
        raise IdxFormatError(path, len(raw), f"expected {expected} bytes for shape {shape}, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(shape)


def load_mnist_idx(image_path, label_path) -> tuple[np.ndarray, np.ndarray]:
    """Read an MNIST image/label IDX pair into ``(images[count, 28, 28], labels[count])``."""
    images = _read_idx(image_path, IMAGE_MAGIC, 2)
    if images.shape[1:] != (28, 28):
        raise IdxFormatError(image_path, 8, f"images are {images.shape[1:]}, expected (28, 28)")
    labels = _read_idx(label_path, LABEL_MAGIC, 0)
    if labels.shape[0] != images.shape[0]:
        raise IdxFormatError(label_path, 4, f"{labels.shape[0]} labels for {images.shape[0]} images")
    return images.copy(), labels.astype(int)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (images when 3-D, labels when 1-D)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IMAGE_MAGIC if array.ndim == 3 else LABEL_MAGIC
    header = struct.pack(f">i{array.ndim}i", magic, *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def fft_features(img, block: int = FEATURE_BLOCK) -> np.ndarray:
    """Lowest-frequency ``block x block`` 2-D DFT coefficients, max-modulus normalised.

    Intensities are scaled to [0, 1] first. Real and imaginary parts below
    the transform's roundoff floor are set to zero. Returns ``block**2``
    complex values flattened row-major with the DC term first.
    """
    img = np.asarray(img, dtype=float)
    if img.shape != (28, 28):
        raise ValueError(f"expected a 28x28 image, got {img.shape}")
    coeffs = np.fft.fft2(img / 255.0)[:block, :block]
    # flush FFT roundoff so analytically zero components come out exactly 0
    floor = img.size * np.finfo(float).eps * np.abs(coeffs).max()
    re = np.where(np.abs(coeffs.real) > floor, coeffs.real, 0.0)
    im = np.where(np.abs(coeffs.imag) > floor, coeffs.imag, 0.0)
    peak = np.hypot(re, im).max()
    if peak == 0:
        return np.zeros(block * block, dtype=complex)
    # componentwise division; complex / real in numpy can round x / x below 1
    return (re / peak + 1j * (im / peak)).ravel()


def mnist_dataset(image_path, label_path, limit: int | None = None) -> Dataset:
    images, labels = load_mnist_idx(image_path, label_path)
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    return Dataset(np.array([fft_features(im) for im in images]), labels)


def synth_dataset(classes: int, per_class: int, dim: int, seed: int = 0, noise: float = 0.1) -> Dataset:
    """Complex Gaussian blobs around unit-modulus class centroids.

    Each centroid has entries ``exp(i * u)`` with random ``u``; samples add
    circular complex noise of standard deviation ``noise`` per entry. Items
    are grouped by class.
    """
    if min(classes, per_class, dim) < 1:
        raise ValueError("classes, per_class and dim must all be >= 1")
    rng = np.random.default_rng(seed)
    centroids = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(classes, dim)))
    shape = (classes, per_class, dim)
    jitter = (rng.normal(size=shape) + 1j * rng.normal(size=shape)) * (noise / np.sqrt(2))
    features = (centroids[:, None, :] + jitter).reshape(classes * per_class, dim)
    labels = np.repeat(np.arange(classes), per_class)
    return Dataset(features, labels)


def split(data: Dataset, test_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(data))
    cut = int(round(len(data) * (1 - test_fraction)))
    return data.subset(np.sort(order[:cut])), data.subset(np.sort(order[cut:]))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def random_sparse_matrix(dim: int, sw: float, rng: np.random.Generator) -> np.ndarray:
    """Complex standard-normal ``dim x dim`` matrix with round(sw% of entries) zeroed."""
    if not 0 <= sw <= 100:
        raise ValueError(f"sparsity must be in [0, 100], got {sw}")
    w = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    zeros = _round_half_up(sw / 100 * dim * dim)
    flat = w.reshape(-1)
    flat[rng.choice(dim * dim, size=zeros, replace=False)] = 0.0
    return w


@dataclass(frozen=True)
class BmaConfig:
    dims: tuple[int, ...] = (8, 16, 32)
    samples_per_dim: int = 1000
    sw_range: tuple[float, float] = (80.0, 100.0)
    zero_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.sw_range
        if not 0 <= lo <= hi <= 100:
            raise ValueError(f"sw_range must satisfy 0 <= low <= high <= 100, got {self.sw_range}")
        if self.samples_per_dim < 1 or not self.dims or min(self.dims) < 1:
            raise ValueError("dims and samples_per_dim must be positive")
        if self.zero_tol <= 0:
            raise ValueError("zero_tol must be > 0")


def phase_sparsity_of_weights(w: np.ndarray, zero_tol: float) -> float:
    layer = layer_from_weights(w)
    phases = np.concatenate([layer.mesh_v.phases(), layer.mesh_u.phases()])
    return 100.0 * np.count_nonzero(np.abs(phases) < zero_tol) / phases.size


def bma_sample(cfg: BmaConfig, dim_index: int, sample: int) -> dict:
    """One BMA record; the rng stream depends only on (seed, dim_index, sample)."""
    dim = cfg.dims[dim_index]
    rng = np.random.default_rng([cfg.seed, dim_index, sample])
    lo, hi = cfg.sw_range
    sw = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    w = random_sparse_matrix(dim, sw, rng)
    return {
        "dim": dim,
        "s_w_pct": sw,
        "weight_sparsity_pct": 100.0 * np.count_nonzero(w == 0) / w.size,
        "ps_sparsity_pct": phase_sparsity_of_weights(w, cfg.zero_tol),
    }


def _bma_chunk(args):
    cfg, jobs = args
    return [bma_sample(cfg, d, s) for d, s in jobs]


def bma_experiment(cfg: BmaConfig, workers: int = 1) -> list[dict]:
    """Map random sparse matrices to meshes and record both sparsities.

    Records come back ordered by (dimension, sample) regardless of ``workers``.
    """
    jobs = [(d, s) for d in range(len(cfg.dims)) for s in range(cfg.samples_per_dim)]
    if workers <= 1:
        return _bma_chunk((cfg, jobs))
    from concurrent.futures import ProcessPoolExecutor

    chunks = [jobs[i::workers] for i in range(workers)]
    records: dict[tuple[int, int], dict] = {}
    with ProcessPoolExecutor(workers) as pool:
        for chunk, out in zip(chunks, pool.map(_bma_chunk, [(cfg, c) for c in chunks])):
            records.update(zip(chunk, out))
    return [records[j] for j in jobs]
