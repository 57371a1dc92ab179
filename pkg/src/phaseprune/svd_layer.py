"""Linear layers realised as U . diag(sigma) . V^H on two MZI meshes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import UnitaryMesh, clements_decompose, mesh_forward, mesh_matrix


@dataclass(frozen=True, eq=False)
class SvdLayer:
    """One m x n linear layer.

    ``mesh_v`` (size n) implements V^H, ``mesh_u`` (size m) implements U and
    ``sigma`` holds the min(m, n) non-negative gains. The gains carry no
    phase shifters.
    """

    in_dim: int
    out_dim: int
    mesh_v: UnitaryMesh
    sigma: np.ndarray
    mesh_u: UnitaryMesh

    def __post_init__(self):
        if self.mesh_v.size != self.in_dim or self.mesh_u.size != self.out_dim:
            raise ValueError(
                f"mesh sizes ({self.mesh_v.size}, {self.mesh_u.size}) do not match "
                f"layer dims ({self.in_dim}, {self.out_dim})"
            )
        sigma = np.array(self.sigma, dtype=float)
        if sigma.shape != (self.rank,):
            raise ValueError(f"sigma must have shape ({self.rank},), got {sigma.shape}")
        if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
            raise ValueError("sigma entries must be finite and non-negative")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def rank(self) -> int:
        return min(self.in_dim, self.out_dim)

    @property
    def ps_count(self) -> int:
        return self.in_dim**2 + self.out_dim**2


def embed_sigma(sigma, m: int, n: int) -> np.ndarray:
    out = np.zeros((m, n))
    k = min(m, n)
    out[np.arange(k), np.arange(k)] = sigma
    return out


def layer_from_weights(w, tol: float = 1e-8) -> SvdLayer:
    """Map a dense (complex) weight matrix onto a pair of meshes via SVD."""
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or min(w.shape) == 0:
        raise ValueError(f"expected a non-empty 2-D weight matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weight matrix contains non-finite entries")
    m, n = w.shape
    u, s, vh = np.linalg.svd(w)
    return SvdLayer(n, m, clements_decompose(vh, tol), s, clements_decompose(u, tol))


def layer_to_weights(layer: SvdLayer) -> np.ndarray:
    return (
        mesh_matrix(layer.mesh_u)
        @ embed_sigma(layer.sigma, layer.out_dim, layer.in_dim)
        @ mesh_matrix(layer.mesh_v)
    )


def bridge(h: np.ndarray, sigma: np.ndarray, out_dim: int) -> np.ndarray:
    """Apply the gains to the leading rows of ``h`` and zero-pad/truncate to ``out_dim``."""
    k = sigma.shape[0]
    out = np.zeros((out_dim,) + h.shape[1:], dtype=complex)
    out[:k] = sigma.reshape((k,) + (1,) * (h.ndim - 1)) * h[:k]
    return out


def layer_forward(layer: SvdLayer, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != layer.in_dim:
        raise ValueError(f"input has leading dimension {x.shape[0]}, layer expects {layer.in_dim}")
    h = mesh_forward(layer.mesh_v, x)
    return mesh_forward(layer.mesh_u, bridge(h, layer.sigma, layer.out_dim))


def ps_census(layers) -> dict:
    """Count phase shifters: N**2 per mesh, nothing for the gains.

    Returns a dict with ``total`` and a ``per_mesh`` list of
    ``(layer_index, "v" | "u", size, count)`` tuples.
    """
    per_mesh = []
    for i, layer in enumerate(layers):
        if isinstance(layer, SvdLayer):
            n, m = layer.in_dim, layer.out_dim
        else:
            n, m = layer
        per_mesh.append((i, "v", n, n * n))
        per_mesh.append((i, "u", m, m * m))
    return {"total": sum(entry[3] for entry in per_mesh), "per_mesh": per_mesh}


def census_for_dims(dims) -> int:
    """Phase-shifter total for a chain of layer widths, e.g. ``[64, 256, 100, 10]``."""
    dims = list(dims)
    return ps_census(list(zip(dims[:-1], dims[1:])))["total"]
