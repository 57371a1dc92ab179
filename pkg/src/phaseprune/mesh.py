"""Rectangular (Clements) MZI meshes.

Each MZI uses the two-coupler convention with the external phase ``phi`` on
the top input arm followed by the internal phase ``theta``::

    T(theta, phi) = i e^{i theta/2} [[e^{i phi} sin(theta/2),  cos(theta/2)],
                                     [e^{i phi} cos(theta/2), -sin(theta/2)]]

so ``theta = 0`` is the full cross state and ``theta = pi`` the bar state.
A mesh of size N holds N(N-1)/2 MZIs followed by a column of N output phase
shifters, i.e. exactly N**2 phase parameters.

Phase vectors are laid out MZI by MZI in (column, top_port) order as
``theta_0, phi_0, theta_1, phi_1, ...`` followed by the N output phases.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

# Relative magnitude under which a matrix element is treated as exactly zero
# while solving the 2x2 nulling problems.
_DEGENERATE_TOL = 1e-14


class NotUnitaryError(ValueError):
    """Raised when a matrix handed to the decomposition is not unitary."""


class MziNode(NamedTuple):
    theta: float
    phi: float
    column: int
    top_port: int


def wrap_phase(x):
    """Wrap radians into the canonical range (-pi, pi].

    Values already inside the range are returned bit-for-bit unchanged, so
    wrapping is idempotent.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("phase must be finite")
    inside = (arr > -np.pi) & (arr <= np.pi)
    wrapped = np.pi - np.mod(np.pi - arr, 2 * np.pi)
    wrapped = np.where(wrapped <= -np.pi, np.pi, wrapped)
    out = np.where(inside, arr, wrapped)
    if np.ndim(x) == 0:
        return float(out)
    return out


@lru_cache(maxsize=None)
def mesh_layout(n: int) -> tuple[np.ndarray, np.ndarray, tuple[tuple[int, int], ...]]:
    """Canonical Clements placement for an ``n``-port mesh.

    Returns ``(columns, top_ports, column_slices)`` where ``column_slices[c]``
    is the ``(start, stop)`` range of MZI indices that sit in column ``c``.
    """
    cols, ports, slices = [], [], []
    for c in range(n):
        start = len(cols)
        for p in range(c % 2, n - 1, 2):
            cols.append(c)
            ports.append(p)
        slices.append((start, len(cols)))
    columns = np.array(cols, dtype=int)
    top_ports = np.array(ports, dtype=int)
    columns.setflags(write=False)
    top_ports.setflags(write=False)
    return columns, top_ports, tuple(slices)


def mzi_count(n: int) -> int:
    return n * (n - 1) // 2


@dataclass(frozen=True, eq=False)
class UnitaryMesh:
    """An N x N unitary realised as a Clements MZI array plus output phases."""

    size: int
    theta: np.ndarray
    phi: np.ndarray
    output_phases: np.ndarray

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"mesh size must be >= 1, got {self.size}")
        m = mzi_count(self.size)
        for name, expected in (("theta", m), ("phi", m), ("output_phases", self.size)):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (expected,):
                raise ValueError(f"{name} must have shape ({expected},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def mzis(self) -> list[MziNode]:
        columns, ports, _ = mesh_layout(self.size)
        return [
            MziNode(float(t), float(p), int(c), int(q))
            for t, p, c, q in zip(self.theta, self.phi, columns, ports)
        ]

    @property
    def phase_count(self) -> int:
        return self.size * self.size

    def phases(self) -> np.ndarray:
        """Flat phase vector in canonical order (see module docstring)."""
        m = mzi_count(self.size)
        out = np.empty(self.size * self.size)
        out[0 : 2 * m : 2] = self.theta
        out[1 : 2 * m : 2] = self.phi
        out[2 * m :] = self.output_phases
        return out

    @classmethod
    def from_phases(cls, size: int, phases) -> "UnitaryMesh":
        phases = np.asarray(phases, dtype=float)
        if phases.shape != (size * size,):
            raise ValueError(f"expected {size * size} phases, got {phases.shape}")
        m = mzi_count(size)
        return cls(size, phases[0 : 2 * m : 2], phases[1 : 2 * m : 2], phases[2 * m :])

    def __eq__(self, other):
        if not isinstance(other, UnitaryMesh):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.phases(), other.phases())

    __hash__ = None


def random_mesh(n: int, rng: np.random.Generator) -> UnitaryMesh:
    """Mesh with every phase drawn uniformly from (-pi, pi]."""
    return UnitaryMesh.from_phases(n, wrap_phase(rng.uniform(-np.pi, np.pi, n * n)))


def mzi_transfer(theta: float, phi: float) -> np.ndarray:
    t00, t01, t10, t11 = _blocks(np.asarray(theta, float), np.asarray(phi, float))
    return np.array([[t00, t01], [t10, t11]], dtype=complex)


def _blocks(theta, phi):
    half = 0.5 * theta
    g = 1j * np.exp(1j * half)
    s = np.sin(half)
    c = np.cos(half)
    e = np.exp(1j * phi)
    return g * e * s, g * c, g * e * c, -g * s


def _as_columns(mesh: UnitaryMesh, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=complex)
    vector = x.ndim == 1
    if vector:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != mesh.size:
        raise ValueError(f"input has leading dimension {x.shape[0]}, mesh size is {mesh.size}")
    return x, vector


def mesh_forward(mesh: UnitaryMesh, x) -> np.ndarray:
    """Propagate ``x`` (shape (N,) or (N, batch)) through the mesh column by column."""
    x, vector = _as_columns(mesh, x)
    y, _ = forward_trace(mesh, x, keep_states=False)
    return y[:, 0] if vector else y


def forward_trace(mesh: UnitaryMesh, x: np.ndarray, keep_states: bool = True):
    """Forward pass on an (N, batch) array, optionally recording column inputs.

    Returns ``(y, states)`` where ``states[c]`` is the field entering column
    ``c`` and ``states[-1]`` the field entering the output phase column.
    """
    _, ports, slices = mesh_layout(mesh.size)
    t00, t01, t10, t11 = _blocks(mesh.theta, mesh.phi)
    cur = np.array(x, dtype=complex, copy=True)
    states = []
    for start, stop in slices:
        if keep_states:
            states.append(cur.copy())
        if start == stop:
            continue
        p = ports[start:stop]
        top = cur[p]
        bot = cur[p + 1]
        cur[p] = t00[start:stop, None] * top + t01[start:stop, None] * bot
        cur[p + 1] = t10[start:stop, None] * top + t11[start:stop, None] * bot
    if keep_states:
        states.append(cur.copy())
    y = np.exp(1j * mesh.output_phases)[:, None] * cur
    return y, states


def mesh_vjp(mesh: UnitaryMesh, states: list[np.ndarray], y: np.ndarray, grad_y: np.ndarray):
    """Reverse-mode sweep through a mesh.

    ``grad_y`` is the complex cotangent dL/dRe(y) + i dL/dIm(y). Returns
    ``(grad_phases, grad_x)`` with ``grad_phases`` in canonical phase order
    (summed over the batch) and ``grad_x`` the cotangent of the input.
    """
    n = mesh.size
    m = mzi_count(n)
    _, ports, slices = mesh_layout(n)
    grad = np.zeros(n * n)
    grad[2 * m :] = np.real(np.conj(grad_y) * 1j * y).sum(axis=1)
    g = np.exp(-1j * mesh.output_phases)[:, None] * grad_y

    half = 0.5 * mesh.theta
    pre = 1j * np.exp(1j * half)
    s = np.sin(half)
    c = np.cos(half)
    e = np.exp(1j * mesh.phi)
    t00, t01, t10, t11 = pre * e * s, pre * c, pre * e * c, -pre * s
    # dT/dtheta = (i/2) T + (pre/2) [[e c, -s], [-e s, -c]]
    d00 = 0.5j * t00 + 0.5 * pre * e * c
    d01 = 0.5j * t01 - 0.5 * pre * s
    d10 = 0.5j * t10 - 0.5 * pre * e * s
    d11 = 0.5j * t11 - 0.5 * pre * c
    grad_theta = grad[0 : 2 * m : 2]
    grad_phi = grad[1 : 2 * m : 2]

    for col in range(len(slices) - 1, -1, -1):
        start, stop = slices[col]
        if start == stop:
            continue
        sl = slice(start, stop)
        p = ports[sl]
        xin = states[col]
        xt, xb = xin[p], xin[p + 1]
        gt, gb = g[p], g[p + 1]
        cgt, cgb = np.conj(gt), np.conj(gb)
        dt_top = d00[sl, None] * xt + d01[sl, None] * xb
        dt_bot = d10[sl, None] * xt + d11[sl, None] * xb
        grad_theta[sl] = np.real(cgt * dt_top + cgb * dt_bot).sum(axis=1)
        # dT/dphi only touches the first column of T: (i t00, i t10)
        grad_phi[sl] = np.real(1j * xt * (cgt * t00[sl, None] + cgb * t10[sl, None])).sum(axis=1)
        g[p] = np.conj(t00[sl, None]) * gt + np.conj(t10[sl, None]) * gb
        g[p + 1] = np.conj(t01[sl, None]) * gt + np.conj(t11[sl, None]) * gb
    return grad, g


def mesh_matrix(mesh: UnitaryMesh) -> np.ndarray:
    """Dense N x N transfer matrix of the mesh."""
    return mesh_forward(mesh, np.eye(mesh.size, dtype=complex))


def _null_right(a: complex, b: complex) -> tuple[float, float]:
    """Phases of T such that column ``k`` of ``[a, b] @ T^-1`` vanishes."""
    scale = abs(a) + abs(b)
    if abs(b) <= _DEGENERATE_TOL * scale:
        return 0.0, 0.0
    if abs(a) <= _DEGENERATE_TOL * scale:
        return np.pi, 0.0
    theta = 2.0 * np.arctan2(abs(b), abs(a))
    return theta, float(np.angle(-a / b))


def _null_left(a: complex, b: complex) -> tuple[float, float]:
    """Phases of T such that the lower entry of ``T @ [a, b]`` vanishes."""
    scale = abs(a) + abs(b)
    if abs(a) <= _DEGENERATE_TOL * scale:
        return 0.0, 0.0
    if abs(b) <= _DEGENERATE_TOL * scale:
        return np.pi, 0.0
    theta = 2.0 * np.arctan2(abs(a), abs(b))
    return theta, float(np.angle(b / a))


def _factor_diag_left(m: np.ndarray) -> tuple[float, float, complex, complex]:
    """Write a 2x2 unitary as ``diag(d0, d1) @ T(theta, phi)``."""
    m00, m01, m10, m11 = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    scale = abs(m00) + abs(m01)
    if abs(m00) <= _DEGENERATE_TOL * scale:
        # cross state: diag(d0, d1) i [[0, 1], [e^{i phi}, 0]], phi absorbed into d1
        return 0.0, 0.0, m01 / 1j, m10 / 1j
    if abs(m01) <= _DEGENERATE_TOL * scale:
        # bar state: diag(d0, d1) (-1) [[e^{i phi}, 0], [0, -1]], phi absorbed into d0
        return np.pi, 0.0, -m00, m11
    theta = 2.0 * np.arctan2(abs(m00), abs(m01))
    phi = float(np.angle(m00) - np.angle(m01))
    t = mzi_transfer(theta, phi)
    d0 = m01 / t[0, 1] if abs(t[0, 1]) >= abs(t[0, 0]) else m00 / t[0, 0]
    d1 = m10 / t[1, 0] if abs(t[1, 0]) >= abs(t[1, 1]) else m11 / t[1, 1]
    return theta, phi, d0, d1


def _apply_right_inverse(u: np.ndarray, k: int, theta: float, phi: float) -> None:
    tinv = mzi_transfer(theta, phi).conj().T
    u[:, k : k + 2] = u[:, k : k + 2] @ tinv


def _apply_left(u: np.ndarray, k: int, theta: float, phi: float) -> None:
    u[k : k + 2, :] = mzi_transfer(theta, phi) @ u[k : k + 2, :]


def clements_decompose(u, tol: float = 1e-8) -> UnitaryMesh:
    """Decompose a unitary into a rectangular MZI mesh.

    Off-diagonal entries are nulled by alternating MZIs applied from the
    right and from the left; the left-hand MZIs are then commuted through
    the remaining diagonal, which ends up as the output phase column.

    Raises:
        ValueError: if ``u`` is empty or not square.
        NotUnitaryError: if ``||U^H U - I||_F >= tol``.
    """
    u = np.array(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    n = u.shape[0]
    if n == 0:
        raise ValueError("cannot decompose an empty matrix")
    if not np.all(np.isfinite(u)):
        raise ValueError("matrix contains non-finite entries")
    err = np.linalg.norm(u.conj().T @ u - np.eye(n))
    if err >= tol:
        raise NotUnitaryError(f"matrix is not unitary: ||U^H U - I||_F = {err:.3e}")

    right: list[tuple[int, float, float]] = []
    left: list[tuple[int, float, float]] = []
    for i in range(n - 1):
        if i % 2 == 0:
            for j in range(i + 1):
                row, k = n - 1 - j, i - j
                theta, phi = _null_right(u[row, k], u[row, k + 1])
                _apply_right_inverse(u, k, theta, phi)
                u[row, k] = 0.0
                right.append((k, theta, phi))
        else:
            for j in range(i + 1):
                row, col = n - 1 - i + j, j
                theta, phi = _null_left(u[row - 1, col], u[row, col])
                _apply_left(u, row - 1, theta, phi)
                u[row, col] = 0.0
                left.append((row - 1, theta, phi))

    # u is now diagonal: U_orig = L1^-1 ... Lm^-1 D Rn ... R1
    diag = np.diag(u).copy()
    moved: list[tuple[int, float, float]] = []
    for k, theta, phi in reversed(left):
        block = mzi_transfer(theta, phi).conj().T @ np.diag(diag[k : k + 2])
        theta2, phi2, d0, d1 = _factor_diag_left(block)
        diag[k], diag[k + 1] = d0, d1
        moved.append((k, theta2, phi2))
    # U_orig = D' T'_1 ... T'_m Rn ... R1, so from the input side: R1..Rn, T'_m..T'_1
    sequence = right + moved

    columns, ports, _ = mesh_layout(n)
    slot = {(int(c), int(p)): idx for idx, (c, p) in enumerate(zip(columns, ports))}
    depth = np.full(n, -1)
    theta_out = np.zeros(mzi_count(n))
    phi_out = np.zeros(mzi_count(n))
    filled = np.zeros(mzi_count(n), dtype=bool)
    for k, theta, phi in sequence:
        col = int(max(depth[k], depth[k + 1]) + 1)
        depth[k] = depth[k + 1] = col
        idx = slot[(col, k)]
        if filled[idx]:
            raise RuntimeError(f"decomposition placed two MZIs at column {col}, port {k}")
        filled[idx] = True
        theta_out[idx] = theta
        phi_out[idx] = phi
    return UnitaryMesh(
        n,
        wrap_phase(theta_out),
        wrap_phase(phi_out),
        wrap_phase(np.angle(diag)),
    )
