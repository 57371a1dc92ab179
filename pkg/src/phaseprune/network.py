"""SVD-based photonic neural network trained directly in the phase domain.

All trainable state lives in one flat float vector::

    [ phases | sigma params | activation biases ]

The phase section concatenates, layer by layer, the phases of ``mesh_v``
and then ``mesh_u`` (each in canonical mesh order). Gains are
parameterised as ``sigma = g**2``. Biases are one scalar per hidden layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .mesh import UnitaryMesh, forward_trace, mesh_vjp, wrap_phase
from .svd_layer import SvdLayer, bridge

ACTIVATIONS = ("modrelu",)


@dataclass(frozen=True)
class ParamLayout:
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise ValueError(f"need at least two positive layer widths, got {self.dims}")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @cached_property
    def mesh_slices(self) -> list[tuple[slice, slice]]:
        """Per layer, the (mesh_v, mesh_u) slices into the phase section."""
        out, pos = [], 0
        for n, m in zip(self.dims[:-1], self.dims[1:]):
            sv = slice(pos, pos + n * n)
            pos += n * n
            su = slice(pos, pos + m * m)
            pos += m * m
            out.append((sv, su))
        return out

    @cached_property
    def n_phases(self) -> int:
        return sum(n * n + m * m for n, m in zip(self.dims[:-1], self.dims[1:]))

    @cached_property
    def sigma_slices(self) -> list[slice]:
        out, pos = [], self.n_phases
        for n, m in zip(self.dims[:-1], self.dims[1:]):
            out.append(slice(pos, pos + min(n, m)))
            pos += min(n, m)
        return out

    @property
    def phase_section(self) -> slice:
        return slice(0, self.n_phases)

    @cached_property
    def sigma_section(self) -> slice:
        return slice(self.n_phases, self.sigma_slices[-1].stop)

    @cached_property
    def bias_section(self) -> slice:
        start = self.sigma_section.stop
        return slice(start, start + self.n_layers - 1)

    @property
    def size(self) -> int:
        return self.bias_section.stop

    def kinds(self) -> np.ndarray:
        """Label each parameter as theta, phi, psi, sigma or bias."""
        labels = np.empty(self.size, dtype=object)
        for sv, su in self.mesh_slices:
            for sl in (sv, su):
                n = int(round(np.sqrt(sl.stop - sl.start)))
                m = n * (n - 1) // 2
                labels[sl.start : sl.start + 2 * m : 2] = "theta"
                labels[sl.start + 1 : sl.start + 2 * m : 2] = "phi"
                labels[sl.start + 2 * m : sl.stop] = "psi"
        labels[self.sigma_section] = "sigma"
        labels[self.bias_section] = "bias"
        return labels


@dataclass(eq=False)
class ScIpnn:
    """Stack of SVD layers with modReLU between them and |z|^2 readout."""

    dims: tuple[int, ...]
    class_count: int
    params: np.ndarray
    activation: str = "modrelu"
    layout: ParamLayout = field(init=False, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.layout = ParamLayout(self.dims)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 1 <= self.class_count <= self.dims[-1]:
            raise ValueError(f"class_count {self.class_count} incompatible with output width {self.dims[-1]}")
        self.params = np.array(self.params, dtype=float)
        if self.params.shape != (self.layout.size,):
            raise ValueError(f"expected {self.layout.size} parameters, got {self.params.shape}")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters must be finite")

    @classmethod
    def from_layers(cls, layers: list[SvdLayer], biases, class_count: int) -> "ScIpnn":
        dims = [layers[0].in_dim]
        for prev, layer in zip(layers, layers[1:]):
            if prev.out_dim != layer.in_dim:
                raise ValueError("layer dimensions do not chain")
        dims += [layer.out_dim for layer in layers]
        parts = [np.concatenate([l.mesh_v.phases(), l.mesh_u.phases()]) for l in layers]
        parts += [np.sqrt(l.sigma) for l in layers]
        parts.append(np.asarray(biases, dtype=float).reshape(len(layers) - 1))
        return cls(tuple(dims), class_count, np.concatenate(parts))

    def copy(self) -> "ScIpnn":
        return ScIpnn(self.dims, self.class_count, self.params.copy(), self.activation)

    @property
    def phases(self) -> np.ndarray:
        return self.params[self.layout.phase_section]

    @property
    def biases(self) -> np.ndarray:
        return self.params[self.layout.bias_section]

    def meshes(self, layer: int) -> tuple[UnitaryMesh, UnitaryMesh]:
        n, m = self.dims[layer], self.dims[layer + 1]
        sv, su = self.layout.mesh_slices[layer]
        return (
            UnitaryMesh.from_phases(n, self.params[sv]),
            UnitaryMesh.from_phases(m, self.params[su]),
        )

    def mesh_phase_slices(self) -> list[slice]:
        return [sl for pair in self.layout.mesh_slices for sl in pair]

    def sigma(self, layer: int) -> np.ndarray:
        return self.params[self.layout.sigma_slices[layer]] ** 2

    @property
    def layers(self) -> list[SvdLayer]:
        out = []
        for i in range(self.layout.n_layers):
            mv, mu = self.meshes(i)
            out.append(SvdLayer(self.dims[i], self.dims[i + 1], mv, self.sigma(i), mu))
        return out


def init_network(dims, class_count: int, seed: int = 0, bias: float = -0.1) -> ScIpnn:
    """Fresh network: phases uniform on (-pi, pi], unit gains, constant bias."""
    layout = ParamLayout(tuple(dims))
    rng = np.random.default_rng(seed)
    params = np.empty(layout.size)
    params[layout.phase_section] = wrap_phase(rng.uniform(-np.pi, np.pi, layout.n_phases))
    params[layout.sigma_section] = 1.0
    params[layout.bias_section] = bias
    return ScIpnn(tuple(dims), class_count, params)


def modrelu(z: np.ndarray, b: float) -> np.ndarray:
    r = np.abs(z)
    active = (r + b > 0) & (r > 0)
    safe = np.where(active, r, 1.0)
    return np.where(active, (r + b) * z / safe, 0.0)


def _modrelu_vjp(z, b, grad_a):
    r = np.abs(z)
    active = (r + b > 0) & (r > 0)
    safe = np.where(active, r, 1.0)
    u = z / safe
    proj = np.real(np.conj(grad_a) * u)
    grad_z = np.where(active, grad_a * (1 + b / safe) - (b / safe) * proj * u, 0.0)
    grad_b = float(np.sum(np.where(active, proj, 0.0)))
    return grad_z, grad_b


def _as_batch(net: ScIpnn, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=complex)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.dims[0]:
        raise ValueError(f"inputs must have length {net.dims[0]}, got shape {x.shape}")
    return x.T, single


def _run(net: ScIpnn, xt: np.ndarray, keep: bool):
    caches = []
    a = xt
    n_layers = net.layout.n_layers
    for i in range(n_layers):
        mv, mu = net.meshes(i)
        sigma = net.sigma(i)
        h, sv = forward_trace(mv, a, keep)
        t = bridge(h, sigma, net.dims[i + 1])
        z, su = forward_trace(mu, t, keep)
        if keep:
            caches.append((mv, mu, sigma, h, sv, z, su))
        a = modrelu(z, net.biases[i]) if i < n_layers - 1 else z
    scores = np.abs(a[: net.class_count]) ** 2
    return scores, a, caches


def forward(net: ScIpnn, x) -> np.ndarray:
    """Detector scores |z_k|^2 for the first ``class_count`` outputs.

    ``x`` is a single input of length ``dims[0]`` or a ``(batch, dims[0])`` array.
    """
    xt, single = _as_batch(net, x)
    scores, _, _ = _run(net, xt, keep=False)
    return scores[:, 0] if single else scores.T


def _cross_entropy(scores: np.ndarray, labels: np.ndarray):
    """Mean softmax cross-entropy of (classes, batch) logits; also returns dL/dlogits."""
    shifted = scores - scores.max(axis=0, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=0))
    batch = scores.shape[1]
    idx = np.arange(batch)
    value = float(np.mean(lse - shifted[labels, idx]))
    probs = np.exp(shifted - lse)
    probs[labels, idx] -= 1.0
    return value, probs / batch


def _check_batch(net: ScIpnn, inputs, labels):
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        raise ValueError("empty batch")
    if np.any(labels < 0) or np.any(labels >= net.class_count):
        raise ValueError("labels out of range")
    xt, _ = _as_batch(net, np.atleast_2d(inputs))
    if xt.shape[1] != labels.size:
        raise ValueError("inputs and labels differ in length")
    return xt, labels


def loss(net: ScIpnn, inputs, labels) -> float:
    xt, labels = _check_batch(net, inputs, labels)
    scores, _, _ = _run(net, xt, keep=False)
    return _cross_entropy(scores, labels)[0]


def loss_and_gradient(net: ScIpnn, inputs, labels) -> tuple[float, np.ndarray]:
    """Loss and its gradient with respect to ``net.params`` (reverse mode)."""
    xt, labels = _check_batch(net, inputs, labels)
    scores, out, caches = _run(net, xt, keep=True)
    value, dscores = _cross_entropy(scores, labels)

    layout = net.layout
    grad = np.zeros(layout.size)
    g = np.zeros_like(out)
    g[: net.class_count] = 2.0 * out[: net.class_count] * dscores
    for i in range(layout.n_layers - 1, -1, -1):
        mv, mu, sigma, h, sv, z, su = caches[i]
        if i < layout.n_layers - 1:
            g, grad_b = _modrelu_vjp(z, net.biases[i], g)
            grad[layout.bias_section.start + i] = grad_b
        gu, g_t = mesh_vjp(mu, su, z, g)
        k = sigma.shape[0]
        grad_sigma = np.real(np.conj(g_t[:k]) * h[:k]).sum(axis=1)
        gp = net.params[layout.sigma_slices[i]]
        grad[layout.sigma_slices[i]] = 2.0 * gp * grad_sigma
        g_h = np.zeros((net.dims[i],) + g_t.shape[1:], dtype=complex)
        g_h[:k] = sigma[:, None] * g_t[:k]
        gv, g = mesh_vjp(mv, sv, h, g_h)
        slv, slu = layout.mesh_slices[i]
        grad[slv] = gv
        grad[slu] = gu
    return value, grad


def phase_gradients(net: ScIpnn, inputs, labels) -> np.ndarray:
    return loss_and_gradient(net, inputs, labels)[1]


def predict(net: ScIpnn, inputs, chunk: int = 2048) -> np.ndarray:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=complex))
    preds = []
    for start in range(0, inputs.shape[0], chunk):
        preds.append(np.argmax(forward(net, inputs[start : start + chunk]), axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=int)


def count_correct(net: ScIpnn, data) -> int:
    return int(np.count_nonzero(predict(net, data.features) == np.asarray(data.labels)))


def evaluate(net: ScIpnn, data) -> float:
    """Fraction of argmax-correct predictions (ties go to the lowest class index)."""
    if len(data.labels) == 0:
        raise ValueError("empty dataset")
    return count_correct(net, data) / len(data.labels)


def dataset_loss(net: ScIpnn, data, chunk: int = 2048) -> float:
    total = 0.0
    n = len(data.labels)
    for start in range(0, n, chunk):
        sl = slice(start, start + chunk)
        total += loss(net, data.features[sl], data.labels[sl]) * len(data.labels[sl])
    return total / n


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 5
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True
    momentum: float = 0.0
    train_sigma: bool = True
    train_bias: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


def update_mask(net: ScIpnn, cfg: TrainConfig, mask=None) -> np.ndarray:
    """Per-parameter 0/1 multiplier applied to every gradient step."""
    layout = net.layout
    out = np.zeros(layout.size)
    if mask is None:
        out[layout.phase_section] = 1.0
    else:
        mask = np.asarray(mask)
        if mask.shape != (layout.n_phases,):
            raise ValueError(f"mask has shape {mask.shape}, expected ({layout.n_phases},)")
        out[layout.phase_section] = mask.astype(float)
    out[layout.sigma_section] = float(cfg.train_sigma)
    out[layout.bias_section] = float(cfg.train_bias)
    return out


def train(net: ScIpnn, data, cfg: TrainConfig, mask=None):
    """Mini-batch SGD on the phases (and gains), gradients gated by ``mask``.

    Returns ``(trained_net, history)``; ``history`` has one record per epoch
    plus an epoch-0 record for the starting point, each holding the loss and
    accuracy over the whole training set. Parameters whose update multiplier
    is zero are left bit-identical.
    """
    n = len(data.labels)
    if n == 0:
        raise ValueError("empty dataset")
    gate = update_mask(net, cfg, mask)
    live = gate != 0
    trained = net.copy()
    params = trained.params
    velocity = np.zeros_like(params)
    rng = np.random.default_rng(cfg.seed)
    phase = net.layout.phase_section
    features = np.asarray(data.features)
    labels = np.asarray(data.labels)

    history = [{"epoch": 0, "loss": dataset_loss(trained, data), "accuracy": evaluate(trained, data)}]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grad = loss_and_gradient(trained, features[idx], labels[idx])
            step = grad[live]
            if cfg.momentum:
                velocity[live] = cfg.momentum * velocity[live] + step
                step = velocity[live]
            params[live] -= cfg.learning_rate * step
            params[phase] = wrap_phase(params[phase])
        history.append({"epoch": epoch, "loss": dataset_loss(trained, data), "accuracy": evaluate(trained, data)})
    return trained, history
