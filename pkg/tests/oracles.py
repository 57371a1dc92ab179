"""Independent reference implementations used as test oracles.

Everything here is written from the documented formulas with dense matrices
in extended precision (numpy longdouble), sharing no code with the package.
"""
import numpy as np

LD = np.longdouble
CLD = np.clongdouble
PI_LD = LD("3.14159265358979323846264338327950288")


def mzi(theta, phi):
    theta, phi = LD(theta), LD(phi)
    half = theta / 2
    g = CLD(1j) * np.exp(CLD(1j) * half)
    e = np.exp(CLD(1j) * phi)
    return g * np.array(
        [[e * np.sin(half), np.cos(half)], [e * np.cos(half), -np.sin(half)]], dtype=CLD
    )


def clements_slots(n):
    return [(c, p) for c in range(n) for p in range(c % 2, n - 1, 2)]


def dense_mesh(n, phases):
    """Dense transfer matrix from an interleaved (theta, phi) ... psi vector."""
    phases = np.asarray(phases, dtype=LD)
    mat = np.eye(n, dtype=CLD)
    for j, (_, p) in enumerate(clements_slots(n)):
        block = np.eye(n, dtype=CLD)
        block[p : p + 2, p : p + 2] = mzi(phases[2 * j], phases[2 * j + 1])
        mat = block @ mat
    psi = phases[2 * len(clements_slots(n)) :]
    return np.diag(np.exp(CLD(1j) * psi)) @ mat


def split_params(dims, params):
    params = np.asarray(params, dtype=LD)
    pos = 0
    meshes = []
    for n, m in zip(dims[:-1], dims[1:]):
        v = params[pos : pos + n * n]
        pos += n * n
        u = params[pos : pos + m * m]
        pos += m * m
        meshes.append((v, u))
    gains = []
    for n, m in zip(dims[:-1], dims[1:]):
        gains.append(params[pos : pos + min(n, m)])
        pos += min(n, m)
    biases = params[pos : pos + len(dims) - 2]
    return meshes, gains, biases


def dense_weights(n, m, v_phases, u_phases, g):
    sig = np.zeros((m, n), dtype=CLD)
    k = min(m, n)
    sig[np.arange(k), np.arange(k)] = np.asarray(g, dtype=LD) ** 2
    return dense_mesh(m, u_phases) @ sig @ dense_mesh(n, v_phases)


def scores(dims, class_count, params, inputs):
    """(batch, class_count) detector scores, straight-line dense evaluation."""
    meshes, gains, biases = split_params(dims, params)
    a = np.asarray(inputs, dtype=CLD).T
    for i, (n, m) in enumerate(zip(dims[:-1], dims[1:])):
        z = dense_weights(n, m, meshes[i][0], meshes[i][1], gains[i]) @ a
        if i < len(dims) - 2:
            r = np.abs(z)
            b = biases[i]
            on = (r + b > 0) & (r > 0)
            a = np.where(on, (r + b) * z / np.where(on, r, 1), 0)
        else:
            a = z
    return (np.abs(a[:class_count]) ** 2).T


def loss(dims, class_count, params, inputs, labels):
    s = scores(dims, class_count, params, inputs)
    s = s - s.max(axis=1, keepdims=True)
    lse = np.log(np.exp(s).sum(axis=1))
    return np.mean(lse - s[np.arange(len(labels)), labels])


def central_fd(dims, class_count, params, inputs, labels, h=1e-5):
    params = np.asarray(params, dtype=LD)
    out = np.empty(params.size, dtype=LD)
    for k in range(params.size):
        up = params.copy()
        dn = params.copy()
        up[k] += LD(h)
        dn[k] -= LD(h)
        out[k] = (loss(dims, class_count, up, inputs, labels) - loss(dims, class_count, dn, inputs, labels)) / (2 * LD(h))
    return out


def population_std(values):
    values = [float(v) for v in values]
    mean = sum(values) / len(values)
    return (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
