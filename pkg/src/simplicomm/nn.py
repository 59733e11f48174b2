"""Minimal differentiable layers: simplicial convolution, bilinear and
dense maps, LeakyReLU, SGD and a finite-difference gradient checker.

Every layer caches its forward state and implements an exact reverse-mode
backward; parameter gradients accumulate until ``sgd_step`` zeroes them.
All math is double precision and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complexes import NORMALIZE_EPS, power_iteration_norm

LEAKY_SLOPE = 0.01


class DivergenceError(RuntimeError):
    """A gradient or loss went non-finite; the training round must abort."""


def leaky_relu(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def leaky_relu_grad(x):
    # slope at exactly 0 is the negative-side slope
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, 1.0, LEAKY_SLOPE)


class Parameter:
    """Trainable tensor with an accumulating gradient slot."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name=""):
        self.value = np.array(value, dtype=float)
        self.grad = np.zeros_like(self.value)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name or 'unnamed'}, shape={self.value.shape})"


def glorot_uniform(shape, rng):
    fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], shape[0])
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


def sgd_step(params, lr: float) -> None:
    """value <- value - lr * grad for every parameter, then zero grads.

    All gradients are validated first, so a divergence aborts before any
    parameter has been touched.
    """
    params = list(params)
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(f"non-finite gradient in {p.name or 'parameter'}")
    for p in params:
        p.value -= lr * p.grad
        p.grad[...] = 0.0


class SimplicialConvLayer:
    """Polynomial filter in a (normalized) Laplacian applied to cochain features.

    forward: Y = act(sum_i  L^i X W_i + b), powers built by repeated
    multiplication.  backward returns the input gradient and, on request,
    the gradient with respect to the operator L itself (needed when L is a
    decoded, trainable quantity).
    """

    def __init__(self, in_ch: int, out_ch: int, order: int = 3, rng=None, name=""):
        if order < 0:
            raise ValueError("polynomial order must be >= 0")
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.order = order
        self.name = name
        # the layer sums order+1 filter terms, so its effective fan-in is
        # (order+1) * in_ch; using it keeps output variance flat at init
        r = np.sqrt(6.0 / ((order + 1) * in_ch + out_ch))
        self.weights = [Parameter(rng.uniform(-r, r, size=(in_ch, out_ch)), f"{name}.W{i}")
                        for i in range(order + 1)]
        self.bias = Parameter(np.zeros(out_ch), f"{name}.b")
        self._cache = None

    def parameters(self):
        return [*self.weights, self.bias]

    def forward(self, op, x, activation: bool = True):
        op = np.asarray(op, dtype=float)
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_ch:
            raise ValueError(f"expected input with {self.in_ch} channels, got {x.shape}")
        if op.shape != (x.shape[0], x.shape[0]):
            raise ValueError(f"operator shape {op.shape} does not match {x.shape[0]} rows")
        powers = [x]
        for _ in range(self.order):
            powers.append(op @ powers[-1])
        z = powers[0] @ self.weights[0].value
        for i in range(1, self.order + 1):
            z += powers[i] @ self.weights[i].value
        z += self.bias.value
        self._cache = (op, powers, z, activation)
        return leaky_relu(z) if activation else z

    def backward(self, upstream, operator_grad: bool = False):
        """Returns (grad_x, grad_op); grad_op is None unless requested."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        op, powers, z, activation = self._cache
        dz = upstream * leaky_relu_grad(z) if activation else np.asarray(upstream, dtype=float)
        self.bias.grad += dz.sum(axis=0)
        pbar = []
        for i, w in enumerate(self.weights):
            w.grad += powers[i].T @ dz
            pbar.append(dz @ w.value.T)
        dop = np.zeros_like(op) if operator_grad else None
        for i in range(self.order, 0, -1):
            if operator_grad:
                dop += pbar[i] @ powers[i - 1].T
            pbar[i - 1] += op.T @ pbar[i]
        return pbar[0], dop


class BilinearLayer:
    """Pairwise map z_ij = act(v_i^T W v_j + b) over all latent-row pairs."""

    def __init__(self, dim: int, rng=None, name=""):
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.dim = dim
        self.name = name
        self.weight = Parameter(glorot_uniform((dim, dim), rng), f"{name}.W")
        self.bias = Parameter(0.0, f"{name}.b")
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, v, activation: bool = True):
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ValueError(f"expected latent width {self.dim}, got {v.shape}")
        z = v @ self.weight.value @ v.T + self.bias.value
        self._cache = (v, z, activation)
        return leaky_relu(z) if activation else z

    def backward(self, upstream):
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        v, z, activation = self._cache
        dz = upstream * leaky_relu_grad(z) if activation else np.asarray(upstream, dtype=float)
        self.bias.grad += dz.sum()
        self.weight.grad += v.T @ dz @ v
        return dz @ v @ self.weight.value.T + dz.T @ v @ self.weight.value


class DenseLayer:
    """Row-wise affine map with optional activation."""

    def __init__(self, in_ch: int, out_ch: int, rng=None, name=""):
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.name = name
        self.weight = Parameter(glorot_uniform((in_ch, out_ch), rng), f"{name}.W")
        self.bias = Parameter(np.zeros(out_ch), f"{name}.b")
        self._cache = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x, activation: bool = True):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_ch:
            raise ValueError(f"expected input with {self.in_ch} channels, got {x.shape}")
        z = x @ self.weight.value + self.bias.value
        self._cache = (x, z, activation)
        return leaky_relu(z) if activation else z

    def backward(self, upstream):
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x, z, activation = self._cache
        dz = upstream * leaky_relu_grad(z) if activation else np.asarray(upstream, dtype=float)
        self.bias.grad += dz.sum(axis=0)
        self.weight.grad += x.T @ dz
        return dz @ self.weight.value.T


class NormalizeOp:
    """Differentiable spectral normalization A -> A / (sigma(A) + eps).

    The forward pass is the same power iteration used for true Laplacians;
    the backward pass is exact reverse-mode through the iteration trace,
    so finite differences of the implemented map match analytically.
    """

    def __init__(self):
        self._cache = None

    def forward(self, a):
        a = np.asarray(a, dtype=float)
        sigma, iterates, norms = power_iteration_norm(a, trace=True)
        self._cache = (a, sigma, iterates, norms)
        if sigma == 0.0:
            return a.copy()
        return a / (sigma + NORMALIZE_EPS)

    def backward(self, upstream):
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        a, sigma, iterates, norms = self._cache
        if sigma == 0.0:
            return np.asarray(upstream, dtype=float).copy()
        denom = sigma + NORMALIZE_EPS
        da = np.asarray(upstream, dtype=float) / denom
        sigma_bar = -float(np.sum(upstream * a)) / denom**2
        # reverse through: v_t = w_t / n_t, w_t = A v_{t-1}, sigma = n_T
        steps = len(norms)
        wbar = sigma_bar * iterates[steps]  # d sigma / d w_T = v_T
        for t in range(steps, 0, -1):
            da += np.outer(wbar, iterates[t - 1])
            vbar = a.T @ wbar
            if t - 1 == 0:
                break
            v = iterates[t - 1]
            n = norms[t - 2]
            wbar = (vbar - np.dot(vbar, v) * v) / n
        return da


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric operator."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def spectral_decompose(lap) -> SpectralDecomposition:
    lap = np.asarray(lap, dtype=float)
    scale = max(1.0, float(np.max(np.abs(lap))) if lap.size else 1.0)
    if np.max(np.abs(lap - lap.T), initial=0.0) > 1e-9 * scale:
        raise ValueError("operator is not symmetric")
    evals, evecs = np.linalg.eigh(lap)
    return SpectralDecomposition(eigenvalues=evals, eigenvectors=evecs)


def spectral_filter_apply(decomp: SpectralDecomposition, weights, c):
    """Apply the polynomial filter in the Fourier basis (validation path).

    Equivalent to sum_i w_i L^i c for single-channel c.
    """
    c = np.asarray(c, dtype=float)
    flat = c.ndim == 1
    col = c[:, None] if flat else c
    if col.shape[1] != 1:
        raise ValueError("spectral path supports a single channel")
    if col.shape[0] != decomp.eigenvectors.shape[0]:
        raise ValueError("cochain length does not match the decomposition")
    lam = decomp.eigenvalues
    response = np.zeros_like(lam)
    power = np.ones_like(lam)
    for w in weights:
        response += float(w) * power
        power = power * lam
    out = decomp.eigenvectors @ (response[:, None] * (decomp.eigenvectors.T @ col))
    return out[:, 0] if flat else out


def grad_check(f, arrays, h: float = 1e-5, denom_floor: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f()`` recomputes (loss, grads) from the current contents of
    ``arrays`` (grads aligned with arrays); entries are perturbed in
    place.  The denominator floor keeps near-zero coordinate pairs from
    amplifying float noise into spurious errors.
    """
    _, grads = f()
    grads = [np.array(g, dtype=float) for g in grads]
    worst = 0.0
    for arr, g in zip(arrays, grads):
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = float(arr[idx])
            arr[idx] = orig + h
            lp, _ = f()
            arr[idx] = orig - h
            lm, _ = f()
            arr[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            an = float(np.asarray(g)[idx])
            err = abs(fd - an) / max(abs(fd), abs(an), denom_floor)
            worst = max(worst, err)
            it.iternext()
    return worst


def save_params(path, named_params: dict[str, Parameter]) -> None:
    """Checkpoint: named parameter tensors in a single npz archive."""
    np.savez(path, **{name: p.value for name, p in named_params.items()})


def load_params(path, named_params: dict[str, Parameter]) -> None:
    """Restore values in place; shapes and names must match the registry."""
    with np.load(path) as data:
        missing = set(named_params) - set(data.files)
        extra = set(data.files) - set(named_params)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in named_params.items():
            stored = data[name]
            if stored.shape != p.value.shape:
                raise ValueError(f"shape mismatch for {name}: {stored.shape} vs {p.value.shape}")
            p.value[...] = stored
            p.grad[...] = 0.0
