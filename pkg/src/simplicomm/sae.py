"""Autoencoder models over featured complexes, their loss and metrics.

Three receivers share one protocol surface:

* ``SaeModel`` — convolutional encoder, bilinear structure decoder (the
  predicted operator is symmetrized and spectrally normalized before it
  drives the feature decoder), convolutional feature decoder.
* ``OracleScnModel`` — same encoder/feature decoder, but the receiver
  decodes features with the true normalized Laplacian (structure known).
* ``LaeModel`` — dense per-row autoencoder on raw features, no topology.

Models are built once and reused across rounds: parameter shapes depend
only on channel widths, never on simplex counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ReceivedEmbedding
from .nn import (BilinearLayer, DenseLayer, DivergenceError, NormalizeOp,
                 Parameter, SimplicialConvLayer, sgd_step)


class NoSignalError(RuntimeError):
    """Nothing was received this round; there is no loss to train on."""


@dataclass(frozen=True)
class Reconstruction:
    """Receiver outputs per degree: predicted operator and features."""

    laplacians: dict[int, np.ndarray]
    features: dict[int, np.ndarray]


@dataclass(frozen=True)
class Metrics:
    err: float
    acc_raw: float
    acc: float
    lap_err: float


class ScnStack:
    """Stacked simplicial convolutions; hidden layers activated, output linear."""

    def __init__(self, widths, order, rng, name=""):
        self.layers = [SimplicialConvLayer(widths[i], widths[i + 1], order, rng,
                                           name=f"{name}.{i}")
                       for i in range(len(widths) - 1)]

    def forward(self, op, x):
        h = x
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            h = layer.forward(op, h, activation=(i < last))
        return h

    def backward(self, upstream, operator_grad=False):
        g = upstream
        g_op = None
        for layer in reversed(self.layers):
            g, dop = layer.backward(g, operator_grad=operator_grad)
            if operator_grad:
                g_op = dop if g_op is None else g_op + dop
        return g, g_op

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


class DenseStack:
    """Row-wise dense layers with the same activation pattern as ScnStack."""

    def __init__(self, widths, rng, name=""):
        self.layers = [DenseLayer(widths[i], widths[i + 1], rng, name=f"{name}.{i}")
                       for i in range(len(widths) - 1)]

    def forward(self, x):
        h = x
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            h = layer.forward(h, activation=(i < last))
        return h

    def backward(self, upstream):
        g = upstream
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]


def _stack_widths(w_in, hidden, w_out, depth):
    return [w_in] + [hidden] * (depth - 1) + [w_out]


class SaeModel:
    """Transmitter encoder plus receiver structure/feature decoders."""

    structure_loss = True

    def __init__(self, k_max: int, feature_dim: int = 1, embed_order: int = 10,
                 hidden: int = 32, order: int = 3, depth: int = 3, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.k_max = k_max
        self.feature_dim = feature_dim
        self.embed_order = embed_order
        self.encoders: dict[int, ScnStack] = {}
        self.bilinear: dict[int, BilinearLayer] = {}
        self.decoders: dict[int, ScnStack] = {}
        for k in range(k_max + 1):
            self.encoders[k] = ScnStack(_stack_widths(feature_dim, hidden, embed_order, depth),
                                        order, rng, name=f"deg{k}.enc")
            self.bilinear[k] = BilinearLayer(embed_order, rng, name=f"deg{k}.lap")
            self.decoders[k] = ScnStack(_stack_widths(embed_order, hidden, feature_dim, depth),
                                        order, rng, name=f"deg{k}.dec")
        self._norm: dict[int, NormalizeOp] = {}

    def parameters(self):
        params = []
        for k in range(self.k_max + 1):
            params.extend(self.encoders[k].parameters())
            params.extend(self.bilinear[k].parameters())
            params.extend(self.decoders[k].parameters())
        return params

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grads(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def encode(self, laps: dict[int, np.ndarray], feats: dict[int, np.ndarray]
               ) -> dict[int, np.ndarray]:
        return {k: self.encoders[k].forward(laps[k], feats[k])
                for k in sorted(feats) if k <= self.k_max and feats[k].shape[0] > 0}

    def decode(self, received: ReceivedEmbedding,
               laps: dict[int, np.ndarray] | None = None) -> Reconstruction:
        """Structure first, then features diffused with the decoded operator.

        The reported operator is the symmetrized bilinear output, directly
        comparable to the unit-norm truth target; its spectrally normalized
        copy is what drives the feature decoder (stable filter powers).
        """
        laplacians = {}
        features = {}
        self._norm = {}
        for k in sorted(received.embeddings):
            v = received.embeddings[k]
            raw = self.bilinear[k].forward(v)
            sym = 0.5 * (raw + raw.T)
            norm_op = NormalizeOp()
            op = norm_op.forward(sym)
            self._norm[k] = norm_op
            laplacians[k] = sym
            features[k] = self.decoders[k].forward(op, v)
        return Reconstruction(laplacians=laplacians, features=features)

    def backward_decode(self, d_features: dict[int, np.ndarray],
                        d_laplacians: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
        """Receiver-side gradients; returns d(loss)/d(received embedding)."""
        d_v = {}
        for k in sorted(d_features):
            g_v, g_op = self.decoders[k].backward(d_features[k], operator_grad=True)
            g_sym = self._norm[k].backward(g_op) + d_laplacians[k]
            g_raw = 0.5 * (g_sym + g_sym.T)
            d_v[k] = g_v + self.bilinear[k].backward(g_raw)
        return d_v

    def backward_encode(self, d_v: dict[int, np.ndarray]) -> None:
        for k in sorted(d_v):
            self.encoders[k].backward(d_v[k])


class OracleScnModel:
    """Convolutional autoencoder with the true operator known at the receiver."""

    structure_loss = False

    def __init__(self, k_max: int, feature_dim: int = 1, embed_order: int = 10,
                 hidden: int = 32, order: int = 3, depth: int = 3, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.k_max = k_max
        self.feature_dim = feature_dim
        self.embed_order = embed_order
        self.encoders = {k: ScnStack(_stack_widths(feature_dim, hidden, embed_order, depth),
                                     order, rng, name=f"deg{k}.enc")
                         for k in range(k_max + 1)}
        self.decoders = {k: ScnStack(_stack_widths(embed_order, hidden, feature_dim, depth),
                                     order, rng, name=f"deg{k}.dec")
                         for k in range(k_max + 1)}

    def parameters(self):
        params = []
        for k in range(self.k_max + 1):
            params.extend(self.encoders[k].parameters())
            params.extend(self.decoders[k].parameters())
        return params

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def zero_grads(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def encode(self, laps, feats):
        return {k: self.encoders[k].forward(laps[k], feats[k])
                for k in sorted(feats) if k <= self.k_max and feats[k].shape[0] > 0}

    def decode(self, received: ReceivedEmbedding, laps=None) -> Reconstruction:
        if laps is None:
            raise ValueError("oracle decoding needs the true operators")
        features = {k: self.decoders[k].forward(laps[k], received.embeddings[k])
                    for k in sorted(received.embeddings)}
        laplacians = {k: laps[k].copy() for k in features}
        return Reconstruction(laplacians=laplacians, features=features)

    def backward_decode(self, d_features, d_laplacians):
        return {k: self.decoders[k].backward(d_features[k])[0]
                for k in sorted(d_features)}

    def backward_encode(self, d_v):
        for k in sorted(d_v):
            self.encoders[k].backward(d_v[k])


class LaeModel:
    """Dense per-row autoencoder on raw features; no structural pathway."""

    structure_loss = False

    def __init__(self, k_max: int, feature_dim: int = 1, embed_order: int = 10,
                 hidden: int = 32, depth: int = 3, seed: int = 0, order: int = 0):
        rng = np.random.default_rng(seed)
        self.k_max = k_max
        self.feature_dim = feature_dim
        self.embed_order = embed_order
        self.encoders = {k: DenseStack(_stack_widths(feature_dim, hidden, embed_order, depth),
                                       rng, name=f"deg{k}.enc")
                         for k in range(k_max + 1)}
        self.decoders = {k: DenseStack(_stack_widths(embed_order, hidden, feature_dim, depth),
                                       rng, name=f"deg{k}.dec")
                         for k in range(k_max + 1)}

    def parameters(self):
        params = []
        for k in range(self.k_max + 1):
            params.extend(self.encoders[k].parameters())
            params.extend(self.decoders[k].parameters())
        return params

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def zero_grads(self):
        for p in self.parameters():
            p.grad[...] = 0.0

    def encode(self, laps, feats):
        return {k: self.encoders[k].forward(feats[k])
                for k in sorted(feats) if k <= self.k_max and feats[k].shape[0] > 0}

    def decode(self, received: ReceivedEmbedding, laps=None) -> Reconstruction:
        features = {k: self.decoders[k].forward(received.embeddings[k])
                    for k in sorted(received.embeddings)}
        laplacians = {k: np.zeros((x.shape[0], x.shape[0])) for k, x in features.items()}
        return Reconstruction(laplacians=laplacians, features=features)

    def backward_decode(self, d_features, d_laplacians):
        return {k: self.decoders[k].backward(d_features[k]) for k in sorted(d_features)}

    def backward_encode(self, d_v):
        for k in sorted(d_v):
            self.encoders[k].backward(d_v[k])


def loss_and_grads(recon: Reconstruction, feats: dict[int, np.ndarray],
                   laps: dict[int, np.ndarray], received: ReceivedEmbedding,
                   lambda_topology: float = 1.0, structure_loss: bool = True):
    """Mean squared error over received simplices, plus its gradients.

    Feature rows of received simplices contribute fully; operator entries
    contribute only between pairs of received simplices.  Everything is
    averaged by the total received-simplex count across degrees.
    """
    total_received = sum(int(received.received_mask(k).sum()) for k in recon.features)
    if total_received == 0:
        raise NoSignalError("no received simplices this round")
    loss = 0.0
    d_feats = {}
    d_laps = {}
    for k in sorted(recon.features):
        m = received.received_mask(k).astype(float)
        diff = (recon.features[k] - feats[k]) * m[:, None]
        loss += float(np.sum(diff * diff))
        d_feats[k] = 2.0 * diff / total_received
        if structure_loss:
            pair = np.outer(m, m)
            ldiff = (recon.laplacians[k] - laps[k]) * pair
            loss += lambda_topology * float(np.sum(ldiff * ldiff))
            d_laps[k] = 2.0 * lambda_topology * ldiff / total_received
        else:
            d_laps[k] = np.zeros_like(recon.laplacians[k])
    return loss / total_received, d_feats, d_laps


def evaluate(recon: Reconstruction, feats: dict[int, np.ndarray],
             laps: dict[int, np.ndarray], masks: dict[int, np.ndarray]) -> Metrics:
    """Error, accuracy and operator error over the masked simplices.

    Accuracy is 1 - sum|pred - truth| / sum(truth) over masked feature
    rows, clamped to [0, 1] (the raw value is reported alongside); an
    all-zero truth makes accuracy undefined (NaN) while the squared error
    stays valid.  Operator error averages |pred - truth| over entries
    whose row or column is masked.
    """
    rows_total = sum(int(np.asarray(m).sum()) for m in masks.values())
    if rows_total == 0:
        raise ValueError("empty evaluation mask")
    sq_err = 0.0
    abs_err = 0.0
    truth_sum = 0.0
    lap_abs = 0.0
    lap_count = 0
    for k, m in sorted(masks.items()):
        m = np.asarray(m, dtype=bool)
        if not m.any():
            continue
        diff = recon.features[k][m] - feats[k][m]
        sq_err += float(np.sum(diff * diff))
        abs_err += float(np.sum(np.abs(diff)))
        truth_sum += float(np.sum(feats[k][m]))
        pair = m[:, None] | m[None, :]
        lap_abs += float(np.sum(np.abs(recon.laplacians[k] - laps[k])[pair]))
        lap_count += int(pair.sum())
    err = sq_err / rows_total
    acc_raw = 1.0 - abs_err / truth_sum if truth_sum > 0 else float("nan")
    acc = min(1.0, max(0.0, acc_raw)) if np.isfinite(acc_raw) else float("nan")
    lap_err = lap_abs / lap_count if lap_count else float("nan")
    return Metrics(err=err, acc_raw=acc_raw, acc=acc, lap_err=lap_err)


def train_step(model, laps: dict[int, np.ndarray], feats: dict[int, np.ndarray],
               channel_fn, lr: float, lambda_topology: float = 1.0):
    """One communication round: encode, transmit, decode, loss, update.

    The encoder update uses exactly the loss gradient at the received
    embedding rows (the feedback a receiver could transmit); rows that
    went missing or were distorted contribute no encoder gradient.  A
    non-finite loss aborts before any parameter is touched.
    """
    v = model.encode(laps, feats)
    received = channel_fn(v)
    recon = model.decode(received, laps)
    loss, d_feats, d_laps = loss_and_grads(recon, feats, laps, received,
                                           lambda_topology=lambda_topology,
                                           structure_loss=model.structure_loss)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss!r}")
    d_v = model.backward_decode(d_feats, d_laps)
    d_v_fed_back = {k: g * received.received_mask(k)[:, None].astype(float)
                    for k, g in d_v.items()}
    model.backward_encode(d_v_fed_back)
    sgd_step(model.parameters(), lr)
    return loss, recon, received
