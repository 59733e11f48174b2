"""Lossy link simulation: AWGN at a target SNR plus row-level degradation.

Noise is applied first; degradation then removes (zeroes) or distorts
(replaces with scaled random values) a fixed fraction of embedding rows
per degree, so received rows stay bit-identical to the noisy transmission
and missing rows are exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RECEIVED = 0
MISSING = 1
DISTORTED = 2

MODES = ("missing", "distorted", "none")


class ZeroSignalError(RuntimeError):
    """All-zero transmission with finite SNR: noise power is undefined."""


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = math.inf
    p: float = 0.0
    mode: str = "missing"
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"degradation fraction {self.p} outside [0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class ReceivedEmbedding:
    """Post-channel per-degree latent rows and their row status masks."""

    embeddings: dict[int, np.ndarray]
    masks: dict[int, np.ndarray]

    def received_mask(self, k: int) -> np.ndarray:
        return self.masks[k] == RECEIVED

    def eval_mask(self, k: int) -> np.ndarray:
        """Rows that went missing or were distorted in transit."""
        return self.masks[k] != RECEIVED


def signal_power(embeddings: dict[int, np.ndarray]) -> float:
    """Mean square over every entry of the flattened transmission."""
    total = sum(float(np.sum(v * v)) for v in embeddings.values())
    count = sum(v.size for v in embeddings.values())
    return total / count if count else 0.0


def awgn(embeddings: dict[int, np.ndarray], snr_db: float, rng) -> dict[int, np.ndarray]:
    """Add white Gaussian noise calibrated to the empirical signal power."""
    if not embeddings or all(v.size == 0 for v in embeddings.values()):
        raise ValueError("empty transmission")
    if math.isinf(snr_db):
        return {k: v.copy() for k, v in embeddings.items()}
    power = signal_power(embeddings)
    if power == 0.0:
        raise ZeroSignalError("all-zero embedding with finite SNR")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    return {k: v + rng.normal(0.0, sigma, size=v.shape) for k, v in embeddings.items()}


def degrade(embeddings: dict[int, np.ndarray], p: float, mode: str, rng) -> ReceivedEmbedding:
    """Mask round(p * rows) rows per degree: zeroed or replaced with noise.

    Distorted rows are filled with zero-mean Gaussian values scaled to the
    degree's empirical standard deviation so they are magnitude-comparable
    to the signal.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"degradation fraction {p} outside [0, 1]")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    out: dict[int, np.ndarray] = {}
    masks: dict[int, np.ndarray] = {}
    for k in sorted(embeddings):
        v = embeddings[k].copy()
        n = v.shape[0]
        mask = np.full(n, RECEIVED, dtype=np.int8)
        n_hit = int(round(p * n)) if mode != "none" else 0
        if n_hit > 0:
            hit = rng.choice(n, size=n_hit, replace=False)
            if mode == "missing":
                v[hit] = 0.0
                mask[hit] = MISSING
            else:
                scale = float(v.std())
                v[hit] = rng.normal(0.0, scale if scale > 0 else 1.0,
                                    size=(n_hit, v.shape[1]))
                mask[hit] = DISTORTED
        out[k] = v
        masks[k] = mask
    return ReceivedEmbedding(embeddings=out, masks=masks)


def transmit(embeddings: dict[int, np.ndarray], config: ChannelConfig,
             rng=None) -> ReceivedEmbedding:
    """AWGN followed by degradation, as one channel use."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    noisy = awgn(embeddings, config.snr_db, rng)
    return degrade(noisy, config.p, config.mode, rng)
