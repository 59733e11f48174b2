"""Communication rounds and experiment sweeps.

Each round samples a fresh complex by random walk, encodes it, pushes the
embedding through the channel, decodes, trains on the received simplices
and evaluates on both the received and the degraded subsets.  The walk
stream is seeded independently of the channel stream, so grid points
sharing a seed see identical complexes (paired comparisons).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import sae
from .channel import ZeroSignalError, awgn, degrade
from .complexes import hodge_laplacian, normalize_laplacian
from .corpus import Corpus, build_coauthorship_complex, sample_walk
from .nn import DivergenceError

METHODS = ("sae", "lae", "scn_oracle")

# independent RNG streams per (experiment seed, stream, round)
STREAM_WALK = 0
STREAM_CHANNEL = 1
STREAM_INIT = 2

# cochains are rescaled so their mean magnitude hits this value before
# encoding; keeps the quadratic structure decoder in its stable regime
FEATURE_TARGET_MEAN = 1.0 / 3.0

NAN = float("nan")


@dataclass(frozen=True)
class ExperimentConfig:
    rounds: int = 500
    embed_orders: tuple[int, ...] = (1, 5, 10)
    snr_grid: tuple[float, ...] = (5.0, 10.0, 20.0)
    p_grid: tuple[float, ...] = (0.1, 0.3, 0.5)
    modes: tuple[str, ...] = ("missing",)
    methods: tuple[str, ...] = ("sae", "lae", "scn_oracle")
    seeds: tuple[int, ...] = (0,)
    learning_rate: float = 1e-3
    lambda_topology: float = 1.0
    conv_order: int = 3
    depth: int = 3
    hidden: int = 32
    k_max: int = 2
    feature_dim: int = 1
    walk_papers: int = 80
    walk_citation_range: tuple[int, int] = (1, 10)
    walk_use_references: bool = True
    feature_scale: str = "adaptive"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        for name in ("embed_orders", "snr_grid", "p_grid", "modes", "methods", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.feature_scale not in ("adaptive", "none"):
            raise ValueError(f"feature_scale must be 'adaptive' or 'none'")


@dataclass(frozen=True)
class GridPoint:
    method: str
    seed: int
    embed_order: int
    snr_db: float
    p: float
    mode: str


@dataclass
class RoundLog:
    round: int
    loss: float = NAN
    acc_received: float = NAN
    acc_eval_raw: float = NAN
    acc_eval: float = NAN
    err_eval: float = NAN
    lap_err_eval: float = NAN
    counts: tuple[int, ...] = ()
    wall_time: float = 0.0
    skipped: bool = False


def _round_rng(seed: int, stream: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, t]))


def model_seed(seed: int, method: str, embed_order: int) -> np.random.SeedSequence:
    """Initialization entropy; independent of channel settings for pairing."""
    return np.random.SeedSequence([seed, STREAM_INIT, METHODS.index(method), embed_order])


def make_model(method: str, cfg: ExperimentConfig, embed_order: int, seed: int):
    entropy = model_seed(seed, method, embed_order)
    kwargs = dict(k_max=cfg.k_max, feature_dim=cfg.feature_dim,
                  embed_order=embed_order, hidden=cfg.hidden,
                  order=cfg.conv_order, depth=cfg.depth, seed=entropy)
    if method == "sae":
        return sae.SaeModel(**kwargs)
    if method == "lae":
        return sae.LaeModel(**kwargs)
    if method == "scn_oracle":
        return sae.OracleScnModel(**kwargs)
    raise ValueError(f"unknown method {method!r}")


def feature_scale_factors(cochains: dict[int, np.ndarray], mode: str) -> dict[int, float]:
    """Per-degree multipliers bringing mean |cochain| to the target level.

    Whitening per degree keeps the pooled squared-error loss from being
    dominated by the degree with the largest raw citation sums.
    """
    if mode == "none":
        return {k: 1.0 for k in cochains}
    scales = {}
    for k, x in cochains.items():
        mean = float(np.abs(x).mean()) if x.size else 0.0
        scales[k] = FEATURE_TARGET_MEAN / mean if mean > 0 else 1.0
    return scales


def sample_round_complex(corpus: Corpus, cfg: ExperimentConfig, seed: int, t: int):
    """The walk and featured complex for round t (channel-independent)."""
    walk_rng = _round_rng(seed, STREAM_WALK, t)
    sample = sample_walk(corpus, n_papers=cfg.walk_papers,
                         citation_range=cfg.walk_citation_range,
                         rng=walk_rng, use_references=cfg.walk_use_references)
    return build_coauthorship_complex(sample, cfg.k_max)


def run_round(model, corpus: Corpus, cfg: ExperimentConfig, snr_db: float,
              p: float, mode: str, seed: int, t: int) -> RoundLog:
    """One communication round: sample, transmit, train, evaluate."""
    t0 = time.perf_counter()
    cx, cochains = sample_round_complex(corpus, cfg, seed, t)
    counts = cx.counts()
    if not counts or all(c < 2 for c in counts):
        return RoundLog(round=t, counts=counts, skipped=True,
                        wall_time=time.perf_counter() - t0)

    laps = {k: normalize_laplacian(hodge_laplacian(cx, k))
            for k in range(cx.dimension + 1) if counts[k] > 0}
    scale = feature_scale_factors(cochains, cfg.feature_scale)
    feats = {k: x * scale[k] for k, x in cochains.items()}

    chan_rng = _round_rng(seed, STREAM_CHANNEL, t)

    def channel_fn(v):
        return degrade(awgn(v, snr_db, chan_rng), p, mode, chan_rng)

    try:
        loss, recon, received = sae.train_step(model, laps, feats, channel_fn,
                                               lr=cfg.learning_rate,
                                               lambda_topology=cfg.lambda_topology)
    except (ZeroSignalError, sae.NoSignalError, DivergenceError):
        model.zero_grads()
        return RoundLog(round=t, counts=counts, skipped=True,
                        wall_time=time.perf_counter() - t0)

    # metrics in original cochain units (accuracy is scale-invariant)
    recon_true = sae.Reconstruction(
        laplacians=recon.laplacians,
        features={k: x / scale[k] for k, x in recon.features.items()})
    recv_masks = {k: received.received_mask(k) for k in recon.features}
    eval_masks = {k: received.eval_mask(k) for k in recon.features}

    log = RoundLog(round=t, loss=loss, counts=counts)
    if any(m.any() for m in recv_masks.values()):
        log.acc_received = sae.evaluate(recon_true, cochains, laps, recv_masks).acc
    if any(m.any() for m in eval_masks.values()):
        m_eval = sae.evaluate(recon_true, cochains, laps, eval_masks)
        log.acc_eval_raw = m_eval.acc_raw
        log.acc_eval = m_eval.acc
        log.err_eval = m_eval.err
        log.lap_err_eval = m_eval.lap_err
    log.wall_time = time.perf_counter() - t0
    return log


def run_grid_point(point: GridPoint, corpus: Corpus, cfg: ExperimentConfig,
                   progress=None) -> list[RoundLog]:
    model = make_model(point.method, cfg, point.embed_order, point.seed)
    logs = []
    for t in range(cfg.rounds):
        log = run_round(model, corpus, cfg, point.snr_db, point.p, point.mode,
                        point.seed, t)
        logs.append(log)
        if progress is not None:
            progress(point, log)
    return logs


def grid_points(cfg: ExperimentConfig) -> list[GridPoint]:
    return [GridPoint(method=m, seed=s, embed_order=v, snr_db=snr, p=p, mode=mode)
            for m in cfg.methods
            for s in cfg.seeds
            for v in cfg.embed_orders
            for snr in cfg.snr_grid
            for p in cfg.p_grid
            for mode in cfg.modes]


def run_experiment(cfg: ExperimentConfig, corpus: Corpus, max_workers: int = 1,
                   progress=None) -> dict[GridPoint, list[RoundLog]]:
    """Independent fresh-model training runs for every grid point.

    A failed point is recorded as an exception value rather than aborting
    the remaining points.
    """
    points = grid_points(cfg)
    results: dict[GridPoint, list[RoundLog] | Exception] = {}
    if max_workers <= 1:
        for pt in points:
            try:
                results[pt] = run_grid_point(pt, corpus, cfg, progress)
            except Exception as exc:  # noqa: BLE001 - reported in the manifest
                results[pt] = exc
        return results
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pt: pool.submit(run_grid_point, pt, corpus, cfg, progress)
                   for pt in points}
        for pt, fut in futures.items():
            try:
                results[pt] = fut.result()
            except Exception as exc:  # noqa: BLE001
                results[pt] = exc
    return results
