"""Nonlinear predictive codebooks built from small MLPs.

Every cluster of a speaker's frames gets its own 10-4-2-1 perceptron
(tanh hidden layers, linear output) predicting the next sample from the
previous ten.  Nets are trained full-batch with Levenberg-Marquardt from
several starts; codebooks are refined by re-clustering frames on residual
MAD and retraining, with the previous weights kept as one of the starts.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

TOPOLOGY = (10, 4, 2, 1)
N_PARAMS = 57  # 40+4 + 8+2 + 2+1

LM_LAMBDA0 = 1e-3
LM_FACTOR = 10.0
LM_CEILING = 1e10
LM_MAX_RETRIES = 10


@dataclass
class MlpPredictor:
    W1: np.ndarray  # 4 x 10
    b1: np.ndarray  # 4
    W2: np.ndarray  # 2 x 4
    b2: np.ndarray  # 2
    W3: np.ndarray  # 1 x 2
    b3: np.ndarray  # 1

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(),
                               self.b2, self.W3.ravel(), self.b3])

    @classmethod
    def from_vector(cls, theta: np.ndarray) -> "MlpPredictor":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (N_PARAMS,):
            raise ValueError(f"parameter vector must have {N_PARAMS} entries")
        return cls(W1=theta[0:40].reshape(4, 10).copy(),
                   b1=theta[40:44].copy(),
                   W2=theta[44:52].reshape(2, 4).copy(),
                   b2=theta[52:54].copy(),
                   W3=theta[54:56].reshape(1, 2).copy(),
                   b3=theta[56:57].copy())

    @classmethod
    def zeros(cls) -> "MlpPredictor":
        return cls.from_vector(np.zeros(N_PARAMS))


def init_mlp(rng: np.random.Generator) -> MlpPredictor:
    """Uniform [-0.5, 0.5] init scaled by 1/sqrt(fan-in) per layer."""
    def layer(rows, cols):
        scale = 1.0 / np.sqrt(cols)
        w = rng.uniform(-0.5, 0.5, (rows, cols)) * scale
        b = rng.uniform(-0.5, 0.5, rows) * scale
        return w, b

    W1, b1 = layer(4, 10)
    W2, b2 = layer(2, 4)
    W3, b3 = layer(1, 2)
    return MlpPredictor(W1, b1, W2, b2, W3, b3)


def mlp_forward(net: MlpPredictor, x: np.ndarray) -> np.ndarray | float:
    """Predicted sample(s) for context row(s) x; scalar for a single context."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    h1 = np.tanh(X @ net.W1.T + net.b1)
    h2 = np.tanh(h1 @ net.W2.T + net.b2)
    y = (h2 @ net.W3.T + net.b3).ravel()
    return float(y[0]) if single else y


def mlp_output_and_jacobian(net: MlpPredictor, X: np.ndarray
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Batch output and the (N x 57) Jacobian of the output w.r.t. parameters.

    Column order matches MlpPredictor.to_vector.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    h1 = np.tanh(X @ net.W1.T + net.b1)          # N x 4
    h2 = np.tanh(h1 @ net.W2.T + net.b2)         # N x 2
    y = (h2 @ net.W3.T + net.b3).ravel()

    d2 = (1.0 - h2 * h2) * net.W3[0]             # N x 2
    d1 = (d2 @ net.W2) * (1.0 - h1 * h1)         # N x 4

    J = np.empty((n, N_PARAMS))
    J[:, 0:40] = (d1[:, :, None] * X[:, None, :]).reshape(n, 40)
    J[:, 40:44] = d1
    J[:, 44:52] = (d2[:, :, None] * h1[:, None, :]).reshape(n, 8)
    J[:, 52:54] = d2
    J[:, 54:56] = h2
    J[:, 56] = 1.0
    return y, J


def frame_context_matrix(frames) -> tuple[np.ndarray, np.ndarray]:
    """Prediction pairs from frames: contexts (most recent sample first) and targets.

    Each frame contributes exactly frame_len pairs; its history supplies
    the contexts for the first samples.
    """
    p = TOPOLOGY[0]
    xs, ys = [], []
    for frame in frames:
        if len(frame.history) < p:
            raise ValueError(f"frame history shorter than {p}")
        ext = np.concatenate([frame.history[-p:], frame.samples])
        windows = sliding_window_view(ext, p)[: len(frame.samples)]
        xs.append(windows[:, ::-1])
        ys.append(frame.samples)
    return np.concatenate(xs), np.concatenate(ys)


def mlp_residual(frame, net: MlpPredictor) -> tuple[np.ndarray, float]:
    """Residual of one frame under the net, and its mean absolute value."""
    X, y = frame_context_matrix([frame])
    e = y - mlp_forward(net, X)
    return e, float(np.mean(np.abs(e)))


def net_frame_mads(net: MlpPredictor, X: np.ndarray, y: np.ndarray,
                   frame_len: int) -> np.ndarray:
    """Per-frame residual MAD for pre-built prediction pairs."""
    e = y - mlp_forward(net, X)
    return np.mean(np.abs(e).reshape(-1, frame_len), axis=1)


@dataclass
class LmResult:
    net: MlpPredictor
    mse_trace: np.ndarray  # initial MSE followed by each accepted step's MSE
    stalled: bool = False


def _mse(net: MlpPredictor, X: np.ndarray, y: np.ndarray) -> float:
    e = y - mlp_forward(net, X)
    return float(np.mean(e * e))


def lm_train(net: MlpPredictor, X: np.ndarray, y: np.ndarray,
             epochs: int = 8, lambda0: float = LM_LAMBDA0) -> LmResult:
    """Full-batch Levenberg-Marquardt.

    One epoch is one Jacobian build plus the damping retry loop: a step is
    accepted only if it lowers the MSE (lambda /= 10), otherwise lambda is
    raised and the solve retried.  With the damping at its ceiling and no
    usable step, the current net comes back flagged stalled.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    theta = net.to_vector()
    current = MlpPredictor.from_vector(theta)
    mse = _mse(current, X, y)
    trace = [mse]
    lam = lambda0
    stalled = False
    eye = np.eye(N_PARAMS)

    for _ in range(epochs):
        yhat, J = mlp_output_and_jacobian(current, X)
        r = y - yhat
        jtj = J.T @ J
        jtr = J.T @ r
        accepted = False
        for _attempt in range(LM_MAX_RETRIES + 1):
            try:
                delta = np.linalg.solve(jtj + lam * eye, jtr)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                candidate = MlpPredictor.from_vector(theta + delta)
                cand_mse = _mse(candidate, X, y)
                if np.isfinite(cand_mse) and cand_mse < mse:
                    theta = theta + delta
                    current = candidate
                    mse = cand_mse
                    trace.append(mse)
                    lam = max(lam / LM_FACTOR, 1e-12)
                    accepted = True
                    break
            lam *= LM_FACTOR
            if lam > LM_CEILING:
                break
        if not accepted and lam > LM_CEILING:
            stalled = True
            break
    return LmResult(net=current, mse_trace=np.array(trace), stalled=stalled)


def multistart_train(X: np.ndarray, y: np.ndarray,
                     seed_seq: np.random.SeedSequence,
                     prev: MlpPredictor | None = None,
                     epochs: int = 8, n_random: int = 4
                     ) -> tuple[MlpPredictor, float]:
    """Train several random starts (plus the previous weights when given)
    and keep the one with the lowest final training MSE."""
    children = seed_seq.spawn(n_random)
    candidates = [init_mlp(np.random.default_rng(child)) for child in children]
    if prev is not None:
        candidates.append(prev)
    best_net, best_mse = None, np.inf
    for cand in candidates:
        result = lm_train(cand, X, y, epochs=epochs)
        final = float(result.mse_trace[-1])
        if final < best_mse:
            best_net, best_mse = result.net, final
    return best_net, best_mse


@dataclass
class NeuralCodebook:
    bits: int
    predictors: list[MlpPredictor]
    source_bits: int
    lloyd_iteration: int

    def __post_init__(self):
        if len(self.predictors) != 2 ** self.bits:
            raise ValueError(
                f"codebook must hold {2 ** self.bits} nets, got {len(self.predictors)}")

    @property
    def size(self) -> int:
        return 2 ** self.bits


def mad_matrix(frames, predictors: list[MlpPredictor]) -> np.ndarray:
    """(F x nets) residual MAD of every frame under every net."""
    X, y = frame_context_matrix(frames)
    flen = len(frames[0].samples)
    return np.stack([net_frame_mads(net, X, y, flen) for net in predictors], axis=1)


def total_min_mad(frames, cb: NeuralCodebook) -> float:
    """Sum over frames of the best (lowest) net MAD — the codebook's distortion."""
    return float(np.sum(np.min(mad_matrix(frames, cb.predictors), axis=1)))


def speaker_key(label: str) -> int:
    """Stable integer for deterministic per-speaker RNG streams."""
    return zlib.crc32(label.encode("utf-8"))


def build_neural_codebooks(frames, lpccs: np.ndarray, linear_cb,
                           iterations: list[int], seed: int, speaker: str,
                           epochs: int = 8, n_random: int = 4
                           ) -> dict[int, NeuralCodebook]:
    """Build the MLP codebook and snapshot it at the requested iterations.

    Iteration 0 clusters the frames with the same-size linear codebook and
    trains one net per cluster.  Every further iteration re-clusters the
    frames by lowest residual MAD across the current nets and retrains,
    seeding each cluster's multistart with its previous net.  Clusters
    that come up empty keep their previous net.
    """
    from .codebook import quantize

    if any(i < 0 for i in iterations):
        raise ValueError("iteration counts must be >= 0")
    max_iter = max(iterations)
    bits = linear_cb.bits
    n_nets = 2 ** bits
    key = speaker_key(speaker)
    flen = len(frames[0].samples)

    X, y = frame_context_matrix(frames)
    assignment = np.array([quantize(v, linear_cb)[0] for v in lpccs])

    nets: list[MlpPredictor] = []
    for ci in range(n_nets):
        members = np.flatnonzero(assignment == ci)
        child = np.random.SeedSequence([seed, key, 0, ci])
        if members.size == 0:
            nets.append(init_mlp(np.random.default_rng(child)))
            continue
        rows = _pair_rows(members, flen)
        net, _ = multistart_train(X[rows], y[rows], child,
                                  epochs=epochs, n_random=n_random)
        nets.append(net)

    snapshots: dict[int, NeuralCodebook] = {}
    if 0 in iterations:
        snapshots[0] = NeuralCodebook(bits=bits, predictors=list(nets),
                                      source_bits=bits, lloyd_iteration=0)

    for it in range(1, max_iter + 1):
        mads = mad_matrix(frames, nets)
        assignment = np.argmin(mads, axis=1)
        new_nets = []
        for ci in range(n_nets):
            members = np.flatnonzero(assignment == ci)
            if members.size == 0:
                new_nets.append(nets[ci])
                continue
            rows = _pair_rows(members, flen)
            child = np.random.SeedSequence([seed, key, it, ci])
            net, _ = multistart_train(X[rows], y[rows], child, prev=nets[ci],
                                      epochs=epochs, n_random=n_random)
            new_nets.append(net)
        nets = new_nets
        if it in iterations:
            snapshots[it] = NeuralCodebook(bits=bits, predictors=list(nets),
                                           source_bits=bits, lloyd_iteration=it)
    return snapshots


def _pair_rows(frame_indices: np.ndarray, frame_len: int) -> np.ndarray:
    """Row indices into the pair matrix for a subset of frames."""
    offsets = np.arange(frame_len)
    return (frame_indices[:, None] * frame_len + offsets[None, :]).ravel()


def build_neural_codebook(frames, lpccs: np.ndarray, linear_cb,
                          iterations: int, seed: int, speaker: str,
                          epochs: int = 8, n_random: int = 4) -> NeuralCodebook:
    return build_neural_codebooks(frames, lpccs, linear_cb, [iterations],
                                  seed, speaker, epochs=epochs,
                                  n_random=n_random)[iterations]
