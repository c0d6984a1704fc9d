"""Per-speaker linear codebooks over LPCC vectors.

Training follows the splitting construction: start from the global
centroid, double the codebook b times by perturbing every centroid, and
refine each stage with Lloyd iterations.  Two split rules are available:
per-dimension standard deviation, and the dominant covariance eigenvector
(so the implied decision boundary is a hyperplane through the centroid).

Each codeword also keeps the mean LPC coefficient vector of its final
cluster; the residual-domain distance measures need an inverse filter per
codeword and the cluster-mean predictor provides it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import MeasureKind, coefficient_distance_matrix

DEFAULT_EPSILON = 0.2
LLOYD_TOL = 1e-4
LLOYD_MAX_ITER = 50
_POWER_ITERATIONS = 100
_POWER_TOL = 1e-10
_ZERO_SPREAD_PERTURBATION = 1e-4


@dataclass
class Codeword:
    lpcc: np.ndarray
    lpc_mean: np.ndarray
    population: int


@dataclass
class LinearCodebook:
    bits: int
    codewords: list[Codeword]
    training_distortion: float
    degenerate: bool = False
    # (stage, iteration, distortion, repaired) tuples; in-memory only
    lloyd_trace: list[tuple[int, int, float, bool]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if len(self.codewords) != 2 ** self.bits:
            raise ValueError(
                f"codebook must hold {2 ** self.bits} codewords, got {len(self.codewords)}")

    @property
    def size(self) -> int:
        return 2 ** self.bits

    @property
    def centroid_matrix(self) -> np.ndarray:
        return np.stack([cw.lpcc for cw in self.codewords])

    @property
    def lpc_matrix(self) -> np.ndarray:
        return np.stack([cw.lpc_mean for cw in self.codewords])


def _assign(vectors: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per vector under measure 1; ties go to lowest index."""
    d = coefficient_distance_matrix(vectors, centroids, MeasureKind.MSE_LPCC)
    idx = np.argmin(d, axis=1)
    return idx, d[np.arange(len(vectors)), idx]


def split_stddev(centroid: np.ndarray, assigned: np.ndarray,
                 epsilon: float = DEFAULT_EPSILON) -> tuple[np.ndarray, np.ndarray]:
    """Children at centroid +/- epsilon * per-dimension std of the cluster."""
    centroid = np.asarray(centroid, dtype=np.float64)
    sigma = np.std(assigned, axis=0) if len(assigned) else np.zeros_like(centroid)
    if not np.any(sigma > 0):
        sigma = np.zeros_like(centroid)
        sigma[0] = _ZERO_SPREAD_PERTURBATION
    return centroid + epsilon * sigma, centroid - epsilon * sigma


def dominant_eigenpair(cov: np.ndarray, rng: np.random.Generator
                       ) -> tuple[float, np.ndarray]:
    """Power iteration on a covariance matrix.

    The sign ambiguity is removed by making the largest-magnitude
    component positive; the seeded start vector settles isotropic ties.
    """
    d = cov.shape[0]
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(_POWER_ITERATIONS):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:          # zero covariance: any direction works
            break
        w /= norm
        if np.linalg.norm(w - v) < _POWER_TOL:
            v = w
            break
        v = w
    lam = float(v @ cov @ v)
    pivot = np.argmax(np.abs(v))
    if v[pivot] < 0:
        v = -v
    return lam, v


def split_hyperplane(centroid: np.ndarray, assigned: np.ndarray,
                     epsilon: float = DEFAULT_EPSILON,
                     rng: np.random.Generator | None = None
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Children at centroid +/- epsilon * sqrt(lambda1) * v1.

    lambda1, v1 is the dominant eigenpair of the cluster covariance; the
    nearest-centroid boundary between the children is then the hyperplane
    through the centroid normal to v1.  Clusters of fewer than 2 vectors
    fall back to the std-deviation rule.
    """
    centroid = np.asarray(centroid, dtype=np.float64)
    if len(assigned) < 2:
        return split_stddev(centroid, assigned, epsilon)
    if rng is None:
        rng = np.random.default_rng(0)
    cov = np.cov(assigned, rowvar=False, bias=True)
    lam, v = dominant_eigenpair(cov, rng)
    if lam <= 0.0:
        return split_stddev(centroid, assigned, epsilon)
    step = epsilon * np.sqrt(lam) * v
    return centroid + step, centroid - step


def _repair_empty_cells(centroids: np.ndarray, vectors: np.ndarray,
                        assignment: np.ndarray) -> bool:
    """Re-seed empty cells at the worst outlier of the highest-distortion cluster."""
    repaired = False
    counts = np.bincount(assignment, minlength=len(centroids))
    for cell in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(counts >= 2)
        if donors.size == 0:
            break
        totals = np.array([
            np.sum(np.square(vectors[assignment == c] - centroids[c]))
            for c in donors])
        donor = donors[np.argmax(totals)]
        members = np.flatnonzero(assignment == donor)
        far = members[np.argmax(
            np.sum(np.square(vectors[members] - centroids[donor]), axis=1))]
        centroids[cell] = vectors[far]
        assignment[far] = cell
        counts[donor] -= 1
        counts[cell] += 1
        repaired = True
    return repaired


def lloyd_iterate(centroids: np.ndarray, vectors: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray, float, bool]:
    """One assignment + centroid update; empty cells repaired first.

    Returns (new centroids, assignment, distortion under the incoming
    centroids, repaired flag).  Distortion is the mean measure-1 distance.
    """
    centroids = np.array(centroids, dtype=np.float64)
    assignment, dists = _assign(vectors, centroids)
    repaired = _repair_empty_cells(centroids, vectors, assignment)
    if repaired:
        assignment, dists = _assign(vectors, centroids)
    distortion = float(np.mean(dists))
    new_centroids = centroids.copy()
    for c in range(len(centroids)):
        members = assignment == c
        if np.any(members):
            new_centroids[c] = vectors[members].mean(axis=0)
    return new_centroids, assignment, distortion, repaired


def _lloyd_to_convergence(centroids: np.ndarray, vectors: np.ndarray, stage: int,
                          trace: list) -> np.ndarray:
    last = None
    for it in range(LLOYD_MAX_ITER):
        centroids, _, distortion, repaired = lloyd_iterate(centroids, vectors)
        trace.append((stage, it, distortion, repaired))
        if not repaired and last is not None and last > 0:
            if (last - distortion) / last < LLOYD_TOL:
                break
        if not repaired and last == 0.0:
            break
        if not repaired:
            last = distortion
        else:
            last = None
    return centroids


def train_codebook(lpccs: np.ndarray, lpcs: np.ndarray, bits: int,
                   method: str = "hyperplane", seed: int = 0,
                   epsilon: float = DEFAULT_EPSILON) -> LinearCodebook:
    """Splitting construction of a 2^bits codebook over LPCC vectors.

    lpccs and lpcs are frame-aligned (F x q) and (F x p) matrices from the
    same training frames; the companion predictor vectors only matter for
    the final per-codeword means.
    """
    lpccs = np.asarray(lpccs, dtype=np.float64)
    lpcs = np.asarray(lpcs, dtype=np.float64)
    size = 2 ** bits
    if len(lpccs) < size:
        raise ValueError(f"need at least {size} vectors, got {len(lpccs)}")
    if method not in ("hyperplane", "std_deviation"):
        raise ValueError(f"unknown split method {method!r}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    if np.all(lpccs == lpccs[0]):
        # Degenerate input: every centroid collapses onto the single vector.
        centroid = lpccs[0].copy()
        lpc_mean = lpcs.mean(axis=0)
        codewords = [Codeword(lpcc=centroid.copy(), lpc_mean=lpc_mean.copy(),
                              population=len(lpccs) if i == 0 else 0)
                     for i in range(size)]
        return LinearCodebook(bits=bits, codewords=codewords,
                              training_distortion=0.0, degenerate=True)

    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    centroids = lpccs.mean(axis=0, keepdims=True)
    trace: list[tuple[int, int, float, bool]] = []

    for stage in range(1, bits + 1):
        assignment, _ = _assign(lpccs, centroids)
        children = []
        for i, c in enumerate(centroids):
            members = lpccs[assignment == i]
            if method == "hyperplane":
                plus, minus = split_hyperplane(c, members, epsilon, rng)
            else:
                plus, minus = split_stddev(c, members, epsilon)
            children.extend([plus, minus])
        centroids = _lloyd_to_convergence(np.stack(children), lpccs, stage, trace)

    assignment, dists = _assign(lpccs, centroids)
    repaired = _repair_empty_cells(centroids, lpccs, assignment)
    if repaired:
        assignment, dists = _assign(lpccs, centroids)
    degenerate = bool(np.any(np.bincount(assignment, minlength=size) == 0))

    codewords = []
    global_lpc = lpcs.mean(axis=0)
    for c in range(size):
        members = assignment == c
        pop = int(np.count_nonzero(members))
        lpc_mean = lpcs[members].mean(axis=0) if pop else global_lpc.copy()
        codewords.append(Codeword(
            lpcc=centroids[c].copy(), lpc_mean=lpc_mean, population=pop))
    return LinearCodebook(bits=bits, codewords=codewords,
                          training_distortion=float(np.mean(dists)),
                          degenerate=degenerate, lloyd_trace=trace)


def quantize(v: np.ndarray, cb: LinearCodebook,
             kind: MeasureKind = MeasureKind.MSE_LPCC) -> tuple[int, float]:
    """Nearest codeword index and distance under a coefficient measure."""
    if not kind.is_coefficient:
        raise ValueError(f"quantize needs a coefficient-domain measure, got {kind}")
    d = coefficient_distance_matrix(np.asarray(v, dtype=np.float64)[None, :],
                                    cb.centroid_matrix, kind)[0]
    idx = int(np.argmin(d))
    return idx, float(d[idx])
