"""Similarity graphs over episode features and diffusion on top of them.

The pipeline: pairwise cosine similarities with a zeroed diagonal, keep an
entry only when it is among the k largest of its row or column, normalize
symmetrically by degrees, then interpolate features with powers of
``alpha * I + E``. A spectral embedding of the normalized Laplacian is
provided for visualizing episode graphs.

Everything here is a pure function of its inputs (float64 throughout), so
operations can run concurrently across episodes with no shared state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, ValidationError


@dataclass(frozen=True)
class PropagationParams:
    """Graph and diffusion hyperparameters.

    k is the number of neighbors kept per vertex (1 <= k, clamped to m-1
    when building a graph over m vertices). kappa is the diffusion power;
    kappa = 0 is admitted as the explicit "no propagation" baseline. alpha
    in [0, 1] weighs self-representations against neighbor features.
    """

    k: int = 10
    kappa: int = 3
    alpha: float = 0.5

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be an integer >= 1, got {self.k}")
        if int(self.kappa) != self.kappa or self.kappa < 0:
            raise ValidationError(f"kappa must be an integer >= 0, got {self.kappa}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric cosine-similarity matrix with zero diagonal, entries in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValidationError(f"similarity matrix must be square, got {vals.shape}")
        if vals.shape[0] < 2:
            raise ValidationError("similarity matrix needs at least 2 vertices")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("similarity matrix has non-finite entries")
        if np.any(np.diagonal(vals) != 0.0):
            raise ValidationError("similarity diagonal must be exactly zero")
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise ValidationError("similarity entries must lie in [0, 1]")
        if not np.array_equal(vals, vals.T):
            raise ValidationError("similarity matrix must be symmetric")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Degree-normalized similarity matrix E = D^{-1/2} S D^{-1/2}.

    Rows/columns with zero degree are zeroed rather than divided; the
    spectral radius of E never exceeds 1 (up to rounding).
    """

    values: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        degs = np.ascontiguousarray(self.degrees, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValidationError(f"adjacency must be square, got {vals.shape}")
        if degs.shape != (vals.shape[0],):
            raise ValidationError("degrees must be one per vertex")
        if vals.min() < 0.0 or degs.min() < 0.0:
            raise ValidationError("normalized adjacency must be nonnegative")
        if not np.array_equal(vals, vals.T):
            raise ValidationError("normalized adjacency must be symmetric")
        vals.flags.writeable = False
        degs.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "degrees", degs)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def cosine_similarity_matrix(features: np.ndarray) -> SimilarityMatrix:
    """Pairwise cosine similarities with a zero diagonal.

    Rows must be nonnegative, so every off-diagonal entry lands in [0, 1].
    An all-zero row is treated as an isolated vertex: similarity 0 against
    everything rather than an error.
    """
    V = np.asarray(features, dtype=np.float64)
    if V.ndim != 2:
        raise ValidationError(f"features must be 2-d, got shape {V.shape}")
    if V.shape[0] < 2:
        raise ValidationError("need at least 2 feature rows to build a graph")
    if not np.all(np.isfinite(V)):
        raise ValidationError("features contain non-finite entries")
    if V.min() < 0:
        raise ValidationError("features must be nonnegative")
    norms = np.linalg.norm(V, axis=1)
    inv = np.zeros_like(norms)
    nonzero = norms > 0
    inv[nonzero] = 1.0 / norms[nonzero]
    unit = V * inv[:, None]
    sims = unit @ unit.T
    sims = (sims + sims.T) / 2.0  # enforce exact symmetry before clipping
    np.clip(sims, 0.0, 1.0, out=sims)
    np.fill_diagonal(sims, 0.0)
    return SimilarityMatrix(sims)


def knn_sparsify(sim: SimilarityMatrix, k: int) -> SimilarityMatrix:
    """Zero every entry that is not among the k largest of its row or column.

    The union rule preserves symmetry. Ties are broken toward the smaller
    column index so results are reproducible. With k >= m - 1 all values
    are kept and the input comes back unchanged.
    """
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be an integer >= 1, got {k}")
    m = sim.m
    if k >= m - 1:
        return SimilarityMatrix(sim.values.copy())
    neg = -sim.values
    np.fill_diagonal(neg, np.inf)  # the diagonal never competes for top-k
    order = np.argsort(neg, axis=1, kind="stable")
    top = order[:, :k]
    keep = np.zeros((m, m), dtype=bool)
    keep[np.repeat(np.arange(m), k), top.ravel()] = True
    keep |= keep.T
    return SimilarityMatrix(np.where(keep, sim.values, 0.0))


def symmetric_normalize(sim: SimilarityMatrix) -> NormalizedAdjacency:
    """Normalize S by its degree matrix: E = D^{-1/2} S D^{-1/2}.

    Vertices with zero degree keep a zeroed row and column instead of
    triggering a division error.
    """
    vals = sim.values
    degrees = vals.sum(axis=1)
    inv_sqrt = np.zeros_like(degrees)
    positive = degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(degrees[positive])
    normalized = vals * np.outer(inv_sqrt, inv_sqrt)
    return NormalizedAdjacency(values=normalized, degrees=degrees)


def propagate(
    features: np.ndarray, adjacency: NormalizedAdjacency, params: PropagationParams
) -> np.ndarray:
    """Interpolate features with the diffusion operator (alpha*I + E)^kappa.

    Applied as kappa successive multiplications against the feature block,
    never by materializing a dense matrix power; with kappa = 0 the input
    comes back unchanged. Sparse multiplication kicks in when the graph is
    sparse enough to pay for itself.
    """
    V = np.asarray(features, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != adjacency.m:
        raise ValidationError(
            f"feature rows ({V.shape}) must match adjacency size {adjacency.m}"
        )
    if params.kappa == 0:
        return V.copy()
    dense = adjacency.values
    nnz = np.count_nonzero(dense)
    operator = sp.csr_array(dense) if 2 * nnz < dense.size else dense
    out = V
    for _ in range(params.kappa):
        out = params.alpha * out + operator @ out
    return out


def build_episode_graph(
    features: np.ndarray, params: PropagationParams
) -> tuple[SimilarityMatrix, NormalizedAdjacency]:
    """Cosine graph, sparsified to min(k, m-1) neighbors, then normalized.

    Returns the sparsified similarity matrix together with its normalized
    adjacency; identical to calling the three operations in sequence.
    """
    sim = cosine_similarity_matrix(features)
    sparsified = knn_sparsify(sim, min(params.k, sim.m - 1))
    return sparsified, symmetric_normalize(sparsified)


@dataclass(frozen=True)
class LaplacianEmbedding:
    """Spectral coordinates: unit eigenvectors of L = I - E, trivial one dropped."""

    coordinates: np.ndarray  # (m, dims); column j is the (j+2)-th smallest eigenvector
    eigenvalues: np.ndarray  # (dims,) ascending
    residuals: np.ndarray  # (dims,) achieved ||L x - lambda x||


def laplacian_embedding(
    adjacency: NormalizedAdjacency,
    dims: int,
    tol: float = 1e-6,
    max_iters: int = 20_000,
) -> LaplacianEmbedding:
    """Eigenvectors of L = I - E for the 2nd..(dims+1)-th smallest eigenvalues.

    Solved by deflated power iteration on 2I - L (no dense eigensolver), so
    the brute-force eigendecomposition stays available as an independent
    check. Each vector is unit-norm with its largest-magnitude entry made
    positive; the iteration stops once ||L x - lambda x|| <= tol and raises
    ConvergenceError with the achieved residual if the budget runs out.
    """
    if dims < 1:
        raise ValidationError(f"dims must be >= 1, got {dims}")
    m = adjacency.m
    if m < dims + 1:
        raise ValidationError(f"need at least dims+1={dims + 1} vertices, got {m}")

    shifted = adjacency.values + np.eye(m)  # 2I - L; eigenvalues mu = 2 - lambda
    found = np.empty((m, 0))
    eigenvalues, vectors, residuals = [], [], []
    for j in range(dims + 1):
        vec, mu, resid = _deflated_power_iteration(
            shifted, found, _start_vector(m, j), tol, max_iters
        )
        found = np.column_stack([found, vec])
        vectors.append(vec)
        eigenvalues.append(2.0 - mu)
        residuals.append(resid)

    order = np.argsort(eigenvalues, kind="stable")[1:]  # drop the smallest
    coords = np.empty((m, dims))
    for out_col, idx in enumerate(order):
        vec = vectors[idx]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        coords[:, out_col] = vec
    return LaplacianEmbedding(
        coordinates=coords,
        eigenvalues=np.asarray(eigenvalues)[order],
        residuals=np.asarray(residuals)[order],
    )


def _start_vector(m: int, j: int) -> np.ndarray:
    # The all-ones start pulls the first solve toward the trivial smallest-
    # eigenvalue direction; later solves start from a fixed pseudo-random
    # draw so deflation can pick out the rest.
    if j == 0:
        return np.ones(m) / np.sqrt(m)
    rng = np.random.default_rng(0x5EED0 + j)
    vec = rng.standard_normal(m)
    return vec / np.linalg.norm(vec)


def _deflated_power_iteration(
    shifted: np.ndarray,
    found: np.ndarray,
    start: np.ndarray,
    tol: float,
    max_iters: int,
) -> tuple[np.ndarray, float, float]:
    x = start - found @ (found.T @ start)
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        # Start vector lives in the deflated subspace; fall back to a basis
        # direction with mass outside it.
        for axis in range(shifted.shape[0]):
            x = np.zeros(shifted.shape[0])
            x[axis] = 1.0
            x -= found @ (found.T @ x)
            norm = np.linalg.norm(x)
            if norm >= 1e-6:
                break
    x /= norm

    resid = np.inf
    for _ in range(max_iters):
        w = shifted @ x
        mu = float(x @ w)
        resid = float(np.linalg.norm(w - mu * x))
        if found.shape[1]:
            w -= found @ (found.T @ w)
            mu_deflated = float(x @ w)
            resid_deflated = float(np.linalg.norm(w - mu_deflated * x))
        else:
            resid_deflated = resid
        # The deflated residual drives the iteration (tighter, so coupling
        # through imperfect earlier vectors cannot mask a sloppy solve); the
        # returned residual is measured against the original operator.
        if resid_deflated <= 0.1 * tol and resid <= tol:
            return x, mu, resid
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            # x is annihilated by the deflated operator: eigenvalue 0 exactly
            return x, mu, resid
        x = w / norm
    raise ConvergenceError(
        f"power iteration did not reach residual {tol:g} in {max_iters} "
        f"iterations (achieved {resid:g})",
        residual=resid,
    )
