"""PCA descriptor reduction, descriptor pools, and brute-force matching."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples
from .linalg import jacobi_eigh

PCA_OUT_DIM = 32

_POPCOUNT = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint16)


class Modality(enum.Enum):
    FLOAT32DIM = "FLOAT32DIM"
    BINARY256 = "BINARY256"


@dataclass(frozen=True)
class PcaBasis:
    """Mean vector plus orthonormal component rows sorted by eigenvalue."""

    mean: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        comp = np.asarray(self.components, dtype=np.float64)
        eig = np.asarray(self.eigenvalues, dtype=np.float64)
        if comp.ndim != 2 or comp.shape[1] != mean.shape[0]:
            raise ValueError("components must be rows over the descriptor dimension")
        if eig.shape != (comp.shape[0],):
            raise ValueError("need one eigenvalue per component")
        gram = comp @ comp.T
        if np.max(np.abs(gram - np.eye(comp.shape[0]))) > 1e-6:
            raise ValueError("component rows are not orthonormal")
        if np.any(np.diff(eig) > 1e-12) or np.any(eig < -1e-9):
            raise ValueError("eigenvalues must be descending and nonnegative")
        for arr in (mean, comp, eig):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comp)
        object.__setattr__(self, "eigenvalues", eig)


@dataclass(frozen=True)
class MatchPair:
    query_index: int
    train_index: int
    distance: float

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError("match distance must be nonnegative")

    def as_triple(self) -> list:
        return [self.query_index, self.train_index, float(self.distance)]


@dataclass(frozen=True)
class DescriptorPool:
    """Homogeneous descriptor set with parallel keypoint indices."""

    modality: Modality
    vectors: np.ndarray = field(repr=False)
    keypoint_refs: tuple = ()

    def __post_init__(self):
        if self.modality is Modality.BINARY256:
            vec = np.asarray(self.vectors, dtype=np.uint8)
            if vec.ndim != 2 or (vec.size and vec.shape[1] != 32):
                raise ValueError("binary descriptors must be 32 packed bytes each")
            vec = vec.reshape(vec.shape[0], 32) if vec.size else vec.reshape(0, 32)
        else:
            vec = np.asarray(self.vectors, dtype=np.float64)
            if vec.ndim != 2:
                vec = vec.reshape(0, 0) if vec.size == 0 else vec
            if vec.ndim != 2:
                raise ValueError("float descriptors must form a 2D array")
        refs = tuple(self.keypoint_refs) if len(self.keypoint_refs) else tuple(range(len(vec)))
        if len(refs) != len(vec):
            raise ValueError("keypoint_refs must parallel the descriptor rows")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "keypoint_refs", refs)

    def __len__(self) -> int:
        return len(self.vectors)


def _sorted_rows(descriptors: np.ndarray) -> np.ndarray:
    # lexicographic row order makes the fit independent of input order
    order = np.lexsort(descriptors.T[::-1])
    return descriptors[order]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return out


def fit_pca(descriptors, out_dim: int = PCA_OUT_DIM) -> PcaBasis:
    """Fit a PCA basis to float descriptors via cyclic Jacobi.

    Raises InsufficientSamples with fewer than out_dim + 1 descriptors.
    """
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim != 2:
        raise ValueError("descriptors must form a 2D array")
    n, dim = desc.shape
    if n < out_dim + 1:
        raise InsufficientSamples(f"PCA needs >= {out_dim + 1} descriptors, got {n}")
    desc = _sorted_rows(desc)
    mean = desc.mean(axis=0)
    centered = desc - mean
    cov = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = jacobi_eigh(cov, tol=1e-10, max_sweeps=100)
    components = _fix_signs(eigenvectors[:, :out_dim].T)
    return PcaBasis(mean, components, eigenvalues[:out_dim])


def padded_pca_basis(descriptors, out_dim: int = PCA_OUT_DIM):
    """PCA basis that tolerates small sets by padding with standard axes.

    Returns (basis, padded) where padded is True when fit_pca had too few
    samples and the deficit was filled with orthonormalized standard-basis
    rows carrying zero eigenvalues.
    """
    try:
        return fit_pca(descriptors, out_dim), False
    except InsufficientSamples:
        pass
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim != 2 or desc.shape[0] == 0:
        raise ValueError("padding fallback needs at least one descriptor")
    n, dim = desc.shape
    desc = _sorted_rows(desc)
    mean = desc.mean(axis=0)
    rows = []
    eigenvalues = []
    if n >= 2:
        centered = desc - mean
        cov = centered.T @ centered / (n - 1)
        w, v = jacobi_eigh(cov, tol=1e-10, max_sweeps=100)
        keep = min(out_dim, n - 1)
        rows = list(_fix_signs(v[:, :keep].T))
        eigenvalues = list(np.clip(w[:keep], 0.0, None))
    for axis in range(dim):
        if len(rows) >= out_dim:
            break
        candidate = np.zeros(dim)
        candidate[axis] = 1.0
        for row in rows:
            candidate = candidate - (candidate @ row) * row
        norm = np.linalg.norm(candidate)
        if norm > 1e-6:
            rows.append(candidate / norm)
            eigenvalues.append(0.0)
    return PcaBasis(mean, np.array(rows), np.array(eigenvalues)), True


def project_pca(basis: PcaBasis, descriptor) -> np.ndarray:
    """Project one descriptor (or a stack) onto the basis."""
    d = np.asarray(descriptor, dtype=np.float64)
    return (d - basis.mean) @ basis.components.T


def _l2sq_approx(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a2 = np.einsum("ij,ij->i", a, a)[:, None]
    b2 = np.einsum("ij,ij->i", b, b)[None, :]
    return np.maximum(a2 + b2 - 2.0 * (a @ b.T), 0.0)


def _hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((len(a), len(b)), dtype=np.float64)
    for i in range(len(a)):
        out[i] = _POPCOUNT[np.bitwise_xor(a[i][None, :], b)].sum(axis=1)
    return out


def _distance_matrix(a_pool: DescriptorPool, b_pool: DescriptorPool) -> np.ndarray:
    if a_pool.modality is Modality.BINARY256:
        return _hamming_matrix(a_pool.vectors, b_pool.vectors)
    return np.sqrt(_l2sq_approx(a_pool.vectors, b_pool.vectors))


def _refine_candidates(a_pool, b_pool, qi, candidates):
    """Exact distances for near-minimal candidates; settles float ties."""
    if a_pool.modality is Modality.BINARY256:
        q = a_pool.vectors[qi]
        dists = _POPCOUNT[np.bitwise_xor(q[None, :], b_pool.vectors[candidates])].sum(axis=1)
        dists = dists.astype(np.float64)
    else:
        diff = b_pool.vectors[candidates] - a_pool.vectors[qi]
        dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    best = np.argmin(dists)  # first occurrence; candidates are index-sorted
    return int(candidates[best]), float(dists[best])


def _nearest_rows(a_pool, b_pool, matrix, k):
    """Per query the k nearest train entries, ties to the lowest index."""
    results = []
    for qi in range(len(a_pool)):
        row = matrix[qi].copy()
        picks = []
        for _ in range(min(k, len(b_pool))):
            m = row.min()
            eps = 1e-9 * (1.0 + m)
            candidates = np.flatnonzero(row <= m + eps)
            j, d = _refine_candidates(a_pool, b_pool, qi, candidates)
            picks.append((j, d))
            row[j] = np.inf
        results.append(picks)
    return results


def match_bruteforce(a_pool: DescriptorPool, b_pool: DescriptorPool, cross_check: bool = False):
    """Nearest-neighbor matches from every query descriptor into B.

    Ties break toward the lowest train index; with cross_check only
    mutual nearest pairs survive.
    """
    if a_pool.modality is not b_pool.modality:
        raise ValueError("descriptor pools have different modalities")
    if len(a_pool) == 0 or len(b_pool) == 0:
        return []
    matrix = _distance_matrix(a_pool, b_pool)
    forward = _nearest_rows(a_pool, b_pool, matrix, 1)
    matches = [MatchPair(qi, picks[0][0], picks[0][1]) for qi, picks in enumerate(forward)]
    if not cross_check:
        return matches
    backward = _nearest_rows(b_pool, a_pool, matrix.T, 1)
    return [m for m in matches if backward[m.train_index][0][0] == m.query_index]


def match_knn2(a_pool: DescriptorPool, b_pool: DescriptorPool):
    """Per query the nearest and second-nearest matches (one if |B| = 1)."""
    if a_pool.modality is not b_pool.modality:
        raise ValueError("descriptor pools have different modalities")
    if len(a_pool) == 0 or len(b_pool) == 0:
        return []
    matrix = _distance_matrix(a_pool, b_pool)
    rows = _nearest_rows(a_pool, b_pool, matrix, 2)
    return [
        [MatchPair(qi, j, d) for j, d in picks] for qi, picks in enumerate(rows)
    ]


def ratio_test_filter(knn, ratio: float = 0.75):
    """Lowe-style filter: keep the best match iff d1 < ratio * d2."""
    kept = []
    for picks in knn:
        if not picks:
            continue
        if len(picks) == 1:
            kept.append(picks[0])
        elif picks[0].distance < ratio * picks[1].distance:
            kept.append(picks[0])
    return kept


def build_intfeat_pools(sift_kps, sift_desc, orb_kps, orb_desc, basis: PcaBasis):
    """Pools for fused matching: PCA-reduced SIFT plus binary ORB.

    Returns (combined_keypoints, float_pool, binary_pool); keypoint_refs
    index the combined list, SIFT entries first.
    """
    sift_kps = list(sift_kps)
    orb_kps = list(orb_kps)
    n_sift = len(sift_kps)
    if n_sift:
        projected = project_pca(basis, np.asarray(sift_desc, dtype=np.float64))
    else:
        projected = np.zeros((0, basis.components.shape[0]))
    float_pool = DescriptorPool(Modality.FLOAT32DIM, projected, tuple(range(n_sift)))
    orb_vectors = (
        np.asarray(orb_desc, dtype=np.uint8) if len(orb_kps) else np.zeros((0, 32), dtype=np.uint8)
    )
    binary_pool = DescriptorPool(
        Modality.BINARY256, orb_vectors, tuple(range(n_sift, n_sift + len(orb_kps)))
    )
    return sift_kps + orb_kps, float_pool, binary_pool
