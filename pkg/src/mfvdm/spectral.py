"""Per-frequency Hermitian graph matrices, truncated spectral embeddings,
multi-frequency affinity, neighbor refinement, and eigenvector-based
rotational alignment.

For each angular frequency k the graph carries a Hermitian matrix with edge
entries exp(-i*k*alpha_ij), symmetrically normalized by node degrees. The
sign matches the coefficient phase convention: rotating an image by alpha
multiplies its frequency-k coefficients by exp(-i*k*alpha), so transporting a
neighbor's coefficients across an edge applies exp(-i*k*alpha_ij). Top
eigenpairs of these matrices define embeddings whose inner products measure
the consistency of transporting in-plane rotations along length-2t paths;
inconsistent shortcut edges score low and are pruned.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import ViewGraph

__all__ = [
    "FrequencyMatrix",
    "SpectralBundle",
    "build_frequency_matrix",
    "top_eigs",
    "compute_bundle",
    "embedding_dot",
    "affinity",
    "affinity_matrix",
    "refine_neighbors",
    "estimate_alignment",
    "align_graph",
]


class EigsError(RuntimeError):
    """Eigensolver failed to converge; carries the achieved residual."""


@dataclass(frozen=True)
class FrequencyMatrix:
    """Degree-normalized Hermitian matrix for one angular frequency."""

    k: int
    matrix: sp.csr_matrix      # n x n complex, entries 1/sqrt(deg_i deg_j) e^{-ik alpha}
    degrees: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]


def build_frequency_matrix(graph, k):
    """Entries e^{-ik alpha_ij}/sqrt(deg_i deg_j) on edges; Hermitian by the
    angle antisymmetry of the graph."""
    deg = graph.degrees
    if (deg == 0).any():
        bad = int(np.flatnonzero(deg == 0)[0])
        raise ValueError(f"node {bad} is isolated (degree 0)")
    rows, cols, vals = [], [], []
    for i, nb in enumerate(graph.neighbors):
        rows.append(np.full(nb.size, i))
        cols.append(nb)
        vals.append(np.exp(-1j * k * graph.angles[i]) / np.sqrt(deg[i] * deg[nb]))
    m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(graph.n, graph.n),
    )
    return FrequencyMatrix(k=k, matrix=m, degrees=deg)


def top_eigs(freq_matrix, m, *, seed=0, residual_tol=1e-8):
    """Largest-m eigenpairs by algebraic value, descending.

    Dense Hermitian decomposition for small problems or large m; otherwise
    Lanczos with a deterministic seeded start vector.
    """
    W = freq_matrix.matrix
    n = W.shape[0]
    if m > n:
        raise ValueError(f"m={m} exceeds matrix size n={n}")
    if m > n // 4 or n <= 400:
        vals, vecs = np.linalg.eigh(W.toarray())
        vals, vecs = vals[::-1][:m], vecs[:, ::-1][:, :m]
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        v0 = (rng.normal(size=n) + 1j * rng.normal(size=n)).astype(W.dtype)
        try:
            vals, vecs = spla.eigsh(W, k=m, which="LA", v0=v0, tol=0)
        except spla.ArpackNoConvergence as exc:
            res = np.nan
            if exc.eigenvalues is not None and exc.eigenvalues.size:
                v = exc.eigenvectors[:, 0]
                res = float(np.linalg.norm(W @ v - exc.eigenvalues[0] * v))
            raise EigsError(f"eigensolver did not converge (residual {res:.3e})") from exc
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
    resid = np.linalg.norm(W @ vecs - vecs * vals[None, :], axis=0)
    if resid.max() > residual_tol:
        raise EigsError(f"eigenpair residual {resid.max():.3e} exceeds {residual_tol:.1e}")
    return vals.real, vecs


@dataclass(frozen=True)
class SpectralBundle:
    """Top-m eigenpairs of the normalized frequency matrices for k in k_list."""

    k_list: np.ndarray
    eigenvalues: tuple        # per k: (m,) real, descending
    eigenvectors: tuple       # per k: (n, m) complex, orthonormal
    degrees: np.ndarray
    t: int = 1
    m: int = 50

    @property
    def n(self):
        return self.degrees.size

    def index(self, k):
        pos = np.flatnonzero(self.k_list == k)
        if pos.size == 0:
            raise KeyError(f"frequency {k} not in bundle (have {list(self.k_list)})")
        return int(pos[0])


def compute_bundle(graph, k_max, m, *, t=1, include_zero=False, seed=0):
    """Eigendecompositions for k = 1..k_max (0..k_max if include_zero)."""
    ks = np.arange(0 if include_zero else 1, k_max + 1)
    vals, vecs = [], []
    for k in ks:
        fm = build_frequency_matrix(graph, int(k))
        v, u = top_eigs(fm, min(m, fm.n), seed=seed)
        vals.append(v)
        vecs.append(u)
    return SpectralBundle(k_list=ks, eigenvalues=tuple(vals), eigenvectors=tuple(vecs),
                          degrees=graph.degrees, t=t, m=m)


def _pair_product(bundle, k, i, j):
    """P_k(i, j) = sum_l lambda_l^{2t} u_l(i) conj(u_l(j)), over retained l."""
    idx = bundle.index(k)
    lam = bundle.eigenvalues[idx] ** (2 * bundle.t)
    U = bundle.eigenvectors[idx]
    return np.sum(lam * U[i] * np.conj(U[j]))


def embedding_dot(bundle, k, i, j):
    """Inner product of truncated embeddings at frequency k:
    |P_k(i, j)|^2, computed in rank-factorized form."""
    return float(np.abs(_pair_product(bundle, k, i, j)) ** 2)


def _product_matrices(bundle):
    """P_k as dense n x n matrices for every k in the bundle."""
    out = []
    for idx in range(bundle.k_list.size):
        lam = bundle.eigenvalues[idx] ** (2 * bundle.t)
        U = bundle.eigenvectors[idx]
        out.append((U * lam[None, :]) @ np.conj(U.T))
    return out


def affinity_matrix(bundle):
    """Normalized multi-frequency affinity A (n x n), summed over k >= 1.

    Frequencies with a vanishing self-product at a node are dropped for the
    pairs involving that node; returns (A, dropped_count).
    """
    n = bundle.n
    A = np.zeros((n, n))
    dropped = 0
    for idx, k in enumerate(bundle.k_list):
        if k == 0:
            continue
        lam = bundle.eigenvalues[idx] ** (2 * bundle.t)
        U = bundle.eigenvectors[idx]
        P = (U * lam[None, :]) @ np.conj(U.T)
        self_p = np.abs(np.diag(P).real)
        ok = self_p > 1e-300
        dropped += int((~ok).sum())
        norm = np.where(ok, self_p, 1.0)
        A += np.where(ok[:, None] & ok[None, :],
                      np.abs(P) ** 2 / (norm[:, None] * norm[None, :]), 0.0)
    return A, dropped


def affinity(bundle, i, j):
    """Multi-frequency affinity between two nodes (self-affinity = number of
    usable frequencies)."""
    total = 0.0
    for k in bundle.k_list:
        if k == 0:
            continue
        pij = np.abs(_pair_product(bundle, int(k), i, j)) ** 2
        pii = np.abs(_pair_product(bundle, int(k), i, i))
        pjj = np.abs(_pair_product(bundle, int(k), j, j))
        if pii <= 1e-300 or pjj <= 1e-300:
            continue
        total += pij / (pii * pjj)
    return float(total)


def refine_neighbors(bundle, s):
    """Per node, the s largest-affinity other nodes; ties broken by smaller
    index. Returns a symmetrized ViewGraph with angles unset."""
    if s >= bundle.n:
        raise ValueError(f"s={s} must be < n={bundle.n}")
    A, _ = affinity_matrix(bundle)
    n = bundle.n
    np.fill_diagonal(A, -np.inf)
    neighbors = []
    for i in range(n):
        order = np.lexsort((np.arange(n), -A[i]))[:s]
        neighbors.append(order)
    # symmetrize by union
    adj = [set() for _ in range(n)]
    for i, nb in enumerate(neighbors):
        for j in nb:
            adj[i].add(int(j))
            adj[int(j)].add(i)
    nbs = [np.array(sorted(a), dtype=int) for a in adj]
    return ViewGraph(neighbors=nbs, angles=None, dists=None)


def _alignment_spectrum(bundle, i, j, k_max=None):
    """z(k) = P_k(i, j) for the bundle frequencies k >= 1."""
    ks = [int(k) for k in bundle.k_list if k >= 1 and (k_max is None or k <= k_max)]
    z = np.zeros(max(ks) + 1, dtype=complex)
    for k in ks:
        z[k] = _pair_product(bundle, k, i, j)
    return z


def estimate_alignment(bundle, i, j, fft_size=1024):
    """Alignment angle from the eigenvector phase relation: the grid argmax of
    Re sum_k z(k) e^{ik alpha} with z(k) = P_k(i, j), zero-padded. For a
    transport-consistent graph P_k(i, j) has phase e^{-ik alpha_ij}, so the
    maximizer recovers the stored angle convention."""
    if fft_size <= bundle.k_list.max():
        raise ValueError("fft_size must exceed the largest frequency")
    z = _alignment_spectrum(bundle, i, j)
    obj = np.real(np.fft.fft(np.conj(z), n=fft_size))
    t = int(np.argmax(obj))
    alpha = 2.0 * np.pi * t / fft_size
    if alpha > np.pi:
        alpha -= 2.0 * np.pi
    return float(alpha)


def align_graph(bundle, graph, fft_size=1024):
    """Estimate alignment angles for every edge of a refined graph.

    Vectorized over edges; fills the graph's angle arrays in place with
    alpha_ij = -alpha_ji enforced by estimating each undirected edge once.
    """
    pairs = [(i, j) for i, nb in enumerate(graph.neighbors) for j in nb if i < j]
    if not pairs:
        graph.angles = [np.zeros(0) for _ in range(graph.n)]
        return graph
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    kmax = int(bundle.k_list.max())
    Z = np.zeros((len(pairs), kmax + 1), dtype=complex)
    for idx, k in enumerate(bundle.k_list):
        if k == 0:
            continue
        lam = bundle.eigenvalues[idx] ** (2 * bundle.t)
        U = bundle.eigenvectors[idx]
        Z[:, int(k)] = np.sum(lam[None, :] * U[ii] * np.conj(U[jj]), axis=1)
    obj = np.real(np.fft.fft(np.conj(Z), n=fft_size, axis=1))
    tbest = np.argmax(obj, axis=1)
    alpha = 2.0 * np.pi * tbest / fft_size
    alpha = np.where(alpha > np.pi, alpha - 2.0 * np.pi, alpha)
    lut = {(int(a), int(b)): al for a, b, al in zip(ii, jj, alpha)}
    angles = []
    for i, nb in enumerate(graph.neighbors):
        al = np.array([lut[(i, int(j))] if i < j else -lut[(int(j), i)] for j in nb])
        angles.append(al)
    graph.angles = angles
    return graph
