"""Steerable Fourier-Bessel basis on the Fourier-domain disk.

Band-limited, disk-supported images are represented by complex expansion
coefficients a_{k,q} indexed by angular frequency k >= 0 and radial index q.
Negative frequencies are implied by conjugate symmetry (real images).
Rotating an image counter-clockwise by alpha multiplies a_{k,q} by
exp(-i*k*alpha), which makes rotational alignment a 1D FFT over k.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import jn_zeros, jv

__all__ = [
    "BasisTables",
    "build_basis",
    "expand",
    "expand_stack",
    "expand_disk_function",
    "reconstruct",
    "reconstruct_grid",
    "rotate_coeffs",
    "rid_align",
    "ft_grid",
    "ift_grid",
]


class BasisError(ValueError):
    """Invalid basis construction parameters or mismatched operands."""


def ft_grid(image):
    """Centered 2D DFT: F(u) = sum_x I(x) exp(-2*pi*i*u.x/L), x and u centered."""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(image, axes=(-2, -1)), axes=(-2, -1)), axes=(-2, -1))


def ift_grid(grid):
    """Inverse of :func:`ft_grid` (complex output; caller takes the real part)."""
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(grid, axes=(-2, -1)), axes=(-2, -1)), axes=(-2, -1))


@dataclass(frozen=True)
class BasisTables:
    """Immutable tables for one (L, bandlimit, support_radius) basis.

    All heavy matrices are precomputed once; expand/reconstruct are then
    matrix products. Safe to share across threads.
    """

    L: int
    bandlimit: float
    support_radius: float
    k_max: int
    radial_counts: np.ndarray        # p_k for k = 0..k_max
    bessel_zeros: tuple              # tuple of arrays, zeros[k][q-1] = R_{k,q}
    # flattened column indexing (k >= 0 only)
    ks: np.ndarray                   # angular frequency per column
    qs: np.ndarray                   # radial index per column (1-based)
    norms: np.ndarray                # normalization per column
    # quadrature nodes on the Fourier disk
    node_xi: np.ndarray              # radial coordinate per node (cycles/pixel)
    node_theta: np.ndarray
    node_w: np.ndarray               # weights incl. the xi measure
    # precomputed operators
    psi_nodes: np.ndarray = field(repr=False, default=None)   # (n_nodes, n_coeff)
    grid_index: np.ndarray = field(repr=False, default=None)  # flat indices of in-disk grid freqs
    psi_grid: np.ndarray = field(repr=False, default=None)    # (n_inside, n_coeff)
    coeff_solver: np.ndarray = field(repr=False, default=None)  # pseudo-inverse of the full +-k grid basis

    @property
    def n_coeffs(self):
        return self.ks.size

    def k_slice(self, k):
        """Column slice holding the radial coefficients of frequency k."""
        start = int(np.sum(self.radial_counts[:k]))
        return slice(start, start + int(self.radial_counts[k]))

    def full_sq_norm(self, coeffs):
        """Squared norm counting implied negative frequencies: k>0 columns twice."""
        w = np.where(self.ks == 0, 1.0, 2.0)
        mag = np.abs(coeffs) ** 2
        return mag @ w if coeffs.ndim == 1 else mag @ w


def build_basis(L, bandlimit, support_radius):
    """Build basis tables for odd image size L, bandlimit in cycles/pixel,
    and particle support radius in pixels.

    Retains every (k, q) whose Bessel zero satisfies
    R_{k,q} <= 2*pi*bandlimit*support_radius.
    """
    if L < 3 or L % 2 == 0:
        raise BasisError(f"image size must be odd and >= 3, got {L}")
    if not (0.0 < bandlimit <= 0.5):
        raise BasisError(f"bandlimit must be in (0, 0.5], got {bandlimit}")
    if not (0.0 < support_radius <= (L - 1) / 2):
        raise BasisError(
            f"support radius must be in (0, {(L - 1) / 2}], got {support_radius}"
        )

    c_max = 2.0 * np.pi * bandlimit * support_radius
    if jn_zeros(0, 1)[0] > c_max:
        raise BasisError("no admissible basis functions; enlarge bandlimit or radius")

    zeros = []
    counts = []
    k = 0
    while True:
        # generous batch, trimmed to the admissibility cutoff
        n_guess = max(4, int(c_max / np.pi) + 4)
        zk = jn_zeros(k, n_guess)
        zk = zk[zk <= c_max]
        if zk.size == 0:
            break
        zeros.append(zk)
        counts.append(zk.size)
        k += 1
    k_max = len(counts) - 1
    radial_counts = np.array(counts)

    ks = np.repeat(np.arange(k_max + 1), radial_counts)
    qs = np.concatenate([np.arange(1, p + 1) for p in radial_counts])
    zero_flat = np.concatenate(zeros)
    # orthonormal under the measure xi dxi dtheta on the disk of radius kappa
    norms = 1.0 / (bandlimit * np.sqrt(np.pi) * np.abs(jv(ks + 1, zero_flat)))

    # quadrature: Gauss-Legendre radial x uniform angular
    n_r = int(np.ceil(c_max)) + 24
    n_t = 4 * (k_max + 1)
    gl_x, gl_w = leggauss(n_r)
    xi_r = bandlimit * (gl_x + 1.0) / 2.0
    w_r = gl_w * bandlimit / 2.0 * xi_r
    theta_t = 2.0 * np.pi * np.arange(n_t) / n_t
    w_t = 2.0 * np.pi / n_t

    node_xi = np.repeat(xi_r, n_t)
    node_theta = np.tile(theta_t, n_r)
    node_w = np.repeat(w_r, n_t) * w_t

    # basis evaluated at quadrature nodes
    radial = jv(ks[None, :], zero_flat[None, :] * node_xi[:, None] / bandlimit)
    phase = (1j ** ks)[None, :] * np.exp(1j * ks[None, :] * node_theta[:, None])
    psi_nodes = norms[None, :] * radial * phase

    # Cartesian frequency grid points inside the disk, for expansion/reconstruction
    f = (np.arange(L) - (L - 1) / 2) / L
    f1, f2 = np.meshgrid(f, f, indexing="ij")
    rad = np.hypot(f1, f2)
    inside = rad.ravel() <= bandlimit + 1e-12
    grid_index = np.flatnonzero(inside)
    g_xi = rad.ravel()[grid_index]
    g_th = np.arctan2(f2.ravel()[grid_index], f1.ravel()[grid_index])
    radial_g = jv(ks[None, :], zero_flat[None, :] * g_xi[:, None] / bandlimit)
    phase_g = (1j ** ks)[None, :] * np.exp(1j * ks[None, :] * g_th[:, None])
    psi_grid = norms[None, :] * radial_g * phase_g

    # expansion solves a least-squares fit against the in-disk grid samples,
    # so expand is an exact left inverse of reconstruct on the basis span.
    # Columns for k < 0 use psi^{-k,q} = (-1)^k conj(psi^{k,q}).
    pos = ks > 0
    sign = np.where(ks[pos] % 2 == 0, 1.0, -1.0)
    psi_full = np.concatenate([psi_grid, sign[None, :] * np.conj(psi_grid[:, pos])], axis=1)
    coeff_solver = np.linalg.pinv(psi_full, rcond=1e-10)

    return BasisTables(
        L=L,
        bandlimit=float(bandlimit),
        support_radius=float(support_radius),
        k_max=k_max,
        radial_counts=radial_counts,
        bessel_zeros=tuple(zeros),
        ks=ks,
        qs=qs,
        norms=norms,
        node_xi=node_xi,
        node_theta=node_theta,
        node_w=node_w,
        psi_nodes=psi_nodes,
        grid_index=grid_index,
        psi_grid=psi_grid,
        coeff_solver=coeff_solver,
    )


def _solve_coeffs(basis, grid_values):
    """Least-squares coefficients from in-disk grid spectrum samples.

    grid_values: (..., n_inside). Returns k >= 0 coefficients with conjugate
    symmetry enforced by averaging the paired +-k solutions.
    """
    a_full = grid_values @ basis.coeff_solver.T
    n = basis.n_coeffs
    pos = basis.ks > 0
    a = a_full[..., :n].copy()
    a[..., pos] = 0.5 * (a[..., pos] + np.conj(a_full[..., n:]))
    return a


def expand(image, basis):
    """Project an L x L real image onto the basis; returns complex coefficients
    for k >= 0 (negative k implied by conjugation)."""
    image = np.asarray(image, dtype=float)
    if image.shape != (basis.L, basis.L):
        raise BasisError(f"image shape {image.shape} does not match basis L={basis.L}")
    spectrum = ft_grid(image).reshape(-1)[basis.grid_index]
    return _solve_coeffs(basis, spectrum)


def expand_stack(images, basis):
    """Expand a stack (n, L, L) -> coefficient matrix (n, n_coeffs)."""
    images = np.asarray(images, dtype=float)
    if images.shape[-2:] != (basis.L, basis.L):
        raise BasisError(f"image shape {images.shape[-2:]} does not match basis L={basis.L}")
    spectra = ft_grid(images).reshape(images.shape[0], -1)[:, basis.grid_index]
    return _solve_coeffs(basis, spectra)


def expand_disk_function(func, basis):
    """Expand a function of Fourier-domain polar coordinates (xi, theta); used
    for radial profiles such as absolute CTFs. Evaluated on the in-disk grid
    points so that reconstruction reproduces the sampled values."""
    f = (np.arange(basis.L) - (basis.L - 1) / 2) / basis.L
    f1, f2 = np.meshgrid(f, f, indexing="ij")
    xi = np.hypot(f1, f2).reshape(-1)[basis.grid_index]
    theta = np.arctan2(f2, f1).reshape(-1)[basis.grid_index]
    vals = np.asarray(func(xi, theta), dtype=complex)
    return _solve_coeffs(basis, vals)


def reconstruct_grid(coeffs, basis):
    """Evaluate the coefficient sum on the centered Cartesian Fourier grid.

    Includes the implied negative-k terms; for conjugate-symmetric coefficient
    data the result is the transform of a real image.
    """
    coeffs = np.asarray(coeffs)
    pos = basis.ks > 0
    vals = basis.psi_grid @ coeffs
    # sum over k<0: a_{-k,q} psi^{-k,q} = (-1)^k conj(a_{k,q} psi^{k,q})
    sign = np.where(basis.ks[pos] % 2 == 0, 1.0, -1.0)
    vals = vals + np.conj((basis.psi_grid[:, pos] * sign[None, :]) @ coeffs[pos])
    grid = np.zeros(basis.L * basis.L, dtype=complex)
    grid[basis.grid_index] = vals
    return grid.reshape(basis.L, basis.L)


def reconstruct(coeffs, basis, atol_imag=1e-8):
    """Evaluate coefficients on the Cartesian Fourier grid and inverse
    transform; output is real (imaginary residue checked then discarded)."""
    grid = reconstruct_grid(coeffs, basis)
    img = ift_grid(grid)
    scale = max(np.abs(img).max(), 1.0)
    if np.abs(img.imag).max() > atol_imag * scale:
        raise BasisError("reconstruction has non-negligible imaginary part")
    return img.real


def rotate_coeffs(coeffs, basis, alpha):
    """Coefficient action of rotating the image counter-clockwise by alpha."""
    return coeffs * np.exp(-1j * basis.ks * alpha)


def _cross_spectrum(basis, coeffs_i, coeffs_j):
    """c(k) = sum_q a_i conj(a_j), k = 0..k_max."""
    prod = coeffs_i * np.conj(coeffs_j)
    c = np.zeros(basis.k_max + 1, dtype=complex)
    np.add.at(c, basis.ks, prod)
    return c


def rid_align(coeffs_i, coeffs_j, basis, fft_size=256):
    """Rotationally invariant distance and optimal alignment angle.

    Returns (d, alpha) with alpha the grid angle by which image j is rotated
    counter-clockwise to best match image i, minimizing the coefficient-space
    L2 distance over the fft_size-point rotation grid.
    """
    if coeffs_i.shape != coeffs_j.shape or coeffs_i.size != basis.n_coeffs:
        raise BasisError("coefficient vectors do not share this basis")
    if fft_size < 2 * basis.k_max + 1:
        raise BasisError(f"fft_size must be >= {2 * basis.k_max + 1}")
    c = _cross_spectrum(basis, coeffs_i, coeffs_j)
    z = c.copy()
    z[1:] *= 2.0  # fold in negative frequencies (conjugate pairs)
    corr = fft_size * np.real(np.fft.ifft(z, n=fft_size))
    t = int(np.argmax(corr))
    d2 = basis.full_sq_norm(coeffs_i) + basis.full_sq_norm(coeffs_j) - 2.0 * corr[t]
    alpha = 2.0 * np.pi * t / fft_size
    if alpha > np.pi:
        alpha -= 2.0 * np.pi
    return float(np.sqrt(max(d2, 0.0))), float(alpha)
