"""Analytic matched-filter correlation matrices for Gaussian basis kernels.

The cross-correlation between a time-scaled, delayed return and the filter
matched to the nominal parameters has a closed form for Gaussian kernels:
a real Gaussian factor in the delay/position mismatch, a carrier phase, and
a decay/phase correction driven by the scale mismatch. Entries are computed
in log-magnitude + phase form so that strongly mismatched pairs underflow
gracefully instead of producing spurious NaNs.

Matrix orientation: the quadratic form s^H R s must reproduce the filter-bank
output, whose conjugated side is the filter (nominal-parameter) one. The row
index of R therefore carries the filter labels and the column index the
target labels; `correlation_entry(k1, k2, ...)` itself takes k1 on the target
side and k2 on the filter side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import hermitian_eig
from .signal_model import ArrayGeometry, BasisSet, GaussianKernel, TargetParams

__all__ = [
    "CorrelationMatrix",
    "WhitenedSystem",
    "correlation_entry",
    "build_R",
    "build_R0",
    "whiten",
    "recover_s",
    "to_whitened",
    "filter_output",
    "correlation_profile",
    "dump_matrix_csv",
]

RANK_TOL = 1e-10


def _entry_terms(mu1, sig1, mu2, sig2, delta, mu, mu_p, omega_c):
    """Vectorized closed-form entry. k1 = (mu1, sig1) on the target side at
    scale mu; k2 = (mu2, sig2) on the filter side at scale mu_p; delta is the
    total delay mismatch tau0 + tau_{m,m'}. Broadcasts over all arguments."""
    var = mu**2 * sig2**2 + mu_p**2 * sig1**2
    mu_g = (mu * mu1 * sig2**2 + mu_p * (mu2 - mu_p * delta) * sig1**2) / var
    sig_g2 = sig1**2 * sig2**2 / var
    scale_gap = mu - mu_p
    log_amp = (
        0.5 * np.log(mu * mu_p)
        - 0.5 * np.log(2.0 * np.pi * var)
        - (mu_p * mu1 - mu * mu2 + mu * mu_p * delta) ** 2 / (2.0 * var)
        - 0.5 * omega_c**2 * scale_gap**2 * sig_g2
    )
    phase = -omega_c * mu_p * delta + omega_c * scale_gap * mu_g
    return np.exp(log_amp + 1j * phase)


def correlation_entry(k1: GaussianKernel, k2: GaussianKernel, tau0: float,
                      tau_mm: float, mu: float, mu_p: float,
                      omega_c: float) -> complex:
    """Matched-filter cross-correlation of one kernel pair.

    k1 rides on the received return (true scaling mu, delayed by tau0 plus the
    element-delay difference tau_mm); k2 is the filter template at the nominal
    scaling mu_p. The reflection coefficient is not included.
    """
    if mu <= 0 or mu_p <= 0:
        raise ValueError("time-scalings must be positive")
    return complex(_entry_terms(k1.mean, k1.std, k2.mean, k2.std,
                                tau0 + tau_mm, mu, mu_p, omega_c))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Dense MN x MN correlation matrix for one target hypothesis."""

    entries: np.ndarray
    theta: TargetParams
    mu_prime: float

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _pair_grids(basis: BasisSet, geom: ArrayGeometry):
    means = basis.flat_means()
    stds = basis.flat_stds()
    gen = basis.flat_generator_index()
    delays = geom.delays()[gen]
    return means, stds, delays


def build_R(basis: BasisSet, geom: ArrayGeometry, theta: TargetParams,
            mu_prime: float | None = None) -> CorrelationMatrix:
    """Correlation matrix R(theta) such that s^H R s is the noiseless filter
    output (per unit reflection) for a target at theta.

    Rows index the filter-side kernels, columns the target-side ones; with
    that orientation the conjugate in s^H lands on the filter coefficients,
    matching the defining correlation integral.
    """
    cfg = basis.config
    if len(geom.element_delays) != cfg.num_generators:
        raise ValueError("geometry does not match the number of generators")
    mu_p = cfg.nominal_scale if mu_prime is None else mu_prime
    means, stds, delays = _pair_grids(basis, geom)

    # column j = target kernel, row i = filter kernel
    tgt_mean = means[None, :]
    tgt_std = stds[None, :]
    flt_mean = means[:, None]
    flt_std = stds[:, None]
    delta = theta.delay_offset + (delays[None, :] - delays[:, None])
    entries = _entry_terms(tgt_mean, tgt_std, flt_mean, flt_std, delta,
                           theta.scale, mu_p, cfg.carrier)
    return CorrelationMatrix(entries=entries, theta=theta, mu_prime=mu_p)


def build_R0(basis: BasisSet, geom: ArrayGeometry,
             mu_prime: float | None = None) -> CorrelationMatrix:
    """Nominal matrix R0 = R(tau0=0, mu', mu'), symmetrized to scrub
    floating-point asymmetry; this is the Gram matrix of the filter bank."""
    cfg = basis.config
    mu_p = cfg.nominal_scale if mu_prime is None else mu_prime
    nominal = TargetParams(delay_offset=0.0, scale=mu_p)
    r = build_R(basis, geom, nominal, mu_p)
    sym = 0.5 * (r.entries + r.entries.conj().T)
    return CorrelationMatrix(entries=sym, theta=nominal, mu_prime=mu_p)


def correlation_profile(basis: BasisSet, geom: ArrayGeometry, s: np.ndarray,
                        mus: np.ndarray, taus: np.ndarray,
                        mu_prime: float | None = None,
                        chunk: int = 512,
                        drop_tol: float = 1e-7) -> np.ndarray:
    """Batched s^H R(theta) s over many (mu, tau0) points.

    Equivalent to building R at every theta but sums the pair terms directly.
    Pairs are dropped greedily, smallest first, while the summed worst-case
    contribution of everything dropped stays below `drop_tol` (the values are
    order 1 for a unit-energy design); pass drop_tol=0 for the exact sum.
    Returns a complex array the length of `mus`.
    """
    cfg = basis.config
    mu_p = cfg.nominal_scale if mu_prime is None else mu_prime
    s = np.asarray(s, dtype=complex)
    if s.shape != (basis.size,):
        raise ValueError(f"coefficient vector must have length {basis.size}")
    mus = np.asarray(mus, dtype=float).ravel()
    taus = np.asarray(taus, dtype=float).ravel()
    if mus.shape != taus.shape:
        raise ValueError("mus and taus must have the same length")
    if mus.size == 0:
        return np.empty(0, dtype=complex)

    means, stds, delays = _pair_grids(basis, geom)
    n = basis.size
    # pair arrays, flattened over (filter i, target j)
    tgt_mean = np.broadcast_to(means[None, :], (n, n)).ravel()
    tgt_std = np.broadcast_to(stds[None, :], (n, n)).ravel()
    flt_mean = np.broadcast_to(means[:, None], (n, n)).ravel()
    flt_std = np.broadcast_to(stds[:, None], (n, n)).ravel()
    dgap = (delays[None, :] - delays[:, None]).ravel()
    weight = (np.conj(s)[:, None] * s[None, :]).ravel()

    if drop_tol > 0.0:
        # conservative per-pair bound: |w| / sqrt(2 pi D_min); the position
        # and decay exponentials only shrink the true contribution
        mu_min = float(np.min(mus))
        d_min = mu_min**2 * flt_std**2 + mu_p**2 * tgt_std**2
        bound = np.abs(weight) / np.sqrt(2.0 * np.pi * d_min)
        order = np.argsort(bound)
        dropped = np.cumsum(bound[order])
        cut = int(np.searchsorted(dropped, drop_tol, side="right"))
        keep = np.ones(bound.size, dtype=bool)
        keep[order[:cut]] = False
        tgt_mean, tgt_std = tgt_mean[keep], tgt_std[keep]
        flt_mean, flt_std = flt_mean[keep], flt_std[keep]
        dgap, weight = dgap[keep], weight[keep]

    omega_c = cfg.carrier
    f_var = (flt_std**2)[:, None]
    t_var = (tgt_std**2)[:, None]
    t_mean = tgt_mean[:, None]
    f_mean = flt_mean[:, None]
    prod_var = (tgt_std * flt_std)[:, None] ** 2
    gap_c = dgap[:, None]
    log_mu_p = 0.5 * np.log(mu_p)

    out = np.empty(mus.size, dtype=complex)
    for start in range(0, mus.size, chunk):
        stop = min(start + chunk, mus.size)
        mu_c = mus[start:stop][None, :]
        tau_c = taus[start:stop][None, :]
        delta = tau_c + gap_c
        var = mu_c**2 * f_var + mu_p**2 * t_var
        mu_g = (mu_c * t_mean * f_var + mu_p * (f_mean - mu_p * delta) * t_var) / var
        gap = mu_c - mu_p
        num = mu_p * t_mean - mu_c * f_mean + mu_c * mu_p * delta
        expo = (-(num * num) / (2.0 * var)
                - (0.5 * omega_c**2) * (gap * gap) * (prod_var / var)
                + 1j * (omega_c * (gap * mu_g - mu_p * delta)))
        terms = np.exp(expo)
        terms /= np.sqrt(2.0 * np.pi * var)
        vals = weight @ terms
        vals *= np.exp(0.5 * np.log(mu_c[0]) + log_mu_p)
        out[start:stop] = vals
    return out


@dataclass(frozen=True)
class WhitenedSystem:
    """Signal-space coordinates of the design problem.

    u0 spans the range of R0 (orthonormal columns), sigma0 holds the positive
    eigenvalues, and r_tilde are the correlation matrices expressed in the
    whitened coordinates u = sigma0^{1/2} u0^H s, where the energy constraint
    becomes ||u|| = 1.
    """

    u0: np.ndarray
    sigma0: np.ndarray
    rank: int
    r_tilde: tuple[np.ndarray, ...]


def whiten(r0: CorrelationMatrix, r_list: list[CorrelationMatrix],
           rank_tol: float = RANK_TOL) -> WhitenedSystem:
    """Eigendecompose R0, drop its numerical null space, and whiten each
    R(theta_k). Zero-energy directions produce no filter output at any theta,
    so discarding them loses nothing."""
    dec = hermitian_eig(r0.entries)
    lam_max = float(dec.eigenvalues[0])
    if lam_max <= 0.0 or not np.isfinite(lam_max):
        raise ValueError("R0 is numerically zero: no signal space to design in")
    keep = dec.eigenvalues > rank_tol * lam_max
    rank = int(np.count_nonzero(keep))
    u0 = dec.eigenvectors[:, keep]
    sigma0 = dec.eigenvalues[keep].astype(float)
    inv_root = 1.0 / np.sqrt(sigma0)
    r_tilde = tuple(
        (inv_root[:, None] * (u0.conj().T @ r.entries @ u0)) * inv_root[None, :]
        for r in r_list
    )
    return WhitenedSystem(u0=u0, sigma0=sigma0, rank=rank, r_tilde=r_tilde)


def recover_s(u: np.ndarray, ws: WhitenedSystem) -> np.ndarray:
    """Coefficient vector s = U0 Sigma0^{-1/2} u (the zero-energy component is
    fixed at zero); satisfies s^H R0 s = ||u||^2."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (ws.rank,):
        raise ValueError(f"whitened vector must have length {ws.rank}")
    return ws.u0 @ (u / np.sqrt(ws.sigma0))


def to_whitened(s: np.ndarray, ws: WhitenedSystem) -> np.ndarray:
    """Whitened coordinates u = Sigma0^{1/2} U0^H s."""
    s = np.asarray(s, dtype=complex)
    return np.sqrt(ws.sigma0) * (ws.u0.conj().T @ s)


def filter_output(s: np.ndarray, r: CorrelationMatrix, sigma_t: float = 1.0) -> complex:
    """Noiseless filter-bank output sigma_t * s^H R s."""
    s = np.asarray(s, dtype=complex)
    if s.shape != (r.size,):
        raise ValueError("coefficient vector does not match the matrix size")
    return complex(sigma_t * (s.conj() @ r.entries @ s))


def dump_matrix_csv(r: CorrelationMatrix, path) -> None:
    """Debug dump as rows of (row, col, re, im)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,re,im\n")
        for i in range(r.size):
            for j in range(r.size):
                v = r.entries[i, j]
                fh.write(f"{i},{j},{v.real:.17g},{v.imag:.17g}\n")
