"""Dense Hermitian eigensolver plus the small special-function and quadrature
utilities shared by the waveform-design and detector code."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenDecomposition",
    "hermitian_eig",
    "top_eigpair",
    "marcum_q1",
    "integrate_1d",
]

_HERM_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def hermitian_eig(h: np.ndarray) -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix.

    The input is symmetrized as (H + H^H)/2 before factorization; inputs that
    are not Hermitian within 1e-10 (relative to the largest entry) are
    rejected rather than silently symmetrized away.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h.real)) or not np.all(np.isfinite(h.imag if np.iscomplexobj(h) else h.real)):
        raise ValueError("matrix contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if float(np.max(np.abs(h - h.conj().T))) > _HERM_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    hs = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(hs)
    order = np.argsort(w)[::-1]
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=v[:, order])


def top_eigpair(h: np.ndarray) -> tuple[float, np.ndarray]:
    """Dominant eigenpair with a fixed phase convention.

    The eigenvector is rotated so its largest-magnitude component is real
    positive, which makes repeated calls on the same matrix bit-stable.
    """
    dec = hermitian_eig(h)
    vec = dec.eigenvectors[:, 0].copy()
    k = int(np.argmax(np.abs(vec)))
    pivot = vec[k]
    if np.abs(pivot) > 0:
        vec *= np.conj(pivot) / np.abs(pivot)
    return float(dec.eigenvalues[0]), vec


# ---------------------------------------------------------------------------
# Marcum Q
# ---------------------------------------------------------------------------

def marcum_q1(a, b):
    """First-order Marcum Q function Q_1(a, b).

    Tail probability P(R > b) of a Rician variable with noncentrality a and
    unit scale. Evaluated as a Poisson mixture of chi-square tails,

        Q_1(a, b) = sum_k  Pois(k; a^2/2) * P(chi^2_{2k+2} > b^2),

    whose terms are all positive, so the truncated sum is monotone and the
    truncation error is bounded by the remaining Poisson mass. Absolute error
    is below 1e-10 over the supported range. Accepts scalars or arrays
    (broadcast together).
    """
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    b_arr = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise ValueError("marcum_q1 requires a >= 0 and b >= 0")
    if not (np.all(np.isfinite(a_arr)) and np.all(np.isfinite(b_arr))):
        raise ValueError("marcum_q1 requires finite arguments")
    a_b, b_b = np.broadcast_arrays(a_arr, b_arr)
    out = np.empty(a_b.shape, dtype=float)

    x = 0.5 * a_b.ravel() ** 2
    y = 0.5 * b_b.ravel() ** 2
    flat = out.reshape(-1)

    big = (x > 690.0) | (y > 690.0)
    if np.any(~big):
        flat[~big] = _marcum_series(x[~big], y[~big])
    for i in np.nonzero(big)[0]:
        flat[i] = _marcum_logspace(float(x[i]), float(y[i]))

    if np.isscalar(a) and np.isscalar(b):
        return float(out.reshape(-1)[0])
    return out.reshape(np.broadcast_shapes(np.shape(a), np.shape(b)))


def _marcum_series(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Direct-recurrence path, valid while exp(-x) and exp(-y) are normal."""
    n = x.size
    pois = np.exp(-x)            # Poisson pmf at k
    cum_pois = pois.copy()
    chi_term = np.exp(-y)        # e^-y y^k / k!
    chi_cdf = chi_term.copy()    # P(chi^2_{2k+2} > b^2)
    total = pois * chi_cdf
    done = np.zeros(n, dtype=bool)

    k = 0
    k_cap = int(np.max(x) + 12.0 * math.sqrt(np.max(x) + 1.0) + 60.0)
    while not np.all(done) and k <= k_cap:
        # once the chi tail is 1 to machine precision, all remaining terms
        # contribute exactly the remaining Poisson mass
        saturated = ~done & (1.0 - chi_cdf < 1e-16)
        total[saturated] += 1.0 - cum_pois[saturated]
        done |= saturated
        done |= 1.0 - cum_pois < 1e-15

        k += 1
        live = ~done
        if not np.any(live):
            break
        pois[live] *= x[live] / k
        cum_pois[live] += pois[live]
        chi_term[live] *= y[live] / k
        chi_cdf[live] += chi_term[live]
        total[live] += pois[live] * chi_cdf[live]

    return np.minimum(total, 1.0)


def _marcum_logspace(x: float, y: float) -> float:
    """Log-space evaluation for extreme arguments where exp(-x) underflows."""
    if x == 0.0:
        return math.exp(-y) if y < 745.0 else 0.0
    half_width = 10.0 * math.sqrt(max(x, y) + 1.0) + 30.0
    k_lo = max(0, int(x - half_width))
    k_hi = int(x + half_width)
    ks = np.arange(k_lo, k_hi + 1, dtype=float)
    log_pois = -x + ks * math.log(x) - _lgamma_vec(ks + 1.0)
    pois = np.exp(log_pois)

    j_hi = k_hi
    js = np.arange(0, j_hi + 1, dtype=float)
    if y == 0.0:
        chi_cdf_all = np.ones(j_hi + 1)
    else:
        log_chi = -y + js * math.log(y) - _lgamma_vec(js + 1.0)
        chi_cdf_all = np.minimum(np.cumsum(np.exp(log_chi)), 1.0)
    total = float(np.sum(pois * chi_cdf_all[k_lo : k_hi + 1]))
    # Poisson mass above the window sees a chi tail of essentially 1
    total += max(0.0, 1.0 - float(np.sum(pois)) - _poisson_lower_tail(x, k_lo))
    return min(total, 1.0)


def _poisson_lower_tail(x: float, k_lo: int) -> float:
    if k_lo == 0:
        return 0.0
    ks = np.arange(0, k_lo, dtype=float)
    return float(np.sum(np.exp(-x + ks * math.log(x) - _lgamma_vec(ks + 1.0))))


def _lgamma_vec(v: np.ndarray) -> np.ndarray:
    return np.vectorize(math.lgamma, otypes=[float])(v)


# ---------------------------------------------------------------------------
# Adaptive quadrature
# ---------------------------------------------------------------------------

def integrate_1d(f, a: float, b: float, tol: float = 1e-10,
                 max_rounds: int = 48, max_intervals: int = 1 << 20) -> complex:
    """Adaptive Simpson integration of a (possibly complex) integrand.

    `f` is called with numpy arrays of sample points and must evaluate
    elementwise; scalar-constant returns are broadcast. Subdivision continues
    until the Richardson error estimate of every subinterval is within its
    share of `tol` (absolute). Raises RuntimeError if the interval budget is
    exhausted before convergence.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a == b:
        return 0.0 + 0.0j

    def call(ts: np.ndarray) -> np.ndarray:
        vals = np.asarray(f(ts))
        if vals.ndim == 0:
            vals = np.broadcast_to(vals, ts.shape)
        return vals.astype(complex)

    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    mid = 0.5 * (lo + hi)
    f_lo = call(lo)
    f_hi = call(hi)
    f_mid = call(mid)
    simpson = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    budget = np.array([tol], dtype=float)

    result = 0.0 + 0.0j
    for _ in range(max_rounds):
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        f_lmid = call(lmid)
        f_rmid = call(rmid)
        s_left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lmid + f_mid)
        s_right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rmid + f_hi)
        err = s_left + s_right - simpson
        # do not demand accuracy below the roundoff floor of the samples
        f_scale = np.maximum.reduce(
            [np.abs(f_lo), np.abs(f_mid), np.abs(f_hi), np.abs(f_lmid), np.abs(f_rmid)]
        )
        floor = 64.0 * np.finfo(float).eps * f_scale * (hi - lo)
        ok = np.abs(err) <= 15.0 * np.maximum(budget, floor)

        if np.any(ok):
            result += complex(np.sum(s_left[ok] + s_right[ok] + err[ok] / 15.0))
        if np.all(ok):
            return result

        keep = ~ok
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        f_lo = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi = np.concatenate([f_mid[keep], f_hi[keep]])
        mid = 0.5 * (lo + hi)
        f_mid = np.concatenate([f_lmid[keep], f_rmid[keep]])
        simpson = np.concatenate([s_left[keep], s_right[keep]])
        budget = np.concatenate([0.5 * budget[keep], 0.5 * budget[keep]])
        if lo.size > max_intervals:
            raise RuntimeError("integrate_1d: interval budget exhausted")

    raise RuntimeError("integrate_1d: no convergence within max_rounds")
