"""Threshold detector on the matched-filter output: closed-form detection and
false-alarm probabilities, Monte Carlo ROC curves, and the epsilon-worse-set
area diagnostic.

The filter output under noise is circular complex Gaussian with total
variance sigma^2 * s^H R0 s, so |r| is Rayleigh under H0 and Rician under H1;
the closed forms are an exponential tail and a Marcum Q. Monte Carlo trials
are split into fixed-size chunks with independent seed substreams, making
results bit-identical for any worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .correlation import build_R0, correlation_profile
from .numerics import marcum_q1
from .optimizer import DesignResult
from .signal_model import ArrayGeometry, BasisSet, ParameterBox, TargetParams, box_grid

__all__ = [
    "DetectorConfig",
    "RocTable",
    "glrt_decide",
    "pfa_analytic",
    "pd_analytic",
    "calibrate_threshold",
    "roc_monte_carlo",
    "roc_with_outsource",
    "eps_worse_area",
]

_ROC_DOMAIN = 0x0C
DEFAULT_CHUNK = 16384


@dataclass(frozen=True)
class DetectorConfig:
    """Noise power, threshold sweep, and an optional false-alarm target."""

    noise_power: float
    thresholds: tuple[float, ...]
    target_pfa: float | None = None

    def __post_init__(self):
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")
        if len(self.thresholds) == 0:
            raise ValueError("threshold sweep must be nonempty")
        if any(g < 0 for g in self.thresholds):
            raise ValueError("thresholds must be nonnegative")
        if self.target_pfa is not None and not (0.0 < self.target_pfa < 1.0):
            raise ValueError("target false-alarm rate must lie in (0, 1)")

    @classmethod
    def from_snr_db(cls, snr_db: float, thresholds, s_energy: float = 1.0,
                    sigma_t: float = 1.0) -> "DetectorConfig":
        """Noise power from SNR = sigma_t^2 s^H R0 s / sigma^2."""
        noise = sigma_t**2 * s_energy / 10.0 ** (snr_db / 10.0)
        return cls(noise_power=noise, thresholds=tuple(float(g) for g in thresholds))


@dataclass
class RocTable:
    """Sampled (gamma, P_FA, P_D) triples with their provenance."""

    gammas: np.ndarray
    pfa: np.ndarray
    pd: np.ndarray
    provenance: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)

    def auc(self) -> float:
        """Area under P_D vs P_FA, integrated over the swept range."""
        order = np.argsort(self.pfa)
        return float(np.trapezoid(self.pd[order], self.pfa[order]))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted({**self.provenance, **self.scenario}):
                val = {**self.provenance, **self.scenario}[key]
                fh.write(f"# {key}={val}\n")
            fh.write("gamma,pfa,pd\n")
            for g, fa, d in zip(self.gammas, self.pfa, self.pd):
                fh.write(f"{g:.10g},{fa:.10g},{d:.10g}\n")

    @classmethod
    def from_csv(cls, path) -> "RocTable":
        meta: dict = {}
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, val = body.split("=", 1)
                        meta[key.strip()] = val.strip()
                    continue
                if line.lower().startswith("gamma"):
                    continue
                parts = line.split(",")
                if len(parts) != 3:
                    raise ValueError(f"malformed ROC row: {line!r}")
                rows.append([float(p) for p in parts])
        if not rows:
            raise ValueError(f"no data rows in {path}")
        arr = np.array(rows)
        return cls(gammas=arr[:, 0], pfa=arr[:, 1], pd=arr[:, 2], provenance=meta)


def glrt_decide(r: complex, gamma: float):
    """Detection flag: |r| strictly above the threshold."""
    return np.abs(r) > gamma


def pfa_analytic(gamma, noise_power: float, s_energy: float = 1.0):
    """False-alarm probability exp(-gamma^2 / (s_energy sigma^2))."""
    if s_energy <= 0:
        raise ValueError("filter energy must be positive")
    gamma = np.asarray(gamma, dtype=float)
    out = np.exp(-(gamma**2) / (s_energy * noise_power))
    return float(out) if out.ndim == 0 else out


def pd_analytic(gamma, mean, noise_power: float, s_energy: float = 1.0):
    """Detection probability: Rician tail via the Marcum Q function.

    `mean` is the noiseless filter output sigma_t s^H R(theta) s; only its
    magnitude matters because the noise is circular."""
    if s_energy <= 0:
        raise ValueError("filter energy must be positive")
    scale = np.sqrt(2.0 / (s_energy * noise_power))
    return marcum_q1(np.abs(mean) * scale, np.asarray(gamma, dtype=float) * scale)


def calibrate_threshold(alpha: float, noise_power: float, s_energy: float = 1.0) -> float:
    """Threshold achieving P_FA = alpha: gamma = sqrt(-s_energy sigma^2 ln(alpha))."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    return float(np.sqrt(-s_energy * noise_power * np.log(alpha)))


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------

def _count_exceedances(magnitudes: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """Number of |r| strictly above each threshold (exact, handles ties)."""
    sorted_mags = np.sort(magnitudes)
    return magnitudes.size - np.searchsorted(sorted_mags, gammas, side="right")


def _chunk_sizes(trials: int, chunk: int) -> list[int]:
    full, rest = divmod(trials, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _mc_counts(mean_fn, interferer_fn, gammas: np.ndarray, total_var: float,
               trials: int, seed: int, chunk: int, workers: int):
    """Chunked dual-hypothesis exceedance counts.

    Per chunk, the draw order is fixed: H1 means (if random), interferer
    (if any), then noise real/imaginary parts. One noise draw serves every
    threshold and both hypotheses."""
    sizes = _chunk_sizes(trials, chunk)

    def one_chunk(idx_size):
        idx, size = idx_size
        rng = np.random.default_rng(np.random.SeedSequence([seed, _ROC_DOMAIN, idx]))
        means = mean_fn(rng, size)
        base = interferer_fn(rng, size) if interferer_fn is not None else 0.0
        scale = np.sqrt(total_var / 2.0)
        noise = scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        h0 = base + noise
        h1 = means + h0
        return (_count_exceedances(np.abs(h0), gammas),
                _count_exceedances(np.abs(h1), gammas))

    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_chunk, jobs))
    else:
        results = [one_chunk(j) for j in jobs]

    c0 = np.zeros(gammas.size, dtype=np.int64)
    c1 = np.zeros(gammas.size, dtype=np.int64)
    for r0, r1 in results:
        c0 += r0
        c1 += r1
    return c0, c1


def _uniform_theta_mean_fn(basis: BasisSet, geom: ArrayGeometry, s: np.ndarray,
                           box: ParameterBox, sigma_t: float):
    mu_lo, mu_hi = box.mu_bounds
    tau_lo, tau_hi = box.tau_bounds

    def mean_fn(rng: np.random.Generator, size: int) -> np.ndarray:
        mus = rng.uniform(mu_lo, mu_hi, size)
        taus = rng.uniform(tau_lo, tau_hi, size)
        return sigma_t * correlation_profile(basis, geom, s, mus, taus)

    return mean_fn


def _worst_theta_mean_fn(basis: BasisSet, geom: ArrayGeometry, s: np.ndarray,
                         box: ParameterBox, sigma_t: float, grid: tuple[int, int]):
    pts = box_grid(box, grid[0], grid[1])
    mus = np.array([p.scale for p in pts])
    taus = np.array([p.delay_offset for p in pts])
    vals = correlation_profile(basis, geom, s, mus, taus)
    worst = vals[int(np.argmin(np.abs(vals)))]

    def mean_fn(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, sigma_t * worst, dtype=complex)

    return mean_fn


def _frame_sampler(box: ParameterBox, frame_scale: float):
    """Uniform sampler on the frame (scaled box minus the box)."""
    mu_lo, mu_hi = box.mu_bounds
    tau_lo, tau_hi = box.tau_bounds
    mu_c = 0.5 * (mu_lo + mu_hi)
    mu_h = 0.5 * (mu_hi - mu_lo) * frame_scale
    tau_h = 0.5 * (tau_hi - tau_lo) * frame_scale

    def sample(rng: np.random.Generator, size: int):
        mus = np.empty(size)
        taus = np.empty(size)
        need = np.ones(size, dtype=bool)
        for _ in range(200):
            n = int(np.count_nonzero(need))
            if n == 0:
                break
            mus[need] = rng.uniform(mu_c - mu_h, mu_c + mu_h, n)
            taus[need] = rng.uniform(-tau_h, tau_h, n)
            inside = ((mus >= mu_lo) & (mus <= mu_hi)
                      & (taus >= tau_lo) & (taus <= tau_hi))
            need &= inside
        else:
            raise RuntimeError("frame sampler failed to converge")
        return mus, taus

    return sample


def _design_energy(design: DesignResult, basis: BasisSet, geom: ArrayGeometry) -> float:
    r0 = build_R0(basis, geom)
    return float(np.real(design.s.conj() @ r0.entries @ design.s))


def roc_monte_carlo(design: DesignResult, basis: BasisSet, geom: ArrayGeometry,
                    box: ParameterBox, det: DetectorConfig, trials: int,
                    theta_mode: str = "uniform", seed: int = 0,
                    sigma_t: float = 1.0, worst_grid: tuple[int, int] = (51, 51),
                    chunk: int = DEFAULT_CHUNK, workers: int = 1) -> RocTable:
    """ROC curve by Monte Carlo for a designed waveform.

    theta_mode "uniform" draws the target parameters fresh from the box each
    trial; "worst" pins them at the grid point minimizing the correlation
    magnitude.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    gammas = np.asarray(det.thresholds, dtype=float)
    s_energy = _design_energy(design, basis, geom)
    total_var = det.noise_power * s_energy

    if theta_mode == "uniform":
        mean_fn = _uniform_theta_mean_fn(basis, geom, design.s, box, sigma_t)
    elif theta_mode == "worst":
        mean_fn = _worst_theta_mean_fn(basis, geom, design.s, box, sigma_t, worst_grid)
    else:
        raise ValueError(f"unknown theta mode: {theta_mode}")

    c0, c1 = _mc_counts(mean_fn, None, gammas, total_var, trials, seed, chunk, workers)
    return RocTable(
        gammas=gammas,
        pfa=c0 / trials,
        pd=c1 / trials,
        provenance={"provenance": "monte-carlo", "trials": trials, "seed": seed},
        scenario={"theta_mode": theta_mode, "sigma_t": sigma_t,
                  "noise_power": det.noise_power, "beta": box.shrink},
    )


def roc_with_outsource(design: DesignResult, basis: BasisSet, geom: ArrayGeometry,
                       box: ParameterBox, det: DetectorConfig, trials: int,
                       sigma_os: float, theta_mode: str = "uniform", seed: int = 0,
                       sigma_t: float = 1.0, out_sampler=None,
                       frame_scale: float = 1.5,
                       worst_grid: tuple[int, int] = (51, 51),
                       chunk: int = DEFAULT_CHUNK, workers: int = 1) -> RocTable:
    """ROC when an out-of-region reflector contaminates both hypotheses.

    With sigma_os = 0 no interferer draws are consumed, so the result is
    bit-identical to roc_monte_carlo at the same seed.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    gammas = np.asarray(det.thresholds, dtype=float)
    s_energy = _design_energy(design, basis, geom)
    total_var = det.noise_power * s_energy

    if theta_mode == "uniform":
        mean_fn = _uniform_theta_mean_fn(basis, geom, design.s, box, sigma_t)
    elif theta_mode == "worst":
        mean_fn = _worst_theta_mean_fn(basis, geom, design.s, box, sigma_t, worst_grid)
    else:
        raise ValueError(f"unknown theta mode: {theta_mode}")

    interferer_fn = None
    if sigma_os != 0.0:
        sampler = out_sampler if out_sampler is not None else _frame_sampler(box, frame_scale)

        def interferer_fn(rng: np.random.Generator, size: int) -> np.ndarray:
            mus, taus = sampler(rng, size)
            return sigma_os * correlation_profile(basis, geom, design.s, mus, taus)

    c0, c1 = _mc_counts(mean_fn, interferer_fn, gammas, total_var, trials, seed,
                        chunk, workers)
    return RocTable(
        gammas=gammas,
        pfa=c0 / trials,
        pd=c1 / trials,
        provenance={"provenance": "monte-carlo", "trials": trials, "seed": seed},
        scenario={"theta_mode": theta_mode, "sigma_t": sigma_t,
                  "noise_power": det.noise_power, "beta": box.shrink,
                  "sigma_os": sigma_os, "frame_scale": frame_scale},
    )


# ---------------------------------------------------------------------------
# Epsilon-worse-set diagnostic
# ---------------------------------------------------------------------------

def eps_worse_area_from_values(values: np.ndarray, eps: float, sigma_ts: np.ndarray,
                               alpha: float, noise_power: float,
                               s_energy: float = 1.0) -> float:
    """Area fraction of the scenarios whose detection probability is within
    eps of the worst one, for given correlation values on a region grid."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    gamma = calibrate_threshold(alpha, noise_power, s_energy)
    means = np.abs(np.asarray(values)).reshape(-1, 1) * np.asarray(sigma_ts).reshape(1, -1)
    pd = pd_analytic(gamma, means, noise_power, s_energy)
    worst = float(np.min(pd))
    return float(np.mean(pd < worst + eps))


def eps_worse_area(design: DesignResult, basis: BasisSet, geom: ArrayGeometry,
                   region: ParameterBox, eps: float,
                   sigma_t_range: tuple[float, float], alpha: float,
                   noise_power: float, n_mu: int = 33, n_tau: int = 33,
                   n_sigma: int = 9) -> float:
    """Definition-style diagnostic: fraction of the (theta, sigma_t) region
    whose P_D lies within eps of the worst P_D, at fixed P_FA = alpha."""
    pts = box_grid(region, n_mu, n_tau)
    mus = np.array([p.scale for p in pts])
    taus = np.array([p.delay_offset for p in pts])
    vals = correlation_profile(basis, geom, design.s, mus, taus)
    sigma_ts = np.linspace(sigma_t_range[0], sigma_t_range[1], n_sigma)
    s_energy = _design_energy(design, basis, geom)
    return eps_worse_area_from_values(vals, eps, sigma_ts, alpha, noise_power, s_energy)
