"""Physical configuration: Gaussian basis kernels, array geometry, and the
delay/time-scaling uncertainty box.

Every transmit generator carries the same deterministic grid of kernel means
over the pulse; kernel widths are drawn at random between a bandwidth-driven
lower limit and the largest width that keeps the +-3 sigma extent inside the
pulse. All types are immutable and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SystemConfig",
    "GaussianKernel",
    "BasisSet",
    "ArrayGeometry",
    "TargetParams",
    "ParameterBox",
    "sample_basis",
    "eval_waveform",
    "box_grid",
    "corner_pair",
]


@dataclass(frozen=True)
class SystemConfig:
    """Transmitter bank dimensions and RF parameters.

    `carrier` is the angular carrier frequency omega_c in rad/s; the default
    factory places it at twice the bandwidth (f_c = 2B), above the band edge.
    """

    num_generators: int = 3
    num_basis: int = 30
    pulse_duration: float = 1.0
    bandwidth: float = 200.0
    carrier: float = 2.0 * math.pi * 400.0
    nominal_scale: float = 0.94

    def __post_init__(self):
        if self.num_generators < 1 or self.num_basis < 1:
            raise ValueError("need at least one generator and one basis function")
        if self.pulse_duration <= 0 or self.bandwidth <= 0:
            raise ValueError("pulse duration and bandwidth must be positive")
        if self.nominal_scale <= 0:
            raise ValueError("nominal scale must be positive")

    @classmethod
    def default(cls, num_generators: int = 3, num_basis: int = 30,
                pulse_duration: float = 1.0, bandwidth: float = 200.0,
                nominal_scale: float = 0.94) -> "SystemConfig":
        """Standard profile: BT = 200, carrier at f_c = 2B."""
        return cls(
            num_generators=num_generators,
            num_basis=num_basis,
            pulse_duration=pulse_duration,
            bandwidth=bandwidth,
            carrier=2.0 * math.pi * (2.0 * bandwidth),
            nominal_scale=nominal_scale,
        )

    @property
    def carrier_freq(self) -> float:
        """f_c in Hz."""
        return self.carrier / (2.0 * math.pi)

    @property
    def bt_product(self) -> float:
        return self.bandwidth * self.pulse_duration


@dataclass(frozen=True)
class GaussianKernel:
    """Unit-area Gaussian basis kernel: mean and standard deviation in seconds."""

    mean: float
    std: float

    def __post_init__(self):
        if self.std <= 0:
            raise ValueError("kernel std must be positive")

    def density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(-((t - self.mean) ** 2) / (2.0 * self.std**2)) / math.sqrt(
            2.0 * math.pi * self.std**2
        )


@dataclass(frozen=True)
class BasisSet:
    """M x N grid of kernels; flat ordering is generator-major (all N kernels
    of generator 1, then generator 2, ...), matching the coefficient vector."""

    kernels: tuple[tuple[GaussianKernel, ...], ...]
    config: SystemConfig

    def __post_init__(self):
        m, n = self.config.num_generators, self.config.num_basis
        if len(self.kernels) != m or any(len(row) != n for row in self.kernels):
            raise ValueError(f"expected a {m} x {n} kernel grid")
        t_max = self.config.pulse_duration
        for row in self.kernels:
            for k in row:
                if k.mean - 3.0 * k.std < -1e-12 or k.mean + 3.0 * k.std > t_max + 1e-12:
                    raise ValueError(
                        f"kernel (mean={k.mean}, std={k.std}) extends outside the pulse"
                    )

    @property
    def size(self) -> int:
        return self.config.num_generators * self.config.num_basis

    def flat_means(self) -> np.ndarray:
        return np.array([k.mean for row in self.kernels for k in row])

    def flat_stds(self) -> np.ndarray:
        return np.array([k.std for row in self.kernels for k in row])

    def flat_generator_index(self) -> np.ndarray:
        m, n = self.config.num_generators, self.config.num_basis
        return np.repeat(np.arange(m), n)

    def kernel(self, flat_index: int) -> GaussianKernel:
        n = self.config.num_basis
        return self.kernels[flat_index // n][flat_index % n]


@dataclass(frozen=True)
class ArrayGeometry:
    """Per-element propagation delays toward the (known, fixed) direction."""

    element_delays: tuple[float, ...]
    direction: float = 0.0

    def __post_init__(self):
        if any(not math.isfinite(d) for d in self.element_delays):
            raise ValueError("element delays must be finite")

    @classmethod
    def broadside(cls, num_elements: int) -> "ArrayGeometry":
        """All-zero delays: half-wavelength ULA observed at broadside."""
        return cls(element_delays=(0.0,) * num_elements, direction=0.0)

    @classmethod
    def uniform_linear(cls, num_elements: int, carrier_freq: float,
                       direction: float = 0.0) -> "ArrayGeometry":
        """Half-wavelength ULA: delay m * sin(phi) / (2 f_c) for element m."""
        step = math.sin(direction) / (2.0 * carrier_freq)
        return cls(element_delays=tuple(m * step for m in range(num_elements)),
                   direction=direction)

    def delay_diff(self, m: int, m_prime: int) -> float:
        return self.element_delays[m] - self.element_delays[m_prime]

    def delays(self) -> np.ndarray:
        return np.array(self.element_delays)


@dataclass(frozen=True)
class TargetParams:
    """A point in the uncertainty region: delay offset tau0 = tau - tau',
    time-scaling mu, and the reflection coefficient of the scenario."""

    delay_offset: float
    scale: float
    reflection: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("time-scaling must be positive")


@dataclass(frozen=True)
class ParameterBox:
    """Uncertainty box for (mu, tau0). The shrink factor beta in (0, 1]
    widens the effective half-widths to eps/beta, so smaller beta means a
    larger region."""

    mu_center: float
    mu_halfwidth: float
    tau_halfwidth: float
    shrink: float = 1.0

    def __post_init__(self):
        if self.mu_halfwidth <= 0 or self.tau_halfwidth <= 0:
            raise ValueError("half-widths must be positive")
        if not (0.0 < self.shrink <= 1.0):
            raise ValueError("shrink factor must lie in (0, 1]")

    @classmethod
    def from_resolution(cls, config: SystemConfig, shrink: float = 1.0,
                        mu_halfwidth: float | None = None,
                        tau_halfwidth: float | None = None) -> "ParameterBox":
        """Half-widths at twice the system resolution limits: 2/B in delay and
        2/(f_c T) in scale, unless overridden."""
        eps_tau = 2.0 / config.bandwidth if tau_halfwidth is None else tau_halfwidth
        eps_mu = (2.0 / (config.carrier_freq * config.pulse_duration)
                  if mu_halfwidth is None else mu_halfwidth)
        return cls(mu_center=config.nominal_scale, mu_halfwidth=eps_mu,
                   tau_halfwidth=eps_tau, shrink=shrink)

    def with_shrink(self, shrink: float) -> "ParameterBox":
        return replace(self, shrink=shrink)

    @property
    def mu_bounds(self) -> tuple[float, float]:
        half = self.mu_halfwidth / self.shrink
        return self.mu_center - half, self.mu_center + half

    @property
    def tau_bounds(self) -> tuple[float, float]:
        half = self.tau_halfwidth / self.shrink
        return -half, half

    def contains(self, theta: TargetParams) -> bool:
        mu_lo, mu_hi = self.mu_bounds
        tau_lo, tau_hi = self.tau_bounds
        return mu_lo <= theta.scale <= mu_hi and tau_lo <= theta.delay_offset <= tau_hi


def sigma_lower_limit(config: SystemConfig) -> float:
    """Narrowest admissible kernel: RMS bandwidth of a Gaussian of width sigma
    is 1/(2 pi sigma), so sigma >= 1/(2 pi B) caps the effective frequency
    content at the system bandwidth."""
    return 1.0 / (2.0 * math.pi * config.bandwidth)


def sample_basis(config: SystemConfig, rng: np.random.Generator,
                 sigma_min: float | None = None) -> BasisSet:
    """Draw a random basis set: deterministic uniformly spaced means, random
    widths.

    Means sit at the midpoints of N equal cells spanning
    [3 sigma_min, T - 3 sigma_min] (identical for every generator, so N = 1
    lands at T/2); each kernel's std is drawn uniformly from
    [sigma_min, min(mean, T - mean)/3], which enforces the 3-sigma containment
    rule by construction. Pure function of (config, rng state).
    """
    t_len = config.pulse_duration
    s_min = sigma_lower_limit(config) if sigma_min is None else sigma_min
    if s_min <= 0:
        raise ValueError("sigma_min must be positive")
    margin = 3.0 * s_min
    if 2.0 * margin >= t_len:
        raise ValueError(
            f"pulse of {t_len} s too short for bandwidth floor sigma_min={s_min}"
        )
    m, n = config.num_generators, config.num_basis
    cell = (t_len - 2.0 * margin) / n
    means = margin + cell * (np.arange(n) + 0.5)

    s_max = np.minimum(means, t_len - means) / 3.0
    if np.any(s_max < s_min):
        raise ValueError("pulse too short for requested bandwidth: sigma_min > sigma_max")
    stds = rng.uniform(np.broadcast_to(s_min, (m, n)), np.broadcast_to(s_max, (m, n)))

    kernels = tuple(
        tuple(GaussianKernel(mean=float(means[j]), std=float(stds[i, j])) for j in range(n))
        for i in range(m)
    )
    return BasisSet(kernels=kernels, config=config)


def eval_waveform(basis: BasisSet, s: np.ndarray, m: int, t) -> np.ndarray:
    """Baseband amplitude of generator m at time(s) t: sum_n s[m,n] psi[m,n](t)."""
    cfg = basis.config
    s = np.asarray(s)
    if s.shape != (basis.size,):
        raise ValueError(f"coefficient vector must have length {basis.size}")
    if not (0 <= m < cfg.num_generators):
        raise IndexError(f"generator index {m} out of range")
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for j in range(cfg.num_basis):
        out += s[m * cfg.num_basis + j] * basis.kernels[m][j].density(t)
    return out


def _axis(lo: float, hi: float, count: int) -> np.ndarray:
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, count)


def box_grid(box: ParameterBox, n_mu: int, n_tau: int) -> list[TargetParams]:
    """Uniform (mu, tau0) lattice over the effective box, endpoints included;
    a single-point axis collapses to the box center."""
    if n_mu < 1 or n_tau < 1:
        raise ValueError("grid counts must be at least 1")
    mu_lo, mu_hi = box.mu_bounds
    tau_lo, tau_hi = box.tau_bounds
    mus = _axis(mu_lo, mu_hi, n_mu)
    taus = _axis(tau_lo, tau_hi, n_tau)
    return [TargetParams(delay_offset=float(t), scale=float(mu))
            for mu in mus for t in taus]


def corner_pair(box: ParameterBox) -> tuple[TargetParams, TargetParams]:
    """The two diagonal corners (mu_min, tau_min) and (mu_max, tau_max)."""
    mu_lo, mu_hi = box.mu_bounds
    tau_lo, tau_hi = box.tau_bounds
    return (TargetParams(delay_offset=tau_lo, scale=mu_lo),
            TargetParams(delay_offset=tau_hi, scale=mu_hi))
