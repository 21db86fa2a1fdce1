"""Robust waveform design: maximize the worst in-box correlation subject to
unit filter energy.

The grid-relaxed problem weights a small set of box points by a convex
combination lambda and alternates, in whitened coordinates, between the top
eigenvector of a phase-symmetrized matrix and a phase update that turns the
real parts into magnitudes. Both steps increase the weighted cost, so the
trace is monotone. The outer weight is found by a 1-D search (grid with one
refinement by default; golden-section offered, though unimodality of the
outer cost is an assumption, not a theorem).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .correlation import (
    WhitenedSystem,
    build_R,
    build_R0,
    recover_s,
    whiten,
)
from .numerics import top_eigpair
from .signal_model import ArrayGeometry, BasisSet, ParameterBox, TargetParams, corner_pair

__all__ = [
    "InnerState",
    "DesignOptions",
    "DesignResult",
    "build_M",
    "inner_cyclic",
    "outer_search",
    "design_waveform",
]

_RESTART_DOMAIN = 0x1D

# relative slack when picking equal-cost outer minimizers
_TIE_TOL = 1e-12


@dataclass
class InnerState:
    """Outcome of one cyclic inner maximization."""

    u: np.ndarray
    phases: np.ndarray
    cost: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class DesignOptions:
    method: str = "grid"          # "grid" | "bisection"
    grid_points: int = 21
    refine: bool = True
    inner_tol: float = 1e-8
    max_iter: int = 500
    restarts: int = 3
    seed: int = 0
    bisect_tol: float = 1e-3
    corners: tuple[TargetParams, TargetParams] | None = None


@dataclass
class DesignResult:
    """Designed waveform with everything needed to reproduce it."""

    s: np.ndarray
    u: np.ndarray
    lambda_star: float
    thetas: tuple[TargetParams, ...]
    cost: float
    trace: list[float]
    converged: bool
    seed: int
    snapshot: dict

    def to_json(self, path=None) -> str:
        doc = {
            "coefficients": [[float(v.real), float(v.imag)] for v in self.s],
            "whitened": [[float(v.real), float(v.imag)] for v in self.u],
            "lambda_star": self.lambda_star,
            "grid_points": [
                {"delay_offset": t.delay_offset, "scale": t.scale} for t in self.thetas
            ],
            "cost": self.cost,
            "trace": self.trace,
            "converged": self.converged,
            "seed": self.seed,
            "snapshot": self.snapshot,
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text: str) -> "DesignResult":
        doc = json.loads(text)
        s = np.array([complex(re, im) for re, im in doc["coefficients"]])
        u = np.array([complex(re, im) for re, im in doc["whitened"]])
        thetas = tuple(
            TargetParams(delay_offset=g["delay_offset"], scale=g["scale"])
            for g in doc["grid_points"]
        )
        return cls(s=s, u=u, lambda_star=doc["lambda_star"], thetas=thetas,
                   cost=doc["cost"], trace=list(doc["trace"]),
                   converged=doc["converged"], seed=doc["seed"],
                   snapshot=doc["snapshot"])


def build_M(ws: WhitenedSystem, lambdas: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Phase-symmetrized weighted matrix sum; Hermitian by construction."""
    lambdas = np.asarray(lambdas, dtype=float)
    phases = np.asarray(phases, dtype=float)
    if lambdas.shape != phases.shape or lambdas.ndim != 1:
        raise ValueError("weights and phases must be 1-D and the same length")
    if len(lambdas) != len(ws.r_tilde):
        raise ValueError("one weight/phase per whitened matrix required")
    if np.any(lambdas < -1e-12) or abs(float(np.sum(lambdas)) - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    m = np.zeros((ws.rank, ws.rank), dtype=complex)
    for lam, phi, rt in zip(lambdas, phases, ws.r_tilde):
        rot = np.exp(-1j * phi) * rt
        m += lam * (rot + rot.conj().T)
    return m


def _weighted_cost(ws: WhitenedSystem, lambdas: np.ndarray, u: np.ndarray):
    z = np.array([u.conj() @ rt @ u for rt in ws.r_tilde])
    return float(np.sum(lambdas * np.abs(z))), z


def inner_cyclic(ws: WhitenedSystem, lambdas: np.ndarray, phi0: np.ndarray,
                 tol: float = 1e-8, max_iter: int = 500) -> InnerState:
    """Alternating maximization of sum_k lambda_k |u^H Rt_k u| on the unit
    sphere: eigenvector step for u, argument step for the phases. The reported
    cost is the magnitude form (half of u^H M u at the updated phases), and
    the trace is nondecreasing. Hitting max_iter returns converged=False
    rather than raising."""
    lambdas = np.asarray(lambdas, dtype=float)
    phases = np.asarray(phi0, dtype=float).copy()
    if phases.shape != lambdas.shape:
        raise ValueError("phi0 must match the number of grid points")
    if tol <= 0:
        raise ValueError("tol must be positive")

    trace: list[float] = []
    prev = -np.inf
    u = np.zeros(ws.rank, dtype=complex)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        _, u = top_eigpair(build_M(ws, lambdas, phases))
        cost, z = _weighted_cost(ws, lambdas, u)
        phases = np.angle(z)
        trace.append(cost)
        if np.isfinite(prev) and cost - prev <= tol * max(abs(cost), 1e-30):
            converged = True
            break
        prev = cost
    return InnerState(u=u, phases=phases, cost=trace[-1], iterations=iterations,
                      converged=converged, trace=trace)


def _best_inner(ws: WhitenedSystem, lambdas: np.ndarray,
                starts: list[np.ndarray], tol: float, max_iter: int) -> InnerState:
    best: InnerState | None = None
    for phi0 in starts:
        state = inner_cyclic(ws, lambdas, phi0, tol=tol, max_iter=max_iter)
        if best is None or state.cost > best.cost:
            best = state
    assert best is not None
    return best


def _phase_starts(ws: WhitenedSystem, rng: np.random.Generator, restarts: int,
                  warm: np.ndarray | None) -> list[np.ndarray]:
    l = len(ws.r_tilde)
    starts = [np.zeros(l)]
    if warm is not None:
        starts.append(np.asarray(warm, dtype=float).copy())
    for _ in range(restarts):
        starts.append(rng.uniform(0.0, 2.0 * np.pi, size=l))
    return starts


def outer_search(ws: WhitenedSystem, thetas: tuple[TargetParams, TargetParams],
                 opts: DesignOptions | None = None,
                 snapshot: dict | None = None) -> DesignResult:
    """Minimize the inner maximum over the pair weight lambda in [0, 1].

    Grid mode scans a uniform lattice and refines once around the minimizer;
    ties resolve to the smallest lambda, or to 0.5 when the cost is flat
    across the whole lattice (identical grid points). Bisection mode runs a
    golden-section search, which is only exact if the outer cost is unimodal.
    Each inner solve is warm-started from the previous phases plus seeded
    random restarts.
    """
    opts = opts or DesignOptions()
    if len(thetas) != 2 or len(ws.r_tilde) != 2:
        raise ValueError("outer_search expects exactly two grid points")
    rng = np.random.default_rng(np.random.SeedSequence([opts.seed, _RESTART_DOMAIN]))

    cache: dict[float, InnerState] = {}
    warm: dict[str, np.ndarray | None] = {"phi": None}

    def eval_f(lam: float) -> InnerState:
        if lam not in cache:
            starts = _phase_starts(ws, rng, opts.restarts, warm["phi"])
            state = _best_inner(ws, np.array([lam, 1.0 - lam]), starts,
                                opts.inner_tol, opts.max_iter)
            cache[lam] = state
            warm["phi"] = state.phases
        return cache[lam]

    if opts.method == "grid":
        lams = np.linspace(0.0, 1.0, opts.grid_points)
        costs = np.array([eval_f(float(l)).cost for l in lams])
        span = float(np.max(costs) - np.min(costs))
        if span <= _TIE_TOL * max(1.0, float(np.max(np.abs(costs)))):
            lam_star = 0.5
            eval_f(lam_star)
        else:
            lam_star = _tie_break(lams, costs)
            if opts.refine and opts.grid_points >= 3:
                step = lams[1] - lams[0]
                lo = max(0.0, lam_star - step)
                hi = min(1.0, lam_star + step)
                fine = np.linspace(lo, hi, opts.grid_points)
                fine_costs = np.array([eval_f(float(l)).cost for l in fine])
                all_l = np.concatenate([lams, fine])
                all_c = np.concatenate([costs, fine_costs])
                lam_star = _tie_break(all_l, all_c)
    elif opts.method == "bisection":
        lam_star = _golden_section(eval_f, opts.bisect_tol)
    else:
        raise ValueError(f"unknown outer method: {opts.method}")

    state = cache[lam_star]
    s = recover_s(state.u, ws)
    return DesignResult(
        s=s,
        u=state.u,
        lambda_star=float(lam_star),
        thetas=tuple(thetas),
        cost=state.cost,
        trace=state.trace,
        converged=state.converged,
        seed=opts.seed,
        snapshot=snapshot or {},
    )


def _tie_break(lams: np.ndarray, costs: np.ndarray) -> float:
    best = float(np.min(costs))
    tol = _TIE_TOL * max(1.0, abs(best))
    candidates = lams[costs <= best + tol]
    return float(np.min(candidates))


def _golden_section(eval_f, tol: float, max_iter: int = 200) -> float:
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = eval_f(c).cost, eval_f(d).cost
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = eval_f(c).cost
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = eval_f(d).cost
    # return the best lambda actually evaluated
    evaluated = [(lam, eval_f(lam).cost) for lam in (a, c, d, b)]
    evaluated.sort(key=lambda p: (p[1], p[0]))
    return float(evaluated[0][0])


def design_waveform(basis: BasisSet, geom: ArrayGeometry, box: ParameterBox,
                    opts: DesignOptions | None = None) -> DesignResult:
    """Full pipeline: corner pair, correlation matrices, whitening, outer
    search. Deterministic given the options seed."""
    opts = opts or DesignOptions()
    corners = opts.corners if opts.corners is not None else corner_pair(box)
    r_corners = [build_R(basis, geom, th) for th in corners]
    r0 = build_R0(basis, geom)
    ws = whiten(r0, r_corners)
    cfg = basis.config
    snapshot = {
        "system": asdict(cfg),
        "box": asdict(box),
        "options": {
            "method": opts.method,
            "grid_points": opts.grid_points,
            "refine": opts.refine,
            "inner_tol": opts.inner_tol,
            "max_iter": opts.max_iter,
            "restarts": opts.restarts,
            "seed": opts.seed,
        },
        "geometry": {"element_delays": list(geom.element_delays),
                     "direction": geom.direction},
    }
    return outer_search(ws, tuple(corners), opts, snapshot=snapshot)
