"""Large-diffusion limit: the pure-ODE lattice system and its spreading speed.

As the edge diffusivity grows, each road profile flattens and the coupled
system reduces to

    V_j' = -2 alpha V_j + beta (P_j + P_{j+1}),
    P_j' = f(P_j) + alpha (V_j + V_{j-1}) - 2 beta P_j,

whose exponential solutions satisfy Psi(c, mu) = 0 with

    DeltaInf(mu) = (2 alpha - 2 beta + f'(0))^2 + 8 alpha beta (1 + cosh mu),
    Psi(c, mu) = -(2 alpha + 2 beta - f'(0)) + sqrt(DeltaInf(mu)) - 2 mu c.

The limit speed is the minimum over mu > 0 of the positive root
c_plus(mu) = (-(2 alpha + 2 beta - f'(0)) + sqrt(DeltaInf)) / (2 mu).  This
module integrates the ODE lattice with classical RK4 and runs the matched
convergence experiment against the full simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .dispersion import golden_section_min
from .lattice_sim import (
    BlowUpError,
    InitialData,
    SimulationConfig,
    _snapshot_contaminated,
    init_state,
    simulate,
    stiffness_dt_cap,
)
from .model import Parameters

__all__ = [
    "AsymptoticState",
    "AsymptoticTrajectory",
    "AsymptoticSpeed",
    "AsymptoticDispersion",
    "asymptotic_dispersion_eval",
    "compute_c_star_inf",
    "step_asymptotic",
    "simulate_asymptotic",
    "large_d_convergence_experiment",
]

_BOUND_TOL = 1e-9


@dataclass(frozen=True)
class AsymptoticState:
    """Window snapshot of the limit system: per-edge V and per-vertex P."""

    j_min: int
    j_max: int
    V: np.ndarray
    P: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        P = np.array(self.P, dtype=float)
        V.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "P", P)
        if self.j_min >= self.j_max:
            raise ValueError("need j_min < j_max")
        if len(P) != self.j_max - self.j_min + 1 or len(V) != len(P) - 1:
            raise ValueError("V/P lengths must match the window")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(P))):
            raise ValueError("state entries must be finite")

    @property
    def densities(self) -> np.ndarray:
        return self.P

    @property
    def js(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)


@dataclass(frozen=True)
class AsymptoticTrajectory:
    snapshots: tuple[AsymptoticState, ...]
    mass: np.ndarray
    config: SimulationConfig
    params: Parameters
    contaminated: bool

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def final(self) -> AsymptoticState:
        return self.snapshots[-1]


class AsymptoticDispersion(NamedTuple):
    psi: float
    delta_inf: float
    c_plus: float


@dataclass(frozen=True)
class AsymptoticSpeed:
    mu_star: float
    c_star_inf: float
    psi_residual: float
    dpsi_dmu_residual: float


def asymptotic_dispersion_eval(mu: float, c: float, p: Parameters) -> AsymptoticDispersion:
    """(Psi(c, mu), DeltaInf(mu), c_plus(mu)); c_plus is +inf at mu = 0."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    alpha, beta, f0 = p.alpha, p.beta, p.fprime0
    delta = (2.0 * alpha - 2.0 * beta + f0) ** 2 + 8.0 * alpha * beta * (1.0 + math.cosh(mu))
    root = -(2.0 * alpha + 2.0 * beta - f0) + math.sqrt(delta)
    psi = root - 2.0 * mu * c
    c_plus = root / (2.0 * mu) if mu > 0 else math.inf
    return AsymptoticDispersion(psi, delta, c_plus)


def _dpsi_dmu(mu: float, c: float, p: Parameters) -> float:
    alpha, beta, f0 = p.alpha, p.beta, p.fprime0
    delta = (2.0 * alpha - 2.0 * beta + f0) ** 2 + 8.0 * alpha * beta * (1.0 + math.cosh(mu))
    return 4.0 * alpha * beta * math.sinh(mu) / math.sqrt(delta) - 2.0 * c


def compute_c_star_inf(
    p: Parameters, grid_points: int = 2000, mu_range: tuple[float, float] = (1e-4, 50.0)
) -> AsymptoticSpeed:
    """Minimize c_plus over mu > 0 (geometric grid plus golden section) and
    verify the tangency conditions Psi = 0 and dPsi/dmu = 0 at the optimum."""
    if p.fprime0 <= 0:
        raise ValueError("limit speed needs f'(0) > 0")
    lo, hi = mu_range
    for _ in range(2):
        mus = np.geomspace(lo, hi, grid_points)
        cs = np.array([asymptotic_dispersion_eval(m, 0.0, p).c_plus for m in mus])
        i_min = int(np.argmin(cs))
        if 0 < i_min < len(mus) - 1:
            break
        lo /= 10.0
        hi *= 10.0
    else:
        raise RuntimeError("limit-speed minimum stuck at the scan endpoint")
    mu_star = golden_section_min(
        lambda m: asymptotic_dispersion_eval(m, 0.0, p).c_plus, mus[i_min - 1], mus[i_min + 1]
    )
    c_inf = asymptotic_dispersion_eval(mu_star, 0.0, p).c_plus
    psi_res = abs(asymptotic_dispersion_eval(mu_star, c_inf, p).psi)
    dpsi_res = abs(_dpsi_dmu(mu_star, c_inf, p))
    if psi_res > 1e-10:
        raise RuntimeError(f"tangency residual |Psi| = {psi_res:.3e} exceeds 1e-10")
    if dpsi_res > 1e-8:
        raise RuntimeError(f"tangency residual |dPsi/dmu| = {dpsi_res:.3e} exceeds 1e-8")
    return AsymptoticSpeed(float(mu_star), float(c_inf), psi_res, dpsi_res)


def _asym_arrays_from_initial(data: InitialData, cfg: SimulationConfig, p: Parameters):
    """Matched initialization: P from the vertex data, V from the edge means
    (flat edges integrate to their level; stationary-consistent data uses the
    limit relation V_j = beta/(2 alpha) (P_j + P_{j+1}))."""
    state = init_state(data, cfg, p)
    P = state.rho.copy()
    if data.edge_mode == "stationary":
        V = p.beta / (2.0 * p.alpha) * (P[:-1] + P[1:])
    else:
        # trapezoid mean of the realized edge profiles (zero or flat)
        V = state.edges.mean(axis=1)
    return state.j_min, state.j_max, V, P


def step_asymptotic(s: AsymptoticState, dt: float, p: Parameters) -> AsymptoticState:
    """One classical RK4 step of the limit system with absorbing window ends."""
    cap = stiffness_dt_cap(p)
    if dt > cap * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the stiffness cap {cap:g}")
    if p.nonlinearity.kind != "logistic":
        raise NotImplementedError("the limit system supports logistic reactions")
    V, P, _ = kernels.advance_asym(s.V, s.P, 1, dt, p.alpha, p.beta, p.fprime0)
    worst = max(float(np.max(np.abs(V))), float(np.max(np.abs(P))))
    scale = 10.0 * max(p.beta / p.alpha, 1.0, float(np.max(np.abs(s.V))), float(np.max(np.abs(s.P))))
    if not math.isfinite(worst) or worst > scale:
        raise BlowUpError(f"solution reached {worst:.3e}")
    return AsymptoticState(s.j_min, s.j_max, V, P, s.time + dt)


def simulate_asymptotic(
    data: InitialData, cfg: SimulationConfig, p: Parameters
) -> AsymptoticTrajectory:
    """Integrate the limit system to time T with snapshot and mass recording.

    The mass series adds the accumulated boundary outflux (integrated inside
    the RK4 stages, so the reaction-free total is conserved to roundoff)."""
    p.require_unit_length()
    if p.nonlinearity.kind != "logistic":
        raise NotImplementedError("the limit system supports logistic reactions")
    cap = stiffness_dt_cap(p)
    if cfg.dt > cap * (1.0 + 1e-12):
        raise ValueError(f"dt={cfg.dt:g} exceeds the stiffness cap {cap:g}")
    nsteps = round(cfg.T / cfg.dt)
    if nsteps < 1 or abs(nsteps * cfg.dt - cfg.T) > 1e-9 * cfg.T:
        raise ValueError("T must be a positive integer multiple of dt")
    stride = cfg.snapshot_stride or max(1, round(nsteps / 200))
    j_min, j_max, V, P = _asym_arrays_from_initial(data, cfg, p)
    state0 = AsymptoticState(j_min, j_max, V, P, 0.0)
    p_hi = max(float(np.max(P)), 1.0) + _BOUND_TOL * max(1.0, float(np.max(P)))
    v_hi = max(float(np.max(V)), p.beta / p.alpha) + _BOUND_TOL * max(1.0, float(np.max(V)))
    blow = 10.0 * max(p.beta / p.alpha, 1.0, float(np.max(P)), float(np.max(V)) if len(V) else 0.0)
    check_left = not data.occupies_left_boundary
    snapshots = [state0]
    mass = [float(V.sum() + P.sum())]
    leak = 0.0
    contaminated = _snapshot_contaminated(P, check_left)
    done = 0
    while done < nsteps:
        chunk = min(stride, nsteps - done)
        V, P, dleak = kernels.advance_asym(V, P, chunk, cfg.dt, p.alpha, p.beta, p.fprime0)
        leak += dleak
        done += chunk
        t = done * cfg.dt
        worst = max(float(np.max(np.abs(V))), float(np.max(np.abs(P))))
        if not math.isfinite(worst) or worst > blow:
            raise BlowUpError(f"solution reached {worst:.3e} by t={t:g}")
        if float(np.min(V)) < -_BOUND_TOL or float(np.min(P)) < -_BOUND_TOL:
            raise RuntimeError(f"positivity violated at t={t:g}")
        if float(np.max(P)) > p_hi or float(np.max(V)) > v_hi:
            raise RuntimeError(f"a-priori bound violated at t={t:g}")
        contaminated = contaminated or _snapshot_contaminated(P, check_left)
        snapshots.append(AsymptoticState(j_min, j_max, V, P, t))
        mass.append(float(V.sum() + P.sum()) + leak)
    return AsymptoticTrajectory(
        snapshots=tuple(snapshots),
        mass=np.array(mass),
        config=cfg,
        params=p,
        contaminated=contaminated,
    )


def large_d_convergence_experiment(
    eps_list,
    data: InitialData,
    T: float,
    p: Parameters,
    m: int = 32,
    dt: float = 1e-3,
) -> list[tuple[float, float]]:
    """Sup-distance between the full system at d = 1/eps and the limit system
    from matched data, per eps.

    Both runs share one window and snapshot grid; the error is the max over
    snapshot times in [1, T], central vertices |j| <= window/4, and the edge
    x-grid, of |v - V| and |rho - P|.  Transients before t = 1 are excluded
    (the edge profiles need an O(eps) relaxation time to flatten).
    """
    p.require_unit_length()
    if T <= 1.0:
        raise ValueError("need T > 1: errors are measured on [1, T]")
    c_inf = compute_c_star_inf(p).c_star_inf
    cfg = SimulationConfig(
        T=T, dt=dt, m=m, c_upper_guess=1.5 * c_inf, snapshot_stride=max(1, round(T / dt / 100))
    )
    ref = simulate_asymptotic(data, cfg, p)
    quarter = (ref.final.j_max - ref.final.j_min) // 4
    js = ref.final.js
    central_v = np.abs(js) <= quarter
    central_e = central_v[:-1] & central_v[1:]
    rows: list[tuple[float, float]] = []
    for eps in eps_list:
        if not (0 < eps):
            raise ValueError("eps must be positive")
        p_eps = replace(p, d=1.0 / eps)
        full = simulate(data, cfg, p_eps)
        err = 0.0
        for s_full, s_lim in zip(full.snapshots, ref.snapshots):
            if s_full.time < 1.0:
                continue
            err = max(err, float(np.max(np.abs(s_full.rho[central_v] - s_lim.P[central_v]))))
            diff = np.abs(s_full.edges[central_e] - s_lim.V[central_e][:, None])
            err = max(err, float(np.max(diff)))
        rows.append((float(eps), err))
    return rows
