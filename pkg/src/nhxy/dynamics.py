"""No-jump propagation from the polarized state and the derived echo observables."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .errors import ConfigError, NumericalError
from .model import (
    BasisSpec,
    SpinOperator,
    down_counts,
    is_reflection_symmetric,
    reflection_permutation,
    reflection_sector,
    three_level_digits,
)
from .spectral import BiorthogonalSpectrum, decompose

log = logging.getLogger(__name__)

METHODS = ("spectral", "integrator", "expm")
SCALES = ("paper-fig2", "pt-frame")
RATE_CAP = 1e9


@dataclass(frozen=True)
class PropagatorPolicy:
    """How to evolve under a non-Hermitian generator.

    ``spectral`` uses the biorthogonal expansion and falls back to the
    integrator when the eigenvector condition number reaches
    ``condition_threshold``; round-off in the expansion grows like
    ``condition * eps``, so the default keeps it near 1e-10.  ``expm`` (one
    dense exponential per time point) is a reference path for small systems.  With ``use_symmetry`` a
    reflection-symmetric operator acting on a reflection-even initial state is
    evolved inside the even sector only.
    """

    method: str = "spectral"
    condition_threshold: float = 1e6
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    use_symmetry: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass(frozen=True, eq=False)
class EvolutionRecord:
    """Time series of the echo and related observables.

    ``le`` is the survival probability of the initial state, ``norm`` the
    remaining no-jump weight, ``manifold_pop[:, m]`` the weight with ``m``
    down spins and ``manifold_loss`` the accumulated decay out of each
    manifold.  ``states`` holds the unnormalized wave functions when kept.
    """

    times: np.ndarray
    le: np.ndarray
    norm: np.ndarray
    amplitude: np.ndarray
    ipr: np.ndarray
    manifold_pop: np.ndarray | None
    manifold_loss: np.ndarray | None
    states: np.ndarray | None
    n_sites: int
    gamma: float
    method: str

    @property
    def normalized_le(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.norm > 0, self.le / self.norm, np.nan)

    @property
    def rate(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 0.0 - np.log(self.le)

    def scaled_le(self, scale: str = "paper-fig2") -> np.ndarray:
        return self.le * np.exp(scale_exponent(scale, self.n_sites, self.gamma) * self.times)


def scale_exponent(scale: str, n_sites: int, gamma: float) -> float:
    """Growth rate compensating the global decay: ``gamma`` or ``N gamma / 2``."""
    if scale == "paper-fig2":
        return gamma
    if scale == "pt-frame":
        return n_sites * gamma / 2
    raise ConfigError(f"scale must be one of {SCALES}, got {scale!r}")


def polarized_state(dim: int) -> np.ndarray:
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    return psi


def excitation_numbers(basis: BasisSpec) -> np.ndarray | None:
    """Number of down spins for each basis index, where that is well defined."""
    n = basis.n_sites
    if basis.kind == "full":
        return np.asarray(down_counts(n))
    if basis.kind == "two-atom-symmetric":
        return np.array([0, 1, 2])
    if basis.kind == "single-excitation":
        return np.array([0] + [1] * n)
    if basis.kind == "three-level":
        return (three_level_digits(n) == 1).sum(axis=1)
    return None


def _check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("times must be a non-empty 1-D grid")
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ConfigError("times must be non-negative and non-decreasing")
    return t


def _spectral_states(spec: BiorthogonalSpectrum, psi0, times) -> np.ndarray:
    coeffs = spec.left @ psi0
    phases = np.exp(-1j * np.outer(times, spec.eigenvalues))
    return (phases * coeffs) @ spec.right.T


def _integrate_states(mat, psi0, times, policy: PropagatorPolicy) -> np.ndarray:
    t_end = float(times[-1])
    if t_end == 0:
        return np.tile(psi0, (len(times), 1))
    gen = -1j * mat

    sol = solve_ivp(
        lambda _t, y: gen @ y,
        (0.0, t_end),
        psi0.astype(complex),
        method="DOP853",
        t_eval=times,
        rtol=policy.rtol,
        atol=policy.atol,
        max_step=policy.max_step,
    )
    if not sol.success:
        raise NumericalError(f"integration failed: {sol.message}")
    return sol.y.T


def _expm_states(mat, psi0, times) -> np.ndarray:
    return np.array([scipy.linalg.expm(-1j * t * mat) @ psi0 for t in times])


def evolve_states(
    mat: np.ndarray, psi0: np.ndarray, times, policy: PropagatorPolicy
) -> tuple[np.ndarray, str]:
    """Solve ``i d psi/dt = mat psi``; returns states (time-major) and the method used."""
    times = _check_times(times)
    method = policy.method
    if method == "spectral":
        spec = decompose(mat)
        if spec.condition < policy.condition_threshold:
            return _pin_origin(_spectral_states(spec, psi0, times), psi0, times), "spectral"
        log.warning(
            "eigenvector condition %.3g >= %.3g; falling back to the integrator",
            spec.condition,
            policy.condition_threshold,
        )
        method = "integrator"
    if method == "integrator":
        states = _integrate_states(mat, psi0, times, policy)
    else:
        states = _expm_states(mat, psi0, times)
    return _pin_origin(states, psi0, times), method


def _pin_origin(states, psi0, times):
    # no propagation has happened at t = 0; avoid round-off from V W != 1
    states[times == 0] = psi0
    return states


def propagate(
    h: SpinOperator,
    times,
    initial: np.ndarray | None = None,
    policy: PropagatorPolicy | None = None,
    keep_states: bool = True,
) -> EvolutionRecord:
    """Evolve ``initial`` (default ``|0_N>``) under ``h`` and record the echo observables."""
    policy = policy or PropagatorPolicy()
    times = _check_times(times)
    psi0 = polarized_state(h.dim) if initial is None else np.asarray(initial, dtype=complex)
    if psi0.shape != (h.dim,):
        raise ConfigError(f"initial state has shape {psi0.shape}, expected ({h.dim},)")
    n = h.basis.n_sites
    mat = h.matrix

    sector = None
    if policy.use_symmetry and h.basis.kind == "full" and n >= 3:
        rev = reflection_permutation(n)
        if np.allclose(psi0[rev], psi0, rtol=0, atol=1e-14) and is_reflection_symmetric(mat, n):
            sector = reflection_sector(n, +1)

    if sector is not None:
        states_s, used = evolve_states(sector.project(mat), sector.restrict(psi0), times, policy)
        states = sector.lift(states_s)
    else:
        states, used = evolve_states(mat, psi0, times, policy)

    gamma = h.params.gamma if h.params is not None else 1.0
    amplitude = states @ psi0.conj()
    prob = np.abs(states) ** 2
    m = excitation_numbers(h.basis)
    pops = loss = None
    if m is not None:
        pops = np.stack([prob[:, m == k].sum(axis=1) for k in range(int(m.max()) + 1)], axis=1)
        loss = gamma * cumulative_trapezoid(pops, times, axis=0, initial=0.0)
    return EvolutionRecord(
        times=times,
        le=np.abs(amplitude) ** 2,
        norm=prob.sum(axis=1),
        amplitude=amplitude,
        ipr=(prob**2).sum(axis=1),
        manifold_pop=pops,
        manifold_loss=loss,
        states=states if keep_states else None,
        n_sites=n,
        gamma=gamma,
        method=used,
    )


@dataclass(frozen=True)
class LoschmidtPoint:
    le: float
    rate: float
    scaled_le: float
    rate_capped: bool

    @property
    def rate_serialized(self) -> float:
        return RATE_CAP if self.rate_capped else self.rate


def cap_rate(rate) -> tuple[np.ndarray, np.ndarray]:
    """Replace infinite rates by ``RATE_CAP`` and return the flag column."""
    rate = np.asarray(rate, dtype=float)
    flag = ~np.isfinite(rate) | (rate > RATE_CAP)
    return np.where(flag, RATE_CAP, rate), flag


def _time_index(rec: EvolutionRecord, t_e: float) -> int:
    k = int(np.argmin(np.abs(rec.times - t_e)))
    if not np.isclose(rec.times[k], t_e, rtol=1e-12, atol=1e-12):
        raise ConfigError(f"t_e={t_e} is not on the time grid")
    return k


def loschmidt_observables(
    rec: EvolutionRecord, t_e: float, scale: str = "paper-fig2"
) -> LoschmidtPoint:
    k = _time_index(rec, t_e)
    le = float(rec.le[k])
    rate = float(rec.rate[k]) if le > 0 else float("inf")
    return LoschmidtPoint(le, rate, float(rec.scaled_le(scale)[k]), not np.isfinite(rate))


def manifold_populations(rec: EvolutionRecord) -> tuple[np.ndarray, np.ndarray]:
    if rec.manifold_pop is None:
        raise ConfigError("record has no excitation-number information")
    return rec.manifold_pop, rec.manifold_loss


def ipr(rec: EvolutionRecord, basis: str | BiorthogonalSpectrum = "computational") -> np.ndarray:
    """Inverse participation ratio of the unnormalized state.

    ``"computational"`` uses configuration amplitudes; a spectrum uses the
    expansion coefficients ``<w_k|psi(t)>`` on its unit-norm right vectors.
    """
    if isinstance(basis, str):
        if basis != "computational":
            raise ConfigError(f"unknown IPR basis {basis!r}")
        return rec.ipr
    if rec.states is None:
        raise ConfigError("eigenbasis IPR needs a record with states")
    coeffs = rec.states @ basis.left.T
    return (np.abs(coeffs) ** 4).sum(axis=1)


def min_discrimination_time(eps: float) -> float:
    """Single-shot time ``ln 2 / eps`` to resolve an imaginary part of size ``eps``."""
    if not eps > 0:
        raise ConfigError(f"eps must be > 0, got {eps}")
    return float(np.log(2) / eps)


def exponential_rate(times, values) -> float:
    """Least-squares decay rate of ``values ~ exp(-rate * t)``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    slope = np.polyfit(times, np.log(values), 1)[0]
    return float(-slope)
