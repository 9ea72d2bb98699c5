"""Lindblad master equation on ``{up, down, g}^N`` and its quantum-jump unraveling.

Each site decays ``|down> -> |g>`` at rate ``gamma``; ``|g>`` has no coherent
couplings.  Both solvers are independent of the qubit-space no-jump
propagation in :mod:`nhxy.dynamics` and serve as its cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import CapacityError, ConfigError, NumericalError
from .grid import ordered_map
from .model import (
    ModelParams,
    SpinOperator,
    build_h0_three_level,
    three_level_digits,
)
from .spectral import decompose

MAX_LINDBLAD_SITES = 4
MAX_TRAJECTORY_SITES = 7  # dense 3**N no-jump generator
TRACE_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class OpenSystemSpec:
    params: ModelParams
    hamiltonian: SpinOperator
    # per site: indices with the site in |down>, and where |g_i><down_i| sends them
    jump_sources: tuple[np.ndarray, ...] = field(repr=False)
    jump_targets: tuple[np.ndarray, ...] = field(repr=False)

    @classmethod
    def from_params(cls, p: ModelParams) -> OpenSystemSpec:
        if p.n_sites > MAX_TRAJECTORY_SITES:
            raise CapacityError(
                f"three-level space supports up to {MAX_TRAJECTORY_SITES} sites, got {p.n_sites}"
            )
        h0 = build_h0_three_level(p)
        digits = three_level_digits(p.n_sites)
        idx = np.arange(3**p.n_sites)
        sources, targets = [], []
        for i in range(p.n_sites):
            src = idx[digits[:, i] == 1]
            sources.append(src)
            targets.append(src + 3**i)
        return cls(p, h0, tuple(sources), tuple(targets))

    @property
    def n_sites(self) -> int:
        return self.params.n_sites

    @property
    def dim(self) -> int:
        return 3**self.n_sites

    def down_occupation(self) -> np.ndarray:
        """``n_down_i`` diagonals, shape (N, 3**N)."""
        return (three_level_digits(self.n_sites) == 1).T.astype(float)

    def effective_hamiltonian(self) -> np.ndarray:
        """``H_0 - i gamma/2 sum_i |down_i><down_i|``: the no-jump generator."""
        decay = self.down_occupation().sum(axis=0)
        return self.hamiltonian.matrix - 0.5j * self.params.gamma * np.diag(decay)

    def jump_operator(self, site: int) -> np.ndarray:
        """Dense ``|g_i><down_i|`` (without the ``sqrt(gamma)`` factor)."""
        op = np.zeros((self.dim, self.dim))
        op[self.jump_targets[site], self.jump_sources[site]] = 1.0
        return op

    def apply_jump(self, site: int, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        out[self.jump_targets[site]] = psi[self.jump_sources[site]]
        return out


@dataclass(frozen=True, eq=False)
class LindbladResult:
    times: np.ndarray
    le: np.ndarray
    trace: np.ndarray
    down_population: np.ndarray
    rhos: np.ndarray | None


def lindblad_propagate(
    spec: OpenSystemSpec,
    times,
    rho0: np.ndarray | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    keep_rhos: bool = False,
) -> LindbladResult:
    """Integrate the master equation; the echo is ``<0_N| rho |0_N>``."""
    if spec.n_sites > MAX_LINDBLAD_SITES:
        raise CapacityError(
            f"lindblad_propagate supports up to {MAX_LINDBLAD_SITES} sites, got {spec.n_sites}"
        )
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or np.any(times < 0):
        raise ConfigError("times must be a non-negative, non-decreasing 1-D grid")
    d = spec.dim
    if rho0 is None:
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 1.0
    rho0 = np.asarray(rho0, dtype=complex)
    h_eff = spec.effective_hamiltonian()
    h_eff_dag = h_eff.conj().T
    gamma = spec.params.gamma
    pairs = list(zip(spec.jump_sources, spec.jump_targets))

    def rhs(_t, y):
        rho = y.reshape(d, d)
        out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        for src, dst in pairs:
            out[np.ix_(dst, dst)] += gamma * rho[np.ix_(src, src)]
        return out.ravel()

    if times[-1] == 0:
        rhos = np.repeat(rho0[None], len(times), axis=0)
    else:
        sol = solve_ivp(
            rhs, (0.0, float(times[-1])), rho0.ravel(), method="DOP853",
            t_eval=times, rtol=rtol, atol=atol,
        )
        if not sol.success:
            raise NumericalError(f"master-equation integration failed: {sol.message}")
        rhos = sol.y.T.reshape(len(times), d, d)

    diag = np.real(np.einsum("tii->ti", rhos))
    trace = diag.sum(axis=1)
    drift = np.abs(trace - np.real(np.trace(rho0))).max()
    if drift > TRACE_TOLERANCE:
        raise NumericalError(f"trace drift {drift:.3g} exceeds {TRACE_TOLERANCE}")
    return LindbladResult(
        times=times,
        le=diag[:, 0].copy(),
        trace=trace,
        down_population=diag @ spec.down_occupation().T,
        rhos=rhos if keep_rhos else None,
    )


# -- Monte-Carlo wave functions -----------------------------------------------


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory, keyed only by (seed, index)."""
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _NoJumpEvolution:
    """``exp(-i H_eff tau)`` applied to a state, spectral when well conditioned."""

    def __init__(self, h_eff: np.ndarray, condition_threshold: float = 1e6):
        self.h_eff = h_eff
        spec = decompose(h_eff)
        self.spectral = spec.condition < condition_threshold
        if self.spectral:
            self.evals, self.right, self.left = spec.eigenvalues, spec.right, spec.left

    def coefficients(self, psi):
        return self.left @ psi if self.spectral else psi

    def at(self, coeffs, tau):
        """States at the delays ``tau`` (array) from precomputed coefficients."""
        tau = np.atleast_1d(tau)
        if self.spectral:
            return (np.exp(-1j * np.outer(tau, self.evals)) * coeffs) @ self.right.T
        return np.array([scipy.linalg.expm(-1j * s * self.h_eff) @ coeffs for s in tau])


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    n_traj: int
    master_seed: int
    times: np.ndarray
    le_samples: np.ndarray
    jumps: tuple[tuple[tuple[float, int], ...], ...]
    n_sites: int

    @property
    def le_mean(self) -> np.ndarray:
        return self.le_samples.mean(axis=0)

    @property
    def le_stderr(self) -> np.ndarray:
        if self.n_traj < 2:
            return np.full(len(self.times), np.nan)
        return self.le_samples.std(axis=0, ddof=1) / np.sqrt(self.n_traj)

    @property
    def le_stderr_adjusted(self) -> np.ndarray:
        """Standard error that stays finite when every trajectory (or none) has jumped.

        A sample is ``F~(t)`` on a jump-free trajectory and 0 otherwise, so the
        mean is ``F~ * q`` with ``q`` a binomial survival fraction.  The spread
        uses the Agresti-Coull estimate ``(s + 2) / (n + 4)`` for ``q``; the
        plain sample error is zero whenever no trajectory has jumped yet.
        """
        survivors = np.rint(self.survival * self.n_traj)
        f_tilde = np.where(survivors > 0, self.le_samples.max(axis=0), 1.0)
        n = self.n_traj + 4
        q = (survivors + 2) / n
        return f_tilde * np.sqrt(q * (1 - q) / n)

    @property
    def survival(self) -> np.ndarray:
        """Fraction of trajectories without any jump at each time."""
        first = np.array([j[0][0] if j else np.inf for j in self.jumps])
        return (first[:, None] > self.times[None, :]).mean(axis=0)

    def jump_counts(self, t_max: float | None = None) -> np.ndarray:
        """Jumps per (trajectory, site) up to ``t_max``."""
        counts = np.zeros((self.n_traj, self.n_sites), dtype=int)
        for k, log in enumerate(self.jumps):
            for t, site in log:
                if t_max is None or t <= t_max:
                    counts[k, site] += 1
        return counts


def _run_trajectory(spec: OpenSystemSpec, evo: _NoJumpEvolution, times, rng, t_tol):
    d = spec.dim
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1.0
    occupation = spec.down_occupation()
    samples = np.zeros(len(times))
    jumps = []
    t_cur = 0.0
    r = rng.random()
    while True:
        coeffs = evo.coefficients(psi)
        ahead = times >= t_cur
        tau_grid = times[ahead] - t_cur
        states = evo.at(coeffs, tau_grid)
        norms = np.einsum("ij,ij->i", states.conj(), states).real
        crossed = np.flatnonzero(norms < r)
        n_ok = crossed[0] if crossed.size else len(tau_grid)
        idx_ahead = np.flatnonzero(ahead)
        good = idx_ahead[:n_ok]
        samples[good] = np.abs(states[:n_ok, 0]) ** 2 / norms[:n_ok]
        if not crossed.size:
            # the last jump may still fall between the final grid point and nothing
            break
        hi = tau_grid[n_ok]
        lo = tau_grid[n_ok - 1] if n_ok > 0 else 0.0

        def excess(tau):
            s = evo.at(coeffs, tau)[0]
            return np.vdot(s, s).real - r

        tau_jump = brentq(excess, lo, hi, xtol=t_tol) if excess(lo) > 0 else lo
        state = evo.at(coeffs, tau_jump)[0]
        state /= np.linalg.norm(state)
        weights = occupation @ (np.abs(state) ** 2)
        site = int(rng.choice(spec.n_sites, p=weights / weights.sum()))
        psi = spec.apply_jump(site, state)
        psi /= np.linalg.norm(psi)
        t_cur += tau_jump
        jumps.append((t_cur, site))
        r = rng.random()
    return samples, tuple(jumps)


def mcwf_run(
    spec: OpenSystemSpec,
    n_traj: int,
    master_seed: int,
    times,
    threads: int | None = None,
    jump_time_tol: float = 1e-10,
) -> TrajectoryEnsemble:
    """First-order jump unraveling with norm-threshold jump times.

    A trajectory contributes ``|<0_N|psi>|^2`` of its normalized state at each
    time; once it has jumped that overlap is exactly zero.
    """
    if n_traj < 1:
        raise ConfigError(f"n_traj must be >= 1, got {n_traj}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ConfigError("times must be a strictly increasing, non-negative grid")
    evo = _NoJumpEvolution(spec.effective_hamiltonian())

    def one(k):
        return _run_trajectory(spec, evo, times, trajectory_rng(master_seed, k), jump_time_tol)

    results = ordered_map(one, range(n_traj), threads)
    samples = np.array([r[0] for r in results])
    jumps = tuple(r[1] for r in results)
    return TrajectoryEnsemble(n_traj, master_seed, times, samples, jumps, spec.n_sites)


def no_jump_states(spec: OpenSystemSpec, times) -> np.ndarray:
    """Unnormalized no-jump branch in the three-level space, from ``|0_N>``."""
    evo = _NoJumpEvolution(spec.effective_hamiltonian())
    psi = np.zeros(spec.dim, dtype=complex)
    psi[0] = 1.0
    return evo.at(evo.coefficients(psi), np.asarray(times, dtype=float))
