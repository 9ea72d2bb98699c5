"""Rate-function maps, chain-length scans and parameter-jitter averaging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from skimage.measure import find_contours

from .dynamics import PropagatorPolicy, cap_rate, propagate, scale_exponent
from .errors import CapacityError, ConfigError, NumericalError
from .grid import PhaseGrid, evaluate_grid, ordered_map, provenance
from .model import ModelParams, build_h_nh, check_capacity
from .open_system import trajectory_rng
from .spectral import EPS_IM, classify_params, ep_curve

__all__ = [
    "DisorderResult",
    "DisorderSpec",
    "NScan",
    "PhaseGrid",
    "disorder_average",
    "le_at",
    "n_scan",
    "rate_map",
]


def le_at(p: ModelParams, t_e: float, policy: PropagatorPolicy | None = None) -> float:
    """Echo ``F(t_e)`` from ``|0_N>`` under ``H_nh``."""
    rec = propagate(build_h_nh(p), [0.0, float(t_e)], policy=policy, keep_states=False)
    return float(rec.le[-1])


def _contour_polylines(field: np.ndarray, level: float, ax0, ax1) -> list[np.ndarray]:
    """Marching-squares iso-lines, mapped from index space onto the axis values."""
    if min(field.shape) < 2 or not np.isfinite(field).any():
        return []
    finite = np.where(np.isfinite(field), field, np.nanmax(np.where(np.isfinite(field), field, -np.inf)))
    lines = []
    for c in find_contours(finite, level):
        x0 = np.interp(c[:, 0], np.arange(len(ax0)), ax0)
        x1 = np.interp(c[:, 1], np.arange(len(ax1)), ax1)
        lines.append(np.column_stack([x0, x1]))
    return lines


def rate_map(
    p: ModelParams,
    omegas,
    vs,
    t_e: float,
    threshold: float = 5.0,
    eps_im: float = EPS_IM,
    scale: str = "paper-fig2",
    threads: int | None = None,
    policy: PropagatorPolicy | None = None,
    spectral_boundary: bool = True,
) -> PhaseGrid:
    """Rate function ``lambda(t_e)`` over (omega, V), with its spectral counterpart.

    Rows are ``omegas``, columns ``vs``.  A cell is labelled PT-broken by the
    echo when ``lambda < threshold`` (slow decay) and by the spectrum when
    ``H_pt`` has a complex eigenvalue.  ``meta`` carries the iso-lines of
    ``lambda = threshold`` and the exact critical drive per column.
    """
    if not t_e > 0:
        raise ConfigError(f"t_e must be > 0, got {t_e}")
    check_capacity(p.n_sites)
    growth = scale_exponent(scale, p.n_sites, p.gamma)

    def cell(om, v):
        q = p.replace(omega=float(om), v=float(v))
        le = le_at(q, t_e, policy)
        with np.errstate(divide="ignore"):
            raw = 0.0 - np.log(le) if le > 0 else np.inf
        rate, capped = cap_rate(raw)
        spec_broken = classify_params(q, eps_im).is_pt_broken
        le_broken = bool(raw < threshold)
        return {
            "le": le,
            "rate": float(rate),
            "rate_capped": bool(capped),
            "scaled_le": le * np.exp(growth * t_e),
            "le_broken": le_broken,
            "spectral_broken": spec_broken,
            "agree": le_broken == spec_broken,
        }

    names = ["le", "rate", "rate_capped", "scaled_le", "le_broken", "spectral_broken", "agree"]
    grid = evaluate_grid(
        cell, [("omega", omegas), ("v", vs)], names, threads,
        skip_on=(NumericalError, CapacityError),
    )
    ax0, ax1 = grid.axes[0][1], grid.axes[1][1]
    grid.meta.update(
        provenance(
            t_e=float(t_e), threshold=threshold, eps_im=eps_im, scale=scale,
            params=p.as_dict(), policy=(policy or PropagatorPolicy()).__dict__,
        )
    )
    grid.meta["contours"] = _contour_polylines(grid.values["rate"], threshold, ax0, ax1)
    if spectral_boundary:
        grid.meta["spectral_boundary"] = np.column_stack(
            [ep_curve(p, ax1, (0.0, max(4.0, 2 * float(ax0.max()))), eps_im=eps_im, threads=threads), ax1]
        )
    return grid


def boundary_adjacent(mask: np.ndarray) -> np.ndarray:
    """Cells with a 4-neighbour carrying the opposite label."""
    mask = np.asarray(mask, dtype=bool)
    adj = np.zeros_like(mask)
    adj[1:] |= mask[1:] != mask[:-1]
    adj[:-1] |= mask[:-1] != mask[1:]
    adj[:, 1:] |= mask[:, 1:] != mask[:, :-1]
    adj[:, :-1] |= mask[:, :-1] != mask[:, 1:]
    return adj


@dataclass(frozen=True, eq=False)
class NScan:
    n_values: np.ndarray
    le: np.ndarray
    rate: np.ndarray
    le_reported: np.ndarray  # with the dark-count floor folded in
    range_mode: str
    t_e: float

    def local_extrema(self) -> tuple[list[int], list[int]]:
        """Interior local maxima and minima of ``F(t_e)`` along N."""
        f = self.le
        maxima = [int(self.n_values[i]) for i in range(1, len(f) - 1) if f[i] > f[i - 1] and f[i] > f[i + 1]]
        minima = [int(self.n_values[i]) for i in range(1, len(f) - 1) if f[i] < f[i - 1] and f[i] < f[i + 1]]
        return maxima, minima


def apply_dark_floor(le, floor: float) -> np.ndarray:
    """Detector floor: ``F + (1 - F) * floor``."""
    le = np.asarray(le, dtype=float)
    return le + (1.0 - le) * floor


def n_scan(
    p: ModelParams,
    t_e: float,
    n_values,
    range_mode: str | None = None,
    dark_count_floor: float | None = None,
    threads: int | None = None,
    policy: PropagatorPolicy | None = None,
) -> NScan:
    """``F(t_e)`` versus chain length for one coupling range."""
    range_mode = range_mode or p.interaction_range
    if range_mode == "nn":
        range_mode = "nearest-neighbor"
    n_values = np.asarray(list(n_values), dtype=int)
    for n in n_values:
        check_capacity(int(n))
    base = p.replace(interaction_range=range_mode)
    les = np.array(ordered_map(lambda n: le_at(base.replace(n_sites=int(n)), t_e, policy), n_values, threads))
    with np.errstate(divide="ignore"):
        rate = 0.0 - np.log(les)
    floor = p.dark_count_floor if dark_count_floor is None else dark_count_floor
    return NScan(n_values, les, rate, apply_dark_floor(les, floor), range_mode, float(t_e))


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian shot-to-shot jitter of the exchange (and optionally the drive).

    ``v_sigma`` is relative to the coupling when ``relative`` is set and in
    units of ``gamma`` otherwise; one draw rescales or shifts every pair
    coupling of a sample together.  ``omega_sigma`` is always relative.
    """

    v_sigma: float = 0.0
    n_samples: int = 1
    seed: int = 0
    relative: bool = True
    omega_sigma: float = 0.0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.v_sigma < 0 or self.omega_sigma < 0:
            raise ConfigError("jitter widths must be >= 0")

    @property
    def is_trivial(self) -> bool:
        return self.v_sigma == 0 and self.omega_sigma == 0


@dataclass(frozen=True, eq=False)
class DisorderResult:
    mean: np.ndarray
    std: np.ndarray
    samples: np.ndarray
    params: tuple[ModelParams, ...]


def jittered_params(p: ModelParams, d: DisorderSpec, index: int) -> ModelParams:
    if d.is_trivial:
        return p
    rng = trajectory_rng(d.seed, index)
    dv, dom = rng.standard_normal(2)
    omega = max(0.0, p.omega * (1.0 + d.omega_sigma * dom))
    if p.couplings is not None:
        if not d.relative:
            raise ConfigError("absolute V jitter needs a uniform chain; use relative jitter")
        return p.replace(couplings=p.couplings * (1.0 + d.v_sigma * dv), omega=omega)
    new_v = p.v * (1.0 + d.v_sigma * dv) if d.relative else p.v + d.v_sigma * dv
    return p.replace(v=float(new_v), omega=float(omega))


def disorder_average(
    fn: Callable[[ModelParams], object],
    p: ModelParams,
    d: DisorderSpec,
    threads: int | None = None,
) -> DisorderResult:
    """Mean and standard deviation of ``fn`` over jittered parameter draws.

    Sample ``j`` draws from its own stream keyed by ``(d.seed, j)`` and the
    reduction runs in sample order, so results do not depend on ``threads``.
    With zero jitter ``fn`` is evaluated once and returned unchanged.
    """
    if d.is_trivial:
        value = np.asarray(fn(p), dtype=float)
        return DisorderResult(value, np.zeros_like(value), value[None], (p,))
    params = tuple(jittered_params(p, d, j) for j in range(d.n_samples))
    samples = np.array(ordered_map(lambda q: np.asarray(fn(q), dtype=float), params, threads))
    std = samples.std(axis=0, ddof=1) if d.n_samples > 1 else np.zeros(samples.shape[1:])
    return DisorderResult(samples.mean(axis=0), std, samples, params)
