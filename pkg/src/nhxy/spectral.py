"""Biorthogonal eigendecomposition, PT-phase classification and exceptional points."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg

from .errors import BracketError, CapacityError, ConfigError, NumericalError
from .grid import PhaseGrid, evaluate_grid, ordered_map, provenance
from .model import (
    BasisSpec,
    ModelParams,
    SpinOperator,
    build_h_pt,
    check_capacity,
    is_reflection_symmetric,
    reduce_two_atom,
    reflection_sector,
)

log = logging.getLogger(__name__)

EPS_IM = 1e-7
DEFECTIVE_CONDITION = 1e12
EP_RESOLUTION = 1e-5


def fingerprint(matrix: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(matrix).tobytes()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class BiorthogonalSpectrum:
    """Eigenvalues with right vectors (columns) and left vectors (rows).

    Right vectors have unit 2-norm; the left vectors are the rows of the
    inverse right-vector matrix, so ``left @ right`` is the identity.
    ``condition`` is the 1-norm condition number of ``right``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float
    basis: BasisSpec | None = None

    @property
    def defective_adjacent(self) -> bool:
        return not self.condition < DEFECTIVE_CONDITION

    def biorthogonality_error(self) -> float:
        return float(np.abs(self.left @ self.right - np.eye(len(self.eigenvalues))).max())

    def completeness_error(self) -> float:
        return float(np.abs(self.right @ self.left - np.eye(len(self.eigenvalues))).max())


def decompose(h: SpinOperator | np.ndarray) -> BiorthogonalSpectrum:
    if isinstance(h, SpinOperator):
        mat, basis = h.matrix, h.basis
    else:
        mat, basis = np.asarray(h, dtype=complex), None
    try:
        evals, right = scipy.linalg.eig(mat)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver failed on {mat.shape[0]}x{mat.shape[0]} matrix "
            f"(fingerprint {fingerprint(mat)}): {exc}"
        ) from exc
    try:
        left = np.linalg.inv(right)
        condition = float(np.linalg.norm(right, 1) * np.linalg.norm(left, 1))
    except np.linalg.LinAlgError:
        left = np.linalg.pinv(right)
        condition = float("inf")
    if not np.isfinite(condition):
        condition = float("inf")
    if condition >= DEFECTIVE_CONDITION:
        log.info("spectrum is defective-adjacent (condition %.3g)", condition)
    return BiorthogonalSpectrum(evals, right, left, condition, basis)


@dataclass(frozen=True)
class PhaseClassification:
    is_pt_broken: bool
    max_abs_im: float
    participation_ratio: float
    d_imag: int
    d_total: int


def classify_eigenvalues(eigenvalues, eps_im: float = EPS_IM) -> PhaseClassification:
    if not eps_im > 0:
        raise ConfigError(f"eps_im must be > 0, got {eps_im}")
    im = np.abs(np.imag(np.asarray(eigenvalues)))
    d_imag = int(np.count_nonzero(im > eps_im))
    d_total = int(im.size)
    return PhaseClassification(
        is_pt_broken=d_imag > 0,
        max_abs_im=float(im.max()) if d_total else 0.0,
        participation_ratio=d_imag / d_total,
        d_imag=d_imag,
        d_total=d_total,
    )


def classify_pt(spec: BiorthogonalSpectrum, eps_im: float = EPS_IM) -> PhaseClassification:
    """Classify an ``H_pt`` spectrum: count eigenvalues with ``|Im E| > eps_im``."""
    return classify_eigenvalues(spec.eigenvalues, eps_im)


def single_site_eigenvalue(p: ModelParams) -> complex:
    """Positive root ``sqrt(omega**2 - gamma**2/4) / 2`` of the single-site ``H_pt``."""
    return np.sqrt(complex(p.omega**2 - p.gamma**2 / 4)) / 2


def noninteracting_eigenvalues(p: ModelParams) -> np.ndarray:
    """``H_pt`` spectrum at zero coupling: N-fold sum of the single-site pair ``+-e``."""
    e = single_site_eigenvalue(p)
    n = p.n_sites
    return np.concatenate(
        [np.full(comb(n, j), (n - 2 * j) * e, dtype=complex) for j in range(n + 1)]
    )


def sector_eigenvalues(h: SpinOperator) -> dict[int, np.ndarray]:
    """Eigenvalues per reflection-parity sector of a reflection-symmetric full-basis operator."""
    n = h.basis.n_sites
    out = {}
    for parity in (1, -1):
        sector = reflection_sector(n, parity)
        if sector.dim == 0:
            out[parity] = np.zeros(0, dtype=complex)
            continue
        out[parity] = _eigvals(sector.project(h.matrix))
    return out


def _eigvals(mat: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.eigvals(mat)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver failed (fingerprint {fingerprint(mat)}): {exc}"
        ) from exc


def operator_eigenvalues(h: SpinOperator, use_symmetry: bool = True) -> np.ndarray:
    """All eigenvalues; splits by reflection parity when that is exact and worthwhile."""
    n = h.basis.n_sites
    if (
        use_symmetry
        and h.basis.kind == "full"
        and n >= 3
        and is_reflection_symmetric(h.matrix, n)
    ):
        blocks = sector_eigenvalues(h)
        return np.concatenate([blocks[1], blocks[-1]])
    return _eigvals(h.matrix)


def pt_eigenvalues(
    p: ModelParams, sector: str = "full", use_symmetry: bool = True
) -> np.ndarray:
    """Eigenvalues of ``H_pt`` in the full space or the two-atom symmetric sector."""
    if sector == "two-atom-symmetric":
        if p.n_sites != 2:
            raise ConfigError("two-atom-symmetric sector needs n_sites == 2")
        reduced, _ = reduce_two_atom(build_h_pt(p))
        return _eigvals(reduced.matrix)
    if sector != "full":
        raise ConfigError(f"unknown sector {sector!r}")
    check_capacity(p.n_sites)
    if use_symmetry and not np.any(p.coupling_matrix()):
        return noninteracting_eigenvalues(p)
    return operator_eigenvalues(build_h_pt(p), use_symmetry=use_symmetry)


def classify_params(
    p: ModelParams, eps_im: float = EPS_IM, sector: str = "full"
) -> PhaseClassification:
    return classify_eigenvalues(pt_eigenvalues(p, sector), eps_im)


def _with_axis(p: ModelParams, axis: str, value: float) -> ModelParams:
    if axis == "omega":
        return p.replace(omega=float(value))
    if axis in ("coupling", "v"):
        if p.couplings is not None:
            raise ConfigError("coupling scans need the uniform-chain coupling, not an explicit matrix")
        return p.replace(v=float(value))
    if axis == "n_sites":
        return p.replace(n_sites=int(round(value)))
    raise ConfigError(f"unknown scan axis {axis!r}")


def find_ep(
    p: ModelParams,
    scan_axis: str = "omega",
    sector: str = "full",
    bracket: tuple[float, float] = (0.0, 3.0),
    eps_im: float = EPS_IM,
    resolution: float = EP_RESOLUTION,
) -> float:
    """Bisect for the parameter value where ``max |Im E(H_pt)|`` crosses ``eps_im``."""
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise BracketError(f"bracket must be increasing, got {bracket}")

    def broken(x):
        return classify_eigenvalues(pt_eigenvalues(_with_axis(p, scan_axis, x), sector), eps_im).is_pt_broken

    b_lo, b_hi = broken(lo), broken(hi)
    if b_lo == b_hi:
        raise BracketError(
            f"no PT classification change on {scan_axis} in [{lo}, {hi}] "
            f"(both ends {'broken' if b_lo else 'unbroken'})"
        )
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if broken(mid) == b_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ep_curve(
    p: ModelParams,
    v_values,
    omega_bracket: tuple[float, float] = (0.0, 4.0),
    sector: str = "full",
    eps_im: float = EPS_IM,
    threads: int | None = None,
) -> np.ndarray:
    """Critical drive ``omega_c(V)`` for each coupling value (NaN where no crossing)."""
    def one(v):
        try:
            return find_ep(p.replace(v=float(v)), "omega", sector, omega_bracket, eps_im)
        except BracketError:
            return float("nan")

    return np.array(ordered_map(one, list(v_values), threads))


@dataclass(frozen=True)
class AdiabaticEstimate:
    omega_eff: float
    gamma_eff: float
    ep_estimate: float
    ep_unsimplified: float | None
    valid: bool


def adiabatic_two_level(p: ModelParams) -> AdiabaticEstimate:
    """Two-level reduction after eliminating the symmetric single excitation.

    ``ep_estimate`` is the simplified ``gamma * sqrt(1/4 + |V|/gamma)``.  The
    unsimplified root needs ``|V| > gamma/4``; otherwise it is ``None`` and
    ``valid`` is False.
    """
    g, om = p.gamma, p.omega
    v = float(p.coupling_matrix()[0, 1]) if p.n_sites >= 2 else p.v
    denom = v**2 + g**2 / 4
    omega_eff = om**2 * v / denom
    gamma_eff = 2 * g * (1 + (om**2 / 4) / denom)
    ep_estimate = g * np.sqrt(0.25 + abs(v) / g)
    valid = abs(v) > g / 4
    ep_full = float(np.sqrt(denom * g / (abs(v) - g / 4))) if valid else None
    return AdiabaticEstimate(float(omega_eff), float(gamma_eff), float(ep_estimate), ep_full, valid)


def zeno_rates(p: ModelParams) -> tuple[float, float]:
    """Single-site LE oscillation frequency and slowest decay rate.

    Above the EP the echo oscillates at ``sqrt(omega**2 - gamma**2/4)`` and decays
    at ``gamma/2``; below it the frequency is zero and the decay slows to
    ``gamma/2 - sqrt(gamma**2/4 - omega**2)``.
    """
    if p.n_sites != 1:
        raise ConfigError("zeno_rates is defined for a single site")
    g, om = p.gamma, p.omega
    disc = om**2 - g**2 / 4
    if disc > 0:
        return float(np.sqrt(disc)), g / 2
    if disc == 0:
        return 0.0, g / 2
    return 0.0, float(g / 2 - np.sqrt(-disc))


# -- participation-ratio maps ------------------------------------------------


def smooth_boundary(n_values, v_c) -> np.ndarray:
    """Piecewise-linear curve through the local minima of ``v_c`` along N."""
    n_values = np.asarray(n_values, dtype=float)
    v_c = np.asarray(v_c, dtype=float)
    ok = np.flatnonzero(np.isfinite(v_c))
    if ok.size == 0:
        return np.full_like(v_c, np.nan)
    vals = v_c[ok]
    keep = []
    for k in range(len(ok)):
        left = vals[k - 1] if k > 0 else np.inf
        right = vals[k + 1] if k + 1 < len(ok) else np.inf
        if vals[k] <= left and vals[k] <= right:
            keep.append(k)
    if not keep:
        keep = [int(np.argmin(vals))]
    xs, ys = n_values[ok][keep], vals[keep]
    out = np.interp(n_values, xs, ys)
    out[~np.isfinite(v_c)] = np.nan
    return out


def pr_map(
    p: ModelParams,
    x_axis: tuple[str, np.ndarray],
    y_axis: tuple[str, np.ndarray],
    eps_im: float = EPS_IM,
    threads: int | None = None,
    stop_after_boundary: bool = False,
) -> PhaseGrid:
    """Participation ratio ``R`` on a grid; rows are ``y_axis``, columns ``x_axis``.

    Axes are any two of ``omega``, ``v``, ``n_sites``.  Cells above the size cap
    are skipped.  With ``stop_after_boundary`` each row is scanned in order and
    cells past the first ``R > 0`` are skipped, which is all the raw boundary
    needs.
    """
    y_name, y_vals = y_axis[0], np.asarray(y_axis[1], dtype=float)
    x_name, x_vals = x_axis[0], np.asarray(x_axis[1], dtype=float)

    def cell(y, x):
        q = _with_axis(_with_axis(p, y_name, y), x_name, x)
        c = classify_params(q, eps_im)
        return {
            "r": c.participation_ratio,
            "d_imag": c.d_imag,
            "d_total": c.d_total,
            "max_abs_im": c.max_abs_im,
        }

    names = ["r", "d_imag", "d_total", "max_abs_im"]
    if stop_after_boundary:
        rows = ordered_map(lambda y: _scan_row(cell, y, x_vals), y_vals, threads)
        grid = _stack_rows(rows, (y_name, y_vals), (x_name, x_vals), names)
    else:
        grid = evaluate_grid(
            cell, [(y_name, y_vals), (x_name, x_vals)], names, threads, skip_on=(CapacityError,)
        )

    r = grid.values["r"]
    boundary = np.zeros(grid.shape)
    for i in range(grid.shape[0]):
        for j in range(1, grid.shape[1]):
            if r[i, j - 1] == 0 and r[i, j] > 0:
                boundary[i, j] = 1
    grid.values["boundary"] = boundary
    raw = np.array([_first_broken(x_vals, r[i]) for i in range(grid.shape[0])])
    grid.meta.update(
        provenance(eps_im=eps_im, params=p.as_dict(), stop_after_boundary=stop_after_boundary)
    )
    grid.meta["boundary_raw"] = raw
    grid.meta["boundary_smoothed"] = smooth_boundary(y_vals, raw) if y_name == "n_sites" else raw
    return grid


def _first_broken(x_vals, r_row) -> float:
    hits = np.flatnonzero(np.nan_to_num(r_row, nan=0.0) > 0)
    return float(x_vals[hits[0]]) if hits.size else float("nan")


def _scan_row(cell, y, x_vals):
    out = []
    stop = False
    for x in x_vals:
        if stop:
            out.append((None, "beyond boundary"))
            continue
        try:
            payload = cell(y, x)
        except CapacityError as exc:
            out.append((None, f"CapacityError: {exc}"))
            continue
        out.append((payload, None))
        if payload["r"] > 0:
            stop = True
    return out


def _stack_rows(rows, y_axis, x_axis, names) -> PhaseGrid:
    shape = (len(y_axis[1]), len(x_axis[1]))
    values = {k: np.full(shape, np.nan) for k in names}
    skipped = np.zeros(shape, dtype=bool)
    reasons = {}
    for i, row in enumerate(rows):
        for j, (payload, err) in enumerate(row):
            if err is not None:
                skipped[i, j] = True
                reasons[(i, j)] = err
            else:
                for k in names:
                    values[k][i, j] = payload[k]
    return PhaseGrid((y_axis, x_axis), values, skipped, reasons)
