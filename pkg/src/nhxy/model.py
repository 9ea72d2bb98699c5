"""Parameters, basis bookkeeping and Hamiltonian builders.

All internal quantities are dimensionless, measured in units of the dressed
decay rate ``gamma`` (normally 1.0).  Converters at the bottom of the module
turn laboratory numbers (MHz x 2pi, microseconds, C3 coefficients) into these
units.

Basis convention
----------------
A configuration of ``N`` spins is stored as an integer.  Site 1 is the least
significant digit.  In the qubit basis bit value 0 is ``|up>`` and 1 is
``|down>``, so index 0 is the fully polarized state ``|0_N> = |up...up>`` and
the popcount of an index is its excitation number ``m`` (number of down
spins).  The three-level basis uses base-3 digits 0 = up, 1 = down, 2 = g.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ConfigError, SymmetryError

MAX_SITES = 14
MAX_SITES_THREE_LEVEL = 6

BASIS_KINDS = (
    "full",
    "two-atom-symmetric",
    "single-excitation",
    "three-level",
    "reflection-even",
    "reflection-odd",
)

INTERACTION_RANGES = ("full", "nearest-neighbor")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Physical parameters of the driven dissipative XY chain, in units of ``gamma``.

    ``v`` is the nearest-neighbour exchange.  With ``interaction_range="full"``
    all pairs couple dipolarly, ``V_ij = v / |i-j|**3`` (equal spacing, open
    chain).  An explicit symmetric ``couplings`` matrix overrides both.
    """

    omega: float
    n_sites: int = 1
    gamma: float = 1.0
    v: float = 0.0
    interaction_range: str = "full"
    couplings: np.ndarray | None = field(default=None, repr=False)
    dark_count_floor: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if not self.omega >= 0:
            raise ConfigError(f"omega must be >= 0, got {self.omega}")
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ConfigError(f"n_sites must be a positive integer, got {self.n_sites}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        if self.interaction_range not in INTERACTION_RANGES:
            raise ConfigError(
                f"interaction_range must be one of {INTERACTION_RANGES}, "
                f"got {self.interaction_range!r}"
            )
        if not 0.0 <= self.dark_count_floor < 1.0:
            raise ConfigError(f"dark_count_floor must lie in [0, 1), got {self.dark_count_floor}")
        if self.couplings is not None:
            c = np.array(self.couplings, dtype=float)
            if c.shape != (self.n_sites, self.n_sites):
                raise ConfigError(
                    f"couplings must be {self.n_sites}x{self.n_sites}, got {c.shape}"
                )
            if not np.allclose(c, c.T, rtol=0, atol=1e-14):
                raise ConfigError("couplings matrix must be symmetric")
            if np.any(np.diag(c) != 0):
                raise ConfigError("couplings matrix must have zero diagonal")
            c.setflags(write=False)
            object.__setattr__(self, "couplings", c)

    @classmethod
    def from_dipolar(cls, omega, n_sites, c3, spacing, gamma, **kwargs):
        """Build parameters from laboratory numbers.

        ``omega``, ``gamma`` and ``c3 / spacing**3`` must share one frequency
        unit (e.g. MHz x 2pi with ``c3`` in MHz x 2pi x um^3).  The result is
        expressed in units of ``gamma``.
        """
        v = dipolar_coupling(c3, spacing) / gamma
        return cls(omega=omega / gamma, n_sites=n_sites, gamma=1.0, v=v, **kwargs)

    def replace(self, **changes) -> ModelParams:
        return dataclasses.replace(self, **changes)

    def coupling_matrix(self) -> np.ndarray:
        """Symmetric, zero-diagonal exchange matrix ``V_ij``."""
        if self.couplings is not None:
            return np.array(self.couplings)
        n = self.n_sites
        dist = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float)
        mat = np.zeros((n, n))
        off = dist > 0
        if self.interaction_range == "full":
            mat[off] = self.v / dist[off] ** 3
        else:
            mat[dist == 1] = self.v
        return mat

    def as_dict(self) -> dict:
        out = {
            "omega": self.omega,
            "n_sites": self.n_sites,
            "gamma": self.gamma,
            "v": self.v,
            "interaction_range": self.interaction_range,
            "dark_count_floor": self.dark_count_floor,
        }
        if self.couplings is not None:
            out["couplings"] = self.couplings.tolist()
        return out


@dataclass(frozen=True)
class BasisSpec:
    kind: str
    n_sites: int

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ConfigError(f"unknown basis kind {self.kind!r}")

    @property
    def dim(self) -> int:
        n = self.n_sites
        if self.kind == "full":
            return 2**n
        if self.kind == "two-atom-symmetric":
            return 3
        if self.kind == "single-excitation":
            return n + 1
        if self.kind == "three-level":
            return 3**n
        return len(reflection_sector(n, +1 if self.kind == "reflection-even" else -1).reps)


@dataclass(frozen=True, eq=False)
class SpinOperator:
    """Dense complex matrix tied to a basis."""

    matrix: np.ndarray
    basis: BasisSpec
    hermitian: bool = False
    params: ModelParams | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"operator must be square, got shape {m.shape}")
        if m.shape[0] != self.basis.dim:
            raise ConfigError(
                f"operator dimension {m.shape[0]} does not match basis "
                f"{self.basis.kind} (dim {self.basis.dim})"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: SpinOperator) -> SpinOperator:
        if other.basis != self.basis:
            raise ConfigError("cannot add operators on different bases")
        return SpinOperator(
            self.matrix + other.matrix,
            self.basis,
            hermitian=self.hermitian and other.hermitian,
            params=self.params if self.params is not None else other.params,
        )


def check_capacity(n_sites: int, cap: int = MAX_SITES) -> None:
    if n_sites > cap:
        raise CapacityError(
            f"n_sites={n_sites} exceeds the dense-matrix cap of {cap} sites "
            f"(dimension {2**n_sites})"
        )


@lru_cache(maxsize=32)
def down_counts(n_sites: int) -> np.ndarray:
    """Excitation number (popcount) of every qubit-basis index."""
    idx = np.arange(2**n_sites)
    m = np.zeros_like(idx)
    for i in range(n_sites):
        m += (idx >> i) & 1
    m.setflags(write=False)
    return m


def configuration(index: int, n_sites: int) -> tuple[int, ...]:
    """Bits of a qubit-basis index, site 1 first (0 = up, 1 = down)."""
    return tuple((index >> i) & 1 for i in range(n_sites))


def config_index(bits) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


def _add_exchange(mat: np.ndarray, couplings: np.ndarray) -> None:
    n = couplings.shape[0]
    idx = np.arange(mat.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            vij = couplings[i, j]
            if vij == 0:
                continue
            differ = ((idx >> i) & 1) != ((idx >> j) & 1)
            src = idx[differ]
            mat[src, src ^ ((1 << i) | (1 << j))] += vij


def _drive(mat: np.ndarray, n_sites: int, omega: float) -> None:
    idx = np.arange(mat.shape[0])
    for i in range(n_sites):
        mat[idx, idx ^ (1 << i)] += omega / 2


def build_h_pt(p: ModelParams, cap: int = MAX_SITES) -> SpinOperator:
    """PT-symmetric part: drive, imaginary sigma_z field and XY exchange."""
    check_capacity(p.n_sites, cap)
    n = p.n_sites
    mat = np.zeros((2**n, 2**n), dtype=complex)
    m = down_counts(n)
    mat[np.diag_indices_from(mat)] = 1j * p.gamma / 4 * (n - 2 * m)
    _drive(mat, n, p.omega)
    _add_exchange(mat, p.coupling_matrix())
    return SpinOperator(mat, BasisSpec("full", n), params=p)


def build_h_im(p: ModelParams, cap: int = MAX_SITES) -> SpinOperator:
    """Homogeneous imaginary field ``-i N gamma / 4`` times the identity."""
    check_capacity(p.n_sites, cap)
    d = 2**p.n_sites
    mat = -1j * p.n_sites * p.gamma / 4 * np.eye(d, dtype=complex)
    return SpinOperator(mat, BasisSpec("full", p.n_sites), params=p)


def build_h_nh(p: ModelParams, cap: int = MAX_SITES) -> SpinOperator:
    """Full non-Hermitian Hamiltonian ``H_pt + H_im``."""
    return build_h_pt(p, cap) + build_h_im(p, cap)


def build_h0(p: ModelParams, cap: int = MAX_SITES) -> SpinOperator:
    """Coherent (Hermitian) part: resonant drive plus flip-flop exchange."""
    check_capacity(p.n_sites, cap)
    n = p.n_sites
    mat = np.zeros((2**n, 2**n), dtype=complex)
    _drive(mat, n, p.omega)
    _add_exchange(mat, p.coupling_matrix())
    return SpinOperator(mat, BasisSpec("full", n), hermitian=True, params=p)


def decay_projector_sum(n_sites: int) -> np.ndarray:
    """Diagonal of ``sum_i |down_i><down_i|`` in the qubit basis."""
    return down_counts(n_sites).astype(float)


_SYM = 1 / np.sqrt(2)


def reduce_two_atom(h: SpinOperator, atol: float = 1e-12) -> tuple[SpinOperator, complex]:
    """Project a two-site operator onto the exchange-symmetric sector.

    Returns the 3x3 operator on ``{|up up>, (|up down> + |down up>)/sqrt2,
    |down down>}`` and the eigenvalue of the antisymmetric dark state.
    """
    if h.basis != BasisSpec("full", 2):
        raise SymmetryError("reduce_two_atom needs a two-site full-basis operator")
    m = h.matrix
    swap = [0, 2, 1, 3]
    if not np.allclose(m[np.ix_(swap, swap)], m, rtol=0, atol=atol * max(1.0, np.abs(m).max())):
        raise SymmetryError("operator is not symmetric under exchange of the two sites")
    iso = np.array([[1, 0, 0], [0, _SYM, 0], [0, _SYM, 0], [0, 0, 1]], dtype=complex)
    dark = np.array([0, _SYM, -_SYM, 0], dtype=complex)
    reduced = iso.T @ m @ iso
    dark_value = complex(dark @ m @ dark)
    return SpinOperator(reduced, BasisSpec("two-atom-symmetric", 2), params=h.params), dark_value


# -- reflection symmetry ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReflectionSector:
    """Orthonormal basis of one parity sector of the site reflection ``i -> N+1-i``.

    Sector vector ``a`` is ``w_rep[a] |reps[a]> + w_par[a] |partners[a]>``.
    Self-mirrored configurations have ``w_par = 0`` and appear only in the even
    sector.
    """

    n_sites: int
    parity: int
    reps: np.ndarray
    partners: np.ndarray
    w_rep: np.ndarray
    w_par: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.reps)

    def project(self, matrix: np.ndarray) -> np.ndarray:
        r, q = self.reps, self.partners
        a, b = self.w_rep, self.w_par
        out = np.outer(a, a) * matrix[np.ix_(r, r)]
        out += np.outer(a, b) * matrix[np.ix_(r, q)]
        out += np.outer(b, a) * matrix[np.ix_(q, r)]
        out += np.outer(b, b) * matrix[np.ix_(q, q)]
        return out

    def restrict(self, vec: np.ndarray) -> np.ndarray:
        """Sector coordinates of full-space vectors (last axis)."""
        return self.w_rep * vec[..., self.reps] + self.w_par * vec[..., self.partners]

    def lift(self, coords: np.ndarray) -> np.ndarray:
        """Full-space vectors from sector coordinates (last axis)."""
        shape = coords.shape[:-1] + (2**self.n_sites,)
        out = np.zeros(shape, dtype=np.result_type(coords, float))
        out[..., self.reps] += self.w_rep * coords
        out[..., self.partners] += self.w_par * coords
        return out


@lru_cache(maxsize=32)
def reflection_permutation(n_sites: int) -> np.ndarray:
    idx = np.arange(2**n_sites)
    out = np.zeros_like(idx)
    for i in range(n_sites):
        out |= ((idx >> i) & 1) << (n_sites - 1 - i)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def reflection_sector(n_sites: int, parity: int) -> ReflectionSector:
    if parity not in (1, -1):
        raise ConfigError("parity must be +1 or -1")
    rev = reflection_permutation(n_sites)
    idx = np.arange(2**n_sites)
    fixed = rev == idx
    pair = idx < rev
    if parity == 1:
        reps = np.concatenate([idx[fixed], idx[pair]])
        partners = np.concatenate([idx[fixed], rev[pair]])
        w_rep = np.concatenate([np.ones(fixed.sum()), np.full(pair.sum(), _SYM)])
        w_par = np.concatenate([np.zeros(fixed.sum()), np.full(pair.sum(), _SYM)])
    else:
        reps, partners = idx[pair], rev[pair]
        w_rep = np.full(pair.sum(), _SYM)
        w_par = np.full(pair.sum(), -_SYM)
    order = np.argsort(reps, kind="stable")
    arrays = [reps[order], partners[order], w_rep[order], w_par[order]]
    for a in arrays:
        a.setflags(write=False)
    return ReflectionSector(n_sites, parity, *arrays)


def is_reflection_symmetric(matrix: np.ndarray, n_sites: int, rtol: float = 1e-13) -> bool:
    rev = reflection_permutation(n_sites)
    scale = max(1.0, float(np.abs(matrix).max()))
    return bool(np.abs(matrix[np.ix_(rev, rev)] - matrix).max() <= rtol * scale)


# -- three-level embedding (up, down, g) -------------------------------------


@lru_cache(maxsize=16)
def three_level_digits(n_sites: int) -> np.ndarray:
    """Array of shape (3**N, N) with the base-3 digits of every index."""
    idx = np.arange(3**n_sites)
    digits = np.zeros((3**n_sites, n_sites), dtype=np.int64)
    for i in range(n_sites):
        digits[:, i] = (idx // 3**i) % 3
    digits.setflags(write=False)
    return digits


def build_h0_three_level(p: ModelParams, cap: int = MAX_SITES_THREE_LEVEL) -> SpinOperator:
    """Coherent Hamiltonian on ``{up, down, g}^N``; ``|g>`` is uncoupled."""
    check_capacity(p.n_sites, cap)
    n = p.n_sites
    digits = three_level_digits(n)
    d = 3**n
    idx = np.arange(d)
    mat = np.zeros((d, d), dtype=complex)
    for i in range(n):
        up = digits[:, i] == 0
        mat[idx[up], idx[up] + 3**i] += p.omega / 2
        mat[idx[up] + 3**i, idx[up]] += p.omega / 2
    couplings = p.coupling_matrix()
    for i in range(n):
        for j in range(i + 1, n):
            vij = couplings[i, j]
            if vij == 0:
                continue
            ud = (digits[:, i] == 0) & (digits[:, j] == 1)
            src = idx[ud]
            dst = src + 3**i - 3**j
            mat[src, dst] += vij
            mat[dst, src] += vij
    return SpinOperator(mat, BasisSpec("three-level", n), hermitian=True, params=p)


def three_level_qubit_indices(n_sites: int) -> np.ndarray:
    """Three-level indices of the qubit configurations, in qubit-index order."""
    q = np.arange(2**n_sites)
    out = np.zeros_like(q)
    for i in range(n_sites):
        out += ((q >> i) & 1) * 3**i
    return out


# -- unit conversion ---------------------------------------------------------


def dipolar_coupling(c3: float, distance: float) -> float:
    """Flip-flop strength ``V = C3 / (2 r**3)`` between the dressed and bare states."""
    return 0.5 * c3 / distance**3


def to_gamma_units(value: float, gamma: float) -> float:
    return value / gamma


def from_gamma_units(value: float, gamma: float) -> float:
    return value * gamma


def dimensionless_time(t: float, gamma: float) -> float:
    """``gamma * t``; with ``gamma`` in MHz x 2pi and ``t`` in us this is ``Gamma t``."""
    return gamma * t
