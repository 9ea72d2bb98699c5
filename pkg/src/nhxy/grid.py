"""Parameter grids with per-cell payloads, and deterministic parallel mapping."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__

THREADS_ENV = "NHXY_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable, items: Iterable, threads: int | None = None) -> list:
    """Map ``fn`` over ``items``; results come back in input order for any pool size."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(eq=False)
class PhaseGrid:
    """Two-axis grid. ``values[name][i, j]`` belongs to ``axes[0][1][i]``, ``axes[1][1][j]``."""

    axes: tuple[tuple[str, np.ndarray], tuple[str, np.ndarray]]
    values: dict[str, np.ndarray]
    skipped: np.ndarray
    skip_reason: dict[tuple[int, int], str] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = self.shape
        for name, arr in self.values.items():
            if arr.shape != shape:
                raise ValueError(f"payload {name!r} has shape {arr.shape}, grid is {shape}")
        if self.skipped.shape != shape:
            raise ValueError("skip mask does not match grid shape")

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.axes[0][1]), len(self.axes[1][1]))

    @property
    def n_cells(self) -> int:
        return self.shape[0] * self.shape[1]

    def rows(self) -> tuple[list[str], list[list]]:
        """Header and row-major records, one per cell."""
        (n0, a0), (n1, a1) = self.axes
        names = list(self.values)
        header = [n0, n1, *names, "skipped"]
        out = []
        for i, x0 in enumerate(a0):
            for j, x1 in enumerate(a1):
                out.append([x0, x1, *(self.values[k][i, j] for k in names), int(self.skipped[i, j])])
        return header, out


def provenance(**extra) -> dict:
    meta = {"code_version": __version__}
    meta.update(extra)
    return meta


def evaluate_grid(
    fn: Callable[[float, float], dict],
    axes: Sequence[tuple[str, np.ndarray]],
    names: Sequence[str],
    threads: int | None = None,
    skip_on: tuple[type[Exception], ...] = (),
) -> PhaseGrid:
    """Evaluate ``fn(x0, x1) -> {name: scalar}`` on every cell.

    Exceptions listed in ``skip_on`` mark the cell skipped instead of aborting.
    """
    (n0, a0), (n1, a1) = axes
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    cells = [(i, j) for i in range(len(a0)) for j in range(len(a1))]

    def run(cell):
        i, j = cell
        try:
            return fn(a0[i], a1[j]), None
        except skip_on as exc:
            return None, f"{type(exc).__name__}: {exc}"

    results = ordered_map(run, cells, threads)
    shape = (len(a0), len(a1))
    values = {k: np.full(shape, np.nan) for k in names}
    skipped = np.zeros(shape, dtype=bool)
    reasons = {}
    for (i, j), (payload, err) in zip(cells, results):
        if err is not None:
            skipped[i, j] = True
            reasons[(i, j)] = err
            continue
        for k in names:
            values[k][i, j] = payload[k]
    return PhaseGrid(((n0, a0), (n1, a1)), values, skipped, reasons)
