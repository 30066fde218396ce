"""Certified dimension lower bounds from a discretized transfer operator.

The action of the weighted transfer operator at exponent t on nonnegative
functions over X = closed ball B(1/2, 1/2),

    (L_t v)(z) = sum_e |phi_e'(z)|^t v(phi_e(z)),

is bounded from below by a finite monotone operator on step functions over
a p x p grid: weights use the exact infimum of |phi_e'| over each cell
(attained at a corner), and the landing position uses the exact Moebius
image of the cell's circumdisk. Any positive vector v with L v >= lam v
certifies lam <= exp(P(t)); lam >= 1 then gives P(t) >= 0, i.e. dimension
>= t.

Two discretizations are provided. "drop" builds a true matrix: a letter
contributes at a cell only when the image disk lies inside a single target
cell; straddling images are dropped. "cover" keeps every letter and takes
the minimum of v over the 3x3 cell block around the image center, which is
sound because the image disk (radius < cell side) cannot leave that block.
The cover operator loses less mass and is the default for certification;
the drop matrix needs a finer grid for the same conclusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .alphabet import GaussianLetter, LetterSet, enumerate_letters
from .systems import SystemDescriptor, phi_image_ball

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class OperatorGrid:
    p: int
    t: float
    active_cells: np.ndarray = field(compare=False, repr=False)  # (nA, 2) int cell coords
    cell_index: np.ndarray = field(compare=False, repr=False)    # p x p -> active id or -1
    weights: np.ndarray = field(compare=False, repr=False)       # (nL, nA) inf |phi'|^t per cell
    target_x: np.ndarray = field(compare=False, repr=False)      # (nL, nA) image center cell
    target_y: np.ndarray = field(compare=False, repr=False)
    image_center: np.ndarray = field(compare=False, repr=False)  # (nL, nA) complex
    image_radius: np.ndarray = field(compare=False, repr=False)  # (nL, nA) image disk radius
    letters: tuple = ()

    @property
    def n_active(self) -> int:
        return self.active_cells.shape[0]


@dataclass(frozen=True)
class LowerMatrix:
    matrix: sparse.csr_matrix
    grid: OperatorGrid
    dropped_fraction: float  # share of (letter, cell) contributions discarded

    @property
    def shape(self):
        return self.matrix.shape


def _letters_for(letter_cut: int, exclude=None) -> list:
    letters = enumerate_letters(letter_cut)
    if exclude is None:
        return letters
    if isinstance(exclude, LetterSet):
        if exclude.cofinite:
            raise ValueError("exclusion set must be finite")
        drop = set(exclude.letters)
    else:
        drop = set(exclude)
    return [e for e in letters if e not in drop]


def build_operator_grid(system: SystemDescriptor, t: float, p: int = 64,
                        letter_cut: int = 2000, exclude=None) -> OperatorGrid:
    """Grid data for both discretizations: per-cell infimum weights and the
    exact image disk (center cell and radius) of each cell's circumdisk."""
    if system.kind != "complex_cf":
        raise ValueError("grid transfer bounds are implemented for complex_cf")
    letters = _letters_for(letter_cut, exclude)
    if not letters:
        raise ValueError("no letters left after exclusion")
    h = 1.0 / p
    # cells over the bounding square [0,1] x [-1/2, 1/2]
    ix = np.arange(p)
    gx, gy = np.meshgrid(ix, ix, indexing="ij")
    x0 = gx.ravel() * h
    y0 = gy.ravel() * h - 0.5
    # active: cell's closest point to the center (1/2, 0) within radius 1/2
    cx = np.clip(0.5, x0, x0 + h)
    cy = np.clip(0.0, y0, y0 + h)
    dist = np.hypot(cx - 0.5, cy - 0.0)
    act = dist <= 0.5 + 1e-15
    active_cells = np.stack([gx.ravel()[act], gy.ravel()[act]], axis=1)
    cell_index = -np.ones((p, p), dtype=np.int64)
    cell_index[active_cells[:, 0], active_cells[:, 1]] = np.arange(active_cells.shape[0])

    ax0 = active_cells[:, 0] * h
    ay0 = active_cells[:, 1] * h - 0.5
    arr = np.array([complex(e.m, e.n) for e in letters])
    # infimum of |phi_e'|^t over the cell: |e + z|^-2t at the farthest corner
    corners = np.empty((4, active_cells.shape[0]), dtype=np.complex128)
    corners[0] = ax0 + 1j * ay0
    corners[1] = (ax0 + h) + 1j * ay0
    corners[2] = ax0 + 1j * (ay0 + h)
    corners[3] = (ax0 + h) + 1j * (ay0 + h)
    dmax = np.abs(arr[:, None, None] + corners[None, :, :]).max(axis=1)  # (nL, nA)
    weights = dmax ** (-2.0 * t)

    # exact Moebius image of the cell circumdisk
    zc = (ax0 + 0.5 * h) + 1j * (ay0 + 0.5 * h)
    rc = h * math.sqrt(0.5)
    u = zc[None, :] + arr[:, None]                       # e + z0 (c=1, d=e, a=0, b=1)
    den = np.abs(u) ** 2 - rc * rc
    ctr = np.conj(u) / den
    rad = rc / den
    target_x = np.clip((ctr.real * p).astype(np.int64), 0, p - 1)
    target_y = np.clip(((ctr.imag + 0.5) * p).astype(np.int64), 0, p - 1)
    if float(rad.max()) > h:
        raise ValueError(
            f"image radius {float(rad.max()):.3g} exceeds the cell side 1/{p}; "
            "increase p")
    return OperatorGrid(p=p, t=t, active_cells=active_cells, cell_index=cell_index,
                        weights=weights, target_x=target_x, target_y=target_y,
                        image_center=ctr, image_radius=rad, letters=tuple(letters))


def build_lower_matrix(system: SystemDescriptor, t: float, p: int = 64,
                       letter_cut: int = 2000, exclude=None,
                       grid: Optional[OperatorGrid] = None) -> LowerMatrix:
    """Sparse matrix below the transfer action on nonnegative step functions:
    entry (c, c') accumulates the cell-infimum weights of the letters whose
    whole image disk of cell c lands inside cell c'. Letters with straddling
    images contribute nothing (that is what makes the matrix a lower bound)."""
    if grid is None:
        grid = build_operator_grid(system, t, p, letter_cut, exclude)
    p = grid.p
    h = 1.0 / p
    nA = grid.n_active
    # containment of the image disk in the single target cell
    zc_x = grid.target_x * h
    zc_y = grid.target_y * h - 0.5
    ctr = grid.image_center
    rad = grid.image_radius
    inside = ((ctr.real - rad >= zc_x) & (ctr.real + rad <= zc_x + h) &
              (ctr.imag - rad >= zc_y) & (ctr.imag + rad <= zc_y + h))
    tgt = grid.cell_index[grid.target_x, grid.target_y]
    inside &= tgt >= 0
    n_all = inside.size
    n_in = int(inside.sum())
    if n_in == 0:
        raise ValueError("every image straddles a cell boundary; increase p")
    src = np.broadcast_to(np.arange(nA)[None, :], inside.shape)[inside]
    col = tgt[inside]
    dat = grid.weights[inside]
    mat = sparse.csr_matrix((dat, (src, col)), shape=(nA, nA))
    return LowerMatrix(matrix=mat, grid=grid,
                       dropped_fraction=1.0 - n_in / n_all)


def cw_lower_bound(M, iters: int = 100, v0: Optional[np.ndarray] = None,
                   stop_at: Optional[float] = None) -> float:
    """Best Collatz-Wielandt lower bound min_i (Mv)_i / v_i over power
    iterates: every positive v gives a certified lower bound for the Perron
    root, so the running maximum is one too. A row that never receives mass
    drives the bound to 0 (inconclusive), never below. Stops early once the
    running maximum reaches stop_at (each iterate's bound already stands on
    its own, so no accuracy is given up)."""
    M = sparse.csr_matrix(M) if not sparse.issparse(M) else M
    n = M.shape[0]
    v = np.ones(n) if v0 is None else np.asarray(v0, dtype=np.float64)
    if v.min() <= 0:
        raise ValueError("v0 must be strictly positive")
    best = 0.0
    for _ in range(iters):
        w = M @ v
        best = max(best, float((w / v).min()))
        if stop_at is not None and best >= stop_at:
            return best
        wmax = float(w.max())
        if wmax <= 0.0:
            return 0.0
        v = np.maximum(w / wmax, 1e-300)
    return best


def _cover_lower_bound(grid: OperatorGrid, iters: int,
                       stop_at: Optional[float] = None) -> float:
    """Collatz-Wielandt bound for the monotone cover operator: each letter
    contributes its weight times the minimum of v over the 3x3 block around
    the image center cell (the image disk cannot leave that block). The
    block minima are taken once per iterate on the padded grid, then looked
    up per (letter, cell)."""
    p = grid.p
    nA = grid.n_active
    vfull = np.full((p + 2, p + 2), np.inf)
    act_x = grid.active_cells[:, 0]
    act_y = grid.active_cells[:, 1]
    tx = grid.target_x
    ty = grid.target_y
    v = np.ones(nA)
    best = 0.0
    for _ in range(iters):
        vfull[act_x + 1, act_y + 1] = v
        m9 = np.minimum.reduce(
            [vfull[dx:dx + p, dy:dy + p] for dx in range(3) for dy in range(3)])
        w = np.einsum("lc,lc->c", grid.weights, m9[tx, ty])
        best = max(best, float((w / v).min()))
        if stop_at is not None and best >= stop_at:
            return best
        wmax = float(w.max())
        if wmax <= 0.0:
            return 0.0
        v = w / wmax
    return best


@dataclass(frozen=True)
class TransferCertificate:
    t: float
    certified: bool
    lower_bound: float
    slack: float
    threshold: float
    mode: str
    p: int
    letter_cut: int
    n_letters: int
    n_cells: int
    iters: int
    note: str = ""

    def to_json(self) -> dict:
        return {
            "t": self.t, "certified": self.certified,
            "cw_lower_bound": self.lower_bound, "slack": self.slack,
            "threshold": self.threshold, "mode": self.mode, "p": self.p,
            "letter_cut": self.letter_cut, "n_letters": self.n_letters,
            "n_cells": self.n_cells, "iters": self.iters, "note": self.note,
        }


def certify_dim_lower(system: SystemDescriptor, t: float, p: int = 64,
                      letter_cut: int = 2000, iters: int = 250,
                      mode: str = "cover", exclude=None) -> TransferCertificate:
    """Try to certify dimension >= t: a Collatz-Wielandt bound lam for the
    discretized lower transfer operator with lam - slack >= 1 + 1e-9 gives
    P(t) >= 0. An inconclusive outcome is normal (the discretization may
    simply be too coarse), never an exception."""
    if system.kind in ("similarity_ifs", "finite_gdms"):
        if system.kind == "similarity_ifs":
            # one-cell discretization is exact for similarities
            rho = math.fsum(r ** t for r in system.ratios)
            slack = abs(rho) * 16 * _EPS
        else:
            from .pressure import pressure_bracket
            br = pressure_bracket(system, t, n=1)
            rho = math.exp(br.lower)
            slack = abs(rho) * 16 * _EPS
        return TransferCertificate(
            t=t, certified=rho - slack >= 1.0 + 1e-9, lower_bound=rho,
            slack=slack, threshold=1.0 + 1e-9, mode="one_cell", p=1,
            letter_cut=len(system.ratios), n_letters=len(system.ratios),
            n_cells=1, iters=1)
    grid = build_operator_grid(system, t, p, letter_cut, exclude)
    bits = max(len(grid.letters), grid.n_active).bit_length()
    stop_at = (1.0 + 1e-9) / (1.0 - (bits + 8) * _EPS)
    if mode == "cover":
        lam = _cover_lower_bound(grid, iters, stop_at=stop_at)
    elif mode == "drop":
        lam = cw_lower_bound(build_lower_matrix(system, t, grid=grid).matrix,
                             iters=iters, stop_at=stop_at)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    slack = lam * (bits + 8) * _EPS
    certified = lam - slack >= 1.0 + 1e-9
    note = "" if certified else (
        "inconclusive at this discretization; a finer grid or larger letter "
        "cut may still certify")
    return TransferCertificate(
        t=t, certified=certified, lower_bound=lam, slack=slack,
        threshold=1.0 + 1e-9, mode=mode, p=p, letter_cut=letter_cut,
        n_letters=len(grid.letters), n_cells=grid.n_active, iters=iters,
        note=note)
