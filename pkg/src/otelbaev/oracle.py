"""Finite-element reference eigenvalues for H = -d^2/dx^2 + mu on [-R, R].

The quadratic form  int f'g' + int fg dmu_+ - int fg dmu_-  is discretised
with continuous piecewise-linear hat functions on a uniform grid. This gives
a symmetric tridiagonal pencil (A, B) with B positive definite, so the
number of negative pivots of A - lam B equals the number of generalised
eigenvalues below lam (Sylvester's law of inertia).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericFailure
from .measure import Atoms, Cantor, Component, HarmonicComb, Lattice, SignedMeasureSpec

__all__ = [
    "OracleWarning",
    "TridiagonalPencil",
    "assemble",
    "inertia",
    "count_below",
    "gershgorin_interval",
    "lowest_eigenvalues",
    "convergence_study",
]

DEFAULT_CANTOR_LEVEL = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


class OracleWarning(UserWarning):
    """Truncation or resolution issue in an assembled pencil."""


@dataclass
class TridiagonalPencil:
    a_diag: np.ndarray
    a_off: np.ndarray
    b_diag: np.ndarray
    b_off: np.ndarray
    R: float
    bc: str
    h: float
    n: int
    nodes: np.ndarray
    dropped: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.a_diag)

    def to_dict(self):
        return {
            "n": self.n,
            "R": self.R,
            "bc": self.bc,
            "h": self.h,
            "a_diag": self.a_diag.tolist(),
            "a_off": self.a_off.tolist(),
            "b_diag": self.b_diag.tolist(),
            "b_off": self.b_off.tolist(),
            "dropped": self.dropped,
            "notes": self.notes,
        }

    def dense(self):
        A = np.diag(self.a_diag) + np.diag(self.a_off, 1) + np.diag(self.a_off, -1)
        B = np.diag(self.b_diag) + np.diag(self.b_off, 1) + np.diag(self.b_off, -1)
        return A, B


def _atom_sites(comp: Component, R: float, cantor_level: int):
    if isinstance(comp, Cantor):
        return comp.atomize(cantor_level).atoms_in(-R, R)
    if isinstance(comp, (Atoms, Lattice, HarmonicComb)):
        return comp.atoms_in(-R, R)
    return None


def _add_atoms(diag, off, pts, wts, R, h, n, sign):
    e = np.clip(np.floor((pts + R) / h).astype(np.int64), 0, n - 1)
    xi = np.clip((pts - (-R + e * h)) / h, 0.0, 1.0)
    left, right = 1.0 - xi, xi
    np.add.at(diag, e, sign * wts * left * left)
    np.add.at(diag, e + 1, sign * wts * right * right)
    np.add.at(off, e, sign * wts * left * right)


def _add_density(diag, off, comp, R, h, n, sign):
    left_nodes = -R + h * np.arange(n)
    xi = 0.5 * (_GL_NODES + 1.0)
    w = 0.5 * h * _GL_WEIGHTS
    xq = left_nodes[:, None] + h * xi[None, :]
    f = comp.density(xq)
    phi_l, phi_r = 1.0 - xi, xi
    diag[:-1] += sign * (f * (w * phi_l * phi_l)).sum(axis=1)
    diag[1:] += sign * (f * (w * phi_r * phi_r)).sum(axis=1)
    off += sign * (f * (w * phi_l * phi_r)).sum(axis=1)


def assemble(spec: SignedMeasureSpec, R: float, n: int, bc: str = "neumann",
             cantor_level: int = DEFAULT_CANTOR_LEVEL) -> TridiagonalPencil:
    """Pencil for the truncated form on [-R, R] with ``n`` elements."""
    if not (R > 0 and math.isfinite(R)):
        raise ValueError("R must be positive and finite")
    if int(n) != n or n < 16:
        raise ValueError("n must be an integer >= 16")
    bc = bc.lower()
    if bc not in ("neumann", "dirichlet"):
        raise ValueError("bc must be 'neumann' or 'dirichlet'")
    n = int(n)
    h = 2.0 * R / n
    nodes = -R + h * np.arange(n + 1)
    a_diag = np.full(n + 1, 2.0 / h)
    a_diag[0] = a_diag[-1] = 1.0 / h
    a_off = np.full(n, -1.0 / h)
    b_diag = np.full(n + 1, 4.0 * h / 6.0)
    b_diag[0] = b_diag[-1] = h / 3.0
    b_off = np.full(n, h / 6.0)

    dropped, notes = [], []
    finest = math.inf
    for sign, comps in ((1.0, spec.positive), (-1.0, spec.negative)):
        for comp in comps:
            sites = _atom_sites(comp, R, cantor_level)
            if sites is not None:
                pts, wts = sites
                if len(pts):
                    _add_atoms(a_diag, a_off, np.asarray(pts), np.asarray(wts), R, h, n, sign)
                lost = comp.total_mass() - float(np.sum(wts)) if len(pts) else comp.total_mass()
                if lost > 1e-12 * max(1.0, comp.total_mass()) and not isinstance(comp, Cantor):
                    dropped.append({"component": comp.kind, "sign": int(sign), "dropped_mass": lost})
                    warnings.warn(f"{comp.kind}: atoms outside [-R, R] dropped (mass {lost!r})",
                                  OracleWarning, stacklevel=2)
                if isinstance(comp, Cantor):
                    finest = min(finest, (comp.b - comp.a) / 3.0)
                elif len(pts) > 1:
                    finest = min(finest, float(np.min(np.diff(pts))))
            else:
                _add_density(a_diag, a_off, comp, R, h, n, sign)
                finest = min(finest, comp.feature_scale())
    if h > finest:
        msg = f"grid step {h!r} exceeds the finest feature {finest!r}"
        notes.append(msg)
        warnings.warn(msg, OracleWarning, stacklevel=2)

    if bc == "dirichlet":
        a_diag, b_diag = a_diag[1:-1], b_diag[1:-1]
        a_off, b_off = a_off[1:-1], b_off[1:-1]
        nodes = nodes[1:-1]
    return TridiagonalPencil(a_diag, a_off, b_diag, b_off, float(R), bc, h, n, nodes, dropped, notes)


# ---------------------------------------------------------------------------
# inertia


@dataclass
class InertiaResult:
    negative: np.ndarray
    perturbed: np.ndarray  # number of zero pivots pushed to +eps

    @property
    def direction(self) -> str:
        return "positive" if np.any(self.perturbed) else "none"


def inertia(pencil: TridiagonalPencil, lam) -> InertiaResult:
    """Negative pivots of the LDL^T factorisation of A - lam B (vectorised over lam)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if not np.all(np.isfinite(lam)):
        raise ValueError("lambda must be finite")
    td = pencil.a_diag[:, None] - lam[None, :] * pencil.b_diag[:, None]
    to = pencil.a_off[:, None] - lam[None, :] * pencil.b_off[:, None]
    scale = float(np.max(np.abs(pencil.a_diag)) + np.max(np.abs(pencil.b_diag)))
    eps = 1e-12 * (np.abs(lam) + 1.0) * scale
    neg = np.zeros(lam.shape, dtype=np.int64)
    bumped = np.zeros(lam.shape, dtype=np.int64)
    d = td[0].copy()
    for i in range(pencil.dim):
        if i > 0:
            d = td[i] - to[i - 1] ** 2 / d
        zero = d == 0.0
        if zero.any():
            d = np.where(zero, eps, d)
            bumped += zero
        if not np.all(np.isfinite(d)):
            raise NumericFailure("factorisation broke down after pivot perturbation")
        neg += d < 0
    return InertiaResult(neg, bumped)


def count_below(pencil: TridiagonalPencil, lam):
    """Number of generalised eigenvalues strictly below ``lam``."""
    res = inertia(pencil, lam)
    if np.ndim(lam) == 0:
        return int(res.negative[0])
    return res.negative


def gershgorin_interval(pencil: TridiagonalPencil) -> tuple[float, float]:
    """Interval containing every generalised eigenvalue (Rayleigh quotient bounds)."""

    def gersh(diag, off):
        r = np.zeros_like(diag)
        r[:-1] += np.abs(off)
        r[1:] += np.abs(off)
        return float(np.min(diag - r)), float(np.max(diag + r))

    a_lo, a_hi = gersh(pencil.a_diag, pencil.a_off)
    b_lo, b_hi = gersh(pencil.b_diag, pencil.b_off)
    if b_lo <= 0:
        raise NumericFailure("mass matrix is not diagonally dominant")
    lo = a_lo / b_hi if a_lo >= 0 else a_lo / b_lo
    hi = a_hi / b_lo if a_hi >= 0 else a_hi / b_hi
    return lo, hi


@dataclass
class EigenTable:
    values: np.ndarray
    widths: np.ndarray

    def rows(self):
        return [(i + 1, float(v), float(w)) for i, (v, w) in enumerate(zip(self.values, self.widths))]


def lowest_eigenvalues(pencil: TridiagonalPencil, k: int, rtol: float = 1e-10) -> EigenTable:
    """The k smallest generalised eigenvalues by bisection on the inertia count."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if k > pencil.dim:
        raise ValueError(f"k = {k} exceeds the pencil dimension {pencil.dim}")
    lo0, hi0 = gershgorin_interval(pencil)
    span = max(hi0 - lo0, 1.0)
    lo = np.full(k, lo0 - 1e-9 * span)
    hi = np.full(k, hi0 + 1e-9 * span)
    target = np.arange(1, k + 1)
    for _ in range(200):
        width = hi - lo
        mid = 0.5 * (lo + hi)
        active = width > rtol * (1.0 + np.abs(mid))
        if not active.any():
            break
        c = count_below(pencil, mid[active])
        below = c >= target[active]  # the j-th eigenvalue lies below mid
        idx = np.flatnonzero(active)
        hi[idx[below]] = mid[active][below]
        lo[idx[~below]] = mid[active][~below]
    vals = np.maximum.accumulate(0.5 * (lo + hi))
    return EigenTable(vals, hi - lo)


# ---------------------------------------------------------------------------
# refinement studies


@dataclass
class StudyResult:
    lam: float
    rows: list
    converged: bool
    note: str

    def to_dict(self):
        return {"lam": self.lam, "rows": self.rows, "converged": self.converged, "note": self.note}


def convergence_study(spec: SignedMeasureSpec, lam: float, R_list, n_list, bc: str = "neumann",
                      k_eigs: int = 0) -> StudyResult:
    """Counts (and optionally lowest eigenvalues) over a grid of truncations and resolutions.

    The study is converged when the count agrees between the two finest
    resolutions at the largest radius and between the two largest radii at
    the finest resolution.
    """
    R_list = sorted(float(r) for r in R_list)
    n_list = sorted(int(v) for v in n_list)
    rows, table = [], {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OracleWarning)
        for R in R_list:
            for n in n_list:
                p = assemble(spec, R, n, bc)
                row = {"R": R, "n": n, "h": p.h, "count": count_below(p, lam)}
                if k_eigs:
                    row["eigenvalues"] = lowest_eigenvalues(p, min(k_eigs, p.dim)).values.tolist()
                rows.append(row)
                table[(R, n)] = row["count"]
    checks = []
    if len(n_list) > 1:
        checks.append(table[(R_list[-1], n_list[-1])] == table[(R_list[-1], n_list[-2])])
    if len(R_list) > 1:
        checks.append(table[(R_list[-1], n_list[-1])] == table[(R_list[-2], n_list[-1])])
    converged = all(checks)
    note = "" if converged else "count changes between the two finest settings"
    for row in rows:
        row["flagged"] = (not converged) and (row["R"] == R_list[-1] or row["n"] == n_list[-1])
    return StudyResult(float(lam), rows, converged, note)
