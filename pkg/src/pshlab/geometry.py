"""Levi-Civita product, curvature and Kundt pairs of left-invariant metrics on psh."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import PSH, LieAlgebra3
from .euler_arnold import GeodesicField, build_field
from .metric import SymmetricForm

__all__ = [
    "LeviCivitaProduct",
    "Subalgebra2",
    "KundtReport",
    "levi_civita",
    "curvature",
    "lowered_curvature",
    "is_kundt_pair",
    "subalgebra_catalog",
    "kundt_scan",
    "scan_all",
    "f_beta",
    "F_PLANE",
    "D_PLANE",
]

RANK_TOL = 1e-12
GRAM_TOL = 1e-12
STABLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LeviCivitaProduct:
    """``gamma[i, j, k]`` is the ``e_k`` coefficient of ``e_i . e_j``."""

    gamma: np.ndarray
    metric: SymmetricForm
    algebra: LieAlgebra3 = PSH

    def __call__(self, x, y) -> np.ndarray:
        return np.einsum("i,j,ijk->k", np.asarray(x, float), np.asarray(y, float), self.gamma)

    def torsion_residual(self) -> float:
        g = self.gamma
        return float(np.max(np.abs(g - g.transpose(1, 0, 2) - self.algebra.structure_constants)))

    def compatibility_residual(self) -> float:
        """Max over basis triples of ``<x.y, z> + <y, x.z>``."""
        low = np.einsum("ijk,kl->ijl", self.gamma, self.metric.matrix)  # <e_i.e_j, e_l>
        return float(np.max(np.abs(low + low.transpose(0, 2, 1))))


def levi_civita(m: SymmetricForm, algebra: LieAlgebra3 = PSH) -> LeviCivitaProduct:
    """Koszul formula ``2<x.y, z> = <[x,y],z> - <[y,z],x> + <[z,x],y>``."""
    Q = m.matrix
    br = np.einsum("ijk,kl->ijl", algebra.structure_constants, Q)  # <[e_i, e_j], e_l>
    low = 0.5 * (br - np.einsum("jli->ijl", br) + np.einsum("lij->ijl", br))
    gamma = np.einsum("ijl,lk->ijk", low, np.linalg.inv(Q))
    return LeviCivitaProduct(gamma, m, algebra)


def curvature(m: SymmetricForm, algebra: LieAlgebra3 = PSH) -> np.ndarray:
    """``R[i, j, k, l]``: ``e_l`` coefficient of ``R(e_i, e_j) e_k = e_i.(e_j.e_k) - e_j.(e_i.e_k) - [e_i,e_j].e_k``."""
    g = levi_civita(m, algebra).gamma
    c = algebra.structure_constants
    first = np.einsum("jkp,ipl->ijkl", g, g)
    second = np.einsum("ikp,jpl->ijkl", g, g)
    third = np.einsum("ijp,pkl->ijkl", c, g)
    return first - second - third


def lowered_curvature(m: SymmetricForm) -> np.ndarray:
    """``R[i, j, k, l] = <R(e_i, e_j) e_k, e_l>``."""
    return np.einsum("ijkp,pl->ijkl", curvature(m), m.matrix)


@dataclass(frozen=True, eq=False)
class Subalgebra2:
    basis: np.ndarray
    name: str = ""

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.shape != (2, 3):
            raise ValueError("a plane is given by two 3-vectors")
        if np.linalg.matrix_rank(B, tol=RANK_TOL) != 2:
            raise ValueError("basis vectors are linearly dependent")
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.basis[0], self.basis[1])
        return n / np.linalg.norm(n)

    def contains(self, v, tol: float = STABLE_TOL) -> bool:
        v = np.asarray(v, dtype=float)
        return abs(float(self.normal @ v)) <= tol * max(1.0, float(np.linalg.norm(v)))

    def is_subalgebra(self, algebra: LieAlgebra3 = PSH) -> bool:
        return self.contains(algebra.bracket(self.basis[0], self.basis[1]))

    def gram(self, m: SymmetricForm) -> np.ndarray:
        return self.basis @ m.matrix @ self.basis.T

    def orthogonal(self, m: SymmetricForm) -> np.ndarray:
        """Basis (rows) of the m-orthogonal complement, via SVD null space."""
        A = self.basis @ m.matrix
        _, sv, vt = np.linalg.svd(A)
        rank = int(np.sum(sv > RANK_TOL * max(1.0, sv[0])))
        return vt[rank:]

    def is_invariant_plane(self, F: GeodesicField, tol: float = STABLE_TOL) -> bool:
        """``n . F(v) == 0`` identically for ``v`` in the plane."""
        n = self.normal
        restricted = np.einsum("k,kij,ai,bj->ab", n, F.coeffs, self.basis, self.basis)
        return bool(np.max(np.abs(restricted)) <= tol)

    def __str__(self):
        return self.name or f"span{{{self.basis[0].tolist()}, {self.basis[1].tolist()}}}"


F_PLANE = Subalgebra2([[1.0, 0, 0], [0, 1, 0]], "f")
D_PLANE = Subalgebra2([[0.0, 1, 0], [0, 0, 1]], "d")


def f_beta(beta: float) -> Subalgebra2:
    name = "f" if beta == 0 else f"f[beta={beta:g}]"
    return Subalgebra2([[0.0, 1, 0], [1.0, 0, beta]], name)


CHECKS = ("subalgebra", "degenerate_restriction", "product_stable", "null_generator_geodesic")


@dataclass(frozen=True, eq=False)
class KundtReport:
    subalgebra: Subalgebra2
    checks: dict
    metric: Optional[SymmetricForm] = None
    invariant_plane: Optional[bool] = None
    null_generator: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def verdict(self) -> bool:
        return all(self.checks[name] for name in CHECKS)

    def to_dict(self) -> dict:
        out = {
            "subalgebra": str(self.subalgebra),
            "basis": self.subalgebra.basis.tolist(),
            "checks": {name: bool(self.checks[name]) for name in CHECKS},
            "verdict": self.verdict,
        }
        if self.invariant_plane is not None:
            out["invariant_plane"] = bool(self.invariant_plane)
        if self.null_generator is not None:
            out["null_generator"] = [float(c) for c in self.null_generator]
        return out


def is_kundt_pair(m: SymmetricForm, h: Subalgebra2, algebra: LieAlgebra3 = PSH) -> KundtReport:
    prod = levi_civita(m, algebra)
    B = h.basis
    sub = h.is_subalgebra(algebra)
    gram = h.gram(m)
    degenerate = abs(np.linalg.det(gram)) <= GRAM_TOL * max(1.0, float(np.max(np.abs(gram))) ** 2)
    stable = all(h.contains(prod(B[i], B[j])) for i in range(2) for j in range(2))
    perp = h.orthogonal(m)
    null_gen = None
    geodesic = False
    if perp.shape[0] == 1:
        e = perp[0]
        null_gen = e
        geodesic = bool(np.max(np.abs(prod(e, e))) <= STABLE_TOL)
    checks = {
        "subalgebra": bool(sub),
        "degenerate_restriction": bool(degenerate),
        "product_stable": bool(stable),
        "null_generator_geodesic": geodesic,
    }
    return KundtReport(h, checks, m, null_generator=null_gen)


def subalgebra_catalog(betas=None) -> list[Subalgebra2]:
    """``d`` and the family ``f_beta = span{e2, e1 + beta e3}``."""
    if betas is None:
        betas = np.round(np.arange(-20, 21) * 0.1, 12)
    betas = sorted(set(float(b) for b in betas) | {0.0})
    return [D_PLANE] + [f_beta(b) for b in betas]


def kundt_scan(m: SymmetricForm, betas=None, algebra: LieAlgebra3 = PSH) -> list[KundtReport]:
    """Passing Kundt pairs over the catalog, each cross-checked against the geodesic field."""
    F = build_field(m, algebra=algebra)
    passing = []
    for h in subalgebra_catalog(betas):
        report = is_kundt_pair(m, h, algebra)
        if report.verdict:
            passing.append(KundtReport(h, report.checks, m, h.is_invariant_plane(F),
                                       report.null_generator))
    return passing


def scan_all(m: SymmetricForm, betas=None, algebra: LieAlgebra3 = PSH) -> list[tuple[KundtReport, bool]]:
    """Every catalog entry with its report and the invariant-plane test for the geodesic field."""
    F = build_field(m, algebra=algebra)
    return [(is_kundt_pair(m, h, algebra), h.is_invariant_plane(F)) for h in subalgebra_catalog(betas)]
