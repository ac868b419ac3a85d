"""Euler-Arnold geodesic fields on psh and their algebraic analysis.

For a form with Gram matrix ``Q`` the geodesic field is

    F(v) = Q^-1 ad_v^T Q v,

a quadratic homogeneous vector field stored as a coefficient tensor
``coeffs[k, i, j]`` (symmetric in ``i, j``) with ``F(v)_k = coeffs[k] : v v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .algebra import PSH, LieAlgebra3
from .metric import NormalFormLabel, SymmetricForm, normal_form_matrix
from .polynomials import Exponent, Polynomial, monomials, rref

__all__ = [
    "GeodesicField",
    "FirstIntegral",
    "SingularRay",
    "RootSearch",
    "UndeterminedRootsError",
    "InvariantPlane",
    "build_field",
    "table_field",
    "evaluate",
    "jacobian",
    "find_idempotents",
    "search_idempotents",
    "find_singular_rays",
    "search_singular_rays",
    "idempotents_multistart",
    "singular_rays_multistart",
    "first_integrals",
    "invariant_plane",
    "polynomial_first_integrals",
]

DEDUP_TOL = 1e-8
ROOT_TOL = 1e-11
MULTISTART_NORM_CAP = 1e4
COORD = ("x", "y", "z")


class UndeterminedRootsError(RuntimeError):
    """Root search could not decide the solution set (continuum or solver failure)."""


@dataclass(frozen=True, eq=False)
class GeodesicField:
    coeffs: np.ndarray
    metric: Optional[SymmetricForm] = None
    label: Optional[NormalFormLabel] = None

    def __post_init__(self):
        T = np.array(self.coeffs, dtype=float)
        if T.shape != (3, 3, 3):
            raise ValueError(f"coefficient tensor must be 3x3x3, got {T.shape}")
        T = 0.5 * (T + T.transpose(0, 2, 1))
        T.setflags(write=False)
        object.__setattr__(self, "coeffs", T)

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.einsum("kij,...i,...j->...k", self.coeffs, v, v)

    def jacobian(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return 2.0 * np.einsum("kij,...i->...kj", self.coeffs, v)

    def components(self) -> list[Polynomial]:
        """The three component polynomials of the field."""
        out = []
        for k in range(3):
            terms: dict[Exponent, float] = {}
            for i in range(3):
                for j in range(3):
                    e = [0, 0, 0]
                    e[i] += 1
                    e[j] += 1
                    key = (e[0], e[1], e[2])
                    terms[key] = terms.get(key, 0.0) + self.coeffs[k, i, j]
            out.append(Polynomial(terms))
        return out

    def describe(self) -> str:
        return "\n".join(f"d{name}/dt = {poly}" for name, poly in zip(COORD, self.components()))


def evaluate(F: GeodesicField, v) -> np.ndarray:
    return F(v)


def jacobian(F: GeodesicField, v) -> np.ndarray:
    return F.jacobian(v)


def build_field(m: SymmetricForm, label: Optional[NormalFormLabel] = None,
                algebra: LieAlgebra3 = PSH) -> GeodesicField:
    """Derive the geodesic field of ``m`` from ``Q^-1 ad_v^T Q v``."""
    Q = m.matrix
    Qinv = np.linalg.inv(Q)
    # (ad_{e_i})_{ml} = c[i, l, m]
    T = np.einsum("kl,ilm,mj->kij", Qinv, algebra.structure_constants, Q)
    return GeodesicField(T, metric=m, label=label)


def _field_from_polys(polys: list[dict[str, float]]) -> np.ndarray:
    index = {"x": 0, "y": 1, "z": 2}
    T = np.zeros((3, 3, 3))
    for k, poly in enumerate(polys):
        for mono, coef in poly.items():
            i, j = index[mono[0]], index[mono[1]]
            if i == j:
                T[k, i, i] += coef
            else:
                T[k, i, j] += 0.5 * coef
                T[k, j, i] += 0.5 * coef
    return T


def table_field(label: NormalFormLabel) -> GeodesicField:
    """Hard-coded geodesic fields of the six normal forms (independent of :func:`build_field`)."""
    tag, p = label.tag, label.parameter
    if tag == "Q1":
        polys = [{"yy": -1, "zz": -p, "yz": -1}, {"xy": 1}, {"xz": 1, "xy": 1 / p}]
    elif tag == "Q2":
        polys = [{"yy": 1, "zz": -p, "yz": 1}, {"xy": 1}, {"xz": 1, "xy": -1 / p}]
    elif tag == "Q3":
        polys = [{"yz": -2, "zz": -1}, {"xy": 1, "xz": 1}, {"xz": 1}]
    elif tag == "Q4":
        polys = [{"yz": 2, "zz": 1}, {"xy": 1, "xz": 1}, {"xz": 1}]
    elif tag == "Q5":
        polys = [{"xx": 1, "xy": 1}, {"xy": 1}, {"yy": -1, "xz": -1, "yz": -1}]
    else:
        polys = [{"xx": 1}, {"xy": -1, "xz": -1, "zz": -1}, {"xx": 1, "xz": 1}]
    bare = label.without_witness()
    return GeodesicField(_field_from_polys(polys), metric=normal_form_matrix(bare), label=bare)


# ---------------------------------------------------------------------------
# first integrals and invariant planes

# (log coordinate, ratio numerator coordinate, coefficient) of ln|u| + coef * w / u
_LOG_INTEGRALS = {
    "Q1": (1, 2, lambda p: -p),
    "Q2": (1, 2, lambda p: p),
    "Q3": (2, 1, lambda p: -1.0),
    "Q4": (2, 1, lambda p: -1.0),
    "Q5": (1, 0, lambda p: -1.0),
    "Q6": (0, 2, lambda p: -1.0),
}


class InvariantPlane(NamedTuple):
    coordinate: int

    @property
    def name(self) -> str:
        return f"{COORD[self.coordinate]}=0"

    @property
    def normal(self) -> np.ndarray:
        return np.eye(3)[self.coordinate]

    def contains(self, v, tol: float = 0.0) -> bool:
        return abs(float(np.asarray(v)[self.coordinate])) <= tol

    def is_invariant_for(self, F: GeodesicField, tol: float = 1e-14) -> bool:
        """The normal component of ``F`` vanishes identically on the plane."""
        k = self.coordinate
        keep = [i for i in range(3) if i != k]
        block = F.coeffs[k][np.ix_(keep, keep)]
        return bool(np.max(np.abs(block)) <= tol)


def invariant_plane(label: NormalFormLabel) -> InvariantPlane:
    plane = InvariantPlane(_LOG_INTEGRALS[label.tag][0])
    if not plane.is_invariant_for(table_field(label)):
        raise AssertionError(f"{plane.name} is not invariant for {label}")
    return plane


@dataclass(frozen=True, eq=False)
class FirstIntegral:
    """Either the energy ``v^T Q v`` or a partial integral ``ln|u| + coef * w/u`` on ``{u != 0}``."""

    kind: str
    matrix: Optional[np.ndarray] = None
    log_index: int = -1
    ratio_index: int = -1
    coefficient: float = 0.0
    name: str = field(default="")

    @classmethod
    def energy(cls, Q, name: str = "energy") -> "FirstIntegral":
        M = np.array(Q, dtype=float)
        M.setflags(write=False)
        return cls("quadratic-energy", matrix=M, name=name)

    @classmethod
    def logarithmic(cls, log_index: int, ratio_index: int, coefficient: float,
                    name: str = "partial_integral") -> "FirstIntegral":
        return cls("logarithmic-partial", log_index=log_index, ratio_index=ratio_index,
                   coefficient=float(coefficient), name=name)

    @property
    def is_partial(self) -> bool:
        return self.kind == "logarithmic-partial"

    def in_domain(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not self.is_partial:
            return np.ones(v.shape[:-1], dtype=bool)
        return v[..., self.log_index] != 0

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not self.is_partial:
            return np.einsum("...i,ij,...j->...", v, self.matrix, v)
        u = v[..., self.log_index]
        w = v[..., self.ratio_index]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.log(np.abs(u)) + self.coefficient * w / u
        return np.where(u != 0, val, np.nan)

    def gradient(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not self.is_partial:
            return 2.0 * v @ self.matrix
        u = v[..., self.log_index]
        w = v[..., self.ratio_index]
        g = np.zeros(v.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            g[..., self.log_index] = 1.0 / u - self.coefficient * w / u**2
            g[..., self.ratio_index] = self.coefficient / u
        return g

    def derivative_along(self, F: GeodesicField, v) -> np.ndarray:
        """``grad h . F`` at ``v``."""
        return np.sum(self.gradient(v) * F(v), axis=-1)

    def formula(self) -> str:
        if not self.is_partial:
            return str(_quadratic_poly(self.matrix))
        u, w, c = COORD[self.log_index], COORD[self.ratio_index], self.coefficient
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else f"{mag:g}*"
        return f"ln|{u}| {sign} {coef}{w}/{u}  on {{{u}!=0}}"


def _quadratic_poly(M) -> Polynomial:
    terms: dict[Exponent, float] = {}
    for i in range(3):
        for j in range(3):
            e = [0, 0, 0]
            e[i] += 1
            e[j] += 1
            key = (e[0], e[1], e[2])
            terms[key] = terms.get(key, 0.0) + M[i, j]
    return Polynomial(terms)


def first_integrals(label: NormalFormLabel) -> list[FirstIntegral]:
    """Energy and the logarithmic partial integral of a normal form."""
    Q = normal_form_matrix(label.without_witness()).matrix
    log_index, ratio_index, coef = _LOG_INTEGRALS[label.tag]
    return [
        FirstIntegral.energy(Q),
        FirstIntegral.logarithmic(log_index, ratio_index, coef(label.parameter)),
    ]


# ---------------------------------------------------------------------------
# idempotents and singular rays

class RootSearch(NamedTuple):
    status: str  # "found" | "none" | "undetermined"
    roots: list


def _quadratic_roots(A: float, B: float, C: float, tol: float = 1e-12) -> Optional[list[float]]:
    """Real roots of ``A t^2 + B t + C``; ``None`` when the polynomial vanishes identically."""
    scale = max(abs(A), abs(B), abs(C))
    if scale == 0.0:
        return None
    A, B, C = A / scale, B / scale, C / scale
    if abs(A) <= tol:
        if abs(B) <= tol:
            return []
        return [-C / B]
    disc = B * B - 4 * A * C
    if disc < -tol:
        return []
    if disc <= tol:
        return [-B / (2 * A)]
    sq = math.sqrt(disc)
    # numerically stable pair
    q = -0.5 * (B + math.copysign(sq, B))
    return sorted([q / A, C / q])


def _dedup(points: list[np.ndarray], tol: float = DEDUP_TOL) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in points:
        if all(np.max(np.abs(p - q)) > tol * max(1.0, np.max(np.abs(q))) for q in out):
            out.append(p)
    return out


def _canonical_direction(w: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Scale a direction so its last non-negligible coordinate equals 1."""
    w = np.asarray(w, dtype=float)
    big = np.max(np.abs(w))
    for k in (2, 1, 0):
        if abs(w[k]) > tol * big:
            out = w / w[k]
            out[np.abs(out) <= tol] = 0.0
            return out
    raise ValueError("zero direction")


def _dedup_lines(dirs: list[np.ndarray], tol: float = DEDUP_TOL) -> list[np.ndarray]:
    return _dedup([_canonical_direction(d) for d in dirs], tol)


def _elimination_idempotents(Q: np.ndarray) -> RootSearch:
    # F(v) = v with p = Qv forces x = 1, p_y = 0 and p_x + z p_z = 0
    Qn = Q / np.max(np.abs(Q))
    m1, m2, m3 = Qn[0]
    m4, m5, m6 = Qn[1, 1], Qn[1, 2], Qn[2, 2]
    big = max(abs(m4), abs(m5))
    if big <= 1e-13:
        return RootSearch("none", [])
    # line m2 + m4 y + m5 z = 0 parametrized as (y, z) = P + t D
    if abs(m4) >= abs(m5):
        P, D = np.array([-m2 / m4, 0.0]), np.array([-m5 / m4, 1.0])
    else:
        P, D = np.array([0.0, -m2 / m5]), np.array([1.0, -m4 / m5])
    # quadratic m1 + m2 y + 2 m3 z + m5 y z + m6 z^2 along the line
    (py, pz), (dy, dz) = P, D
    A = m5 * dy * dz + m6 * dz * dz
    B = m2 * dy + 2 * m3 * dz + m5 * (py * dz + pz * dy) + 2 * m6 * pz * dz
    C = m1 + m2 * py + 2 * m3 * pz + m5 * py * pz + m6 * pz * pz
    ts = _quadratic_roots(A, B, C)
    if ts is None:
        return RootSearch("undetermined", [])
    roots = [np.array([1.0, *(P + t * D)]) for t in ts]
    return RootSearch("found" if roots else "none", _dedup(roots))


def _elimination_singular_rays(Q: np.ndarray) -> RootSearch:
    # F(w) = 0: either Qw is proportional to e1^*, or x = 0 and a binary quadratic vanishes
    Qn = Q / np.max(np.abs(Q))
    m4, m5, m6 = Qn[1, 1], Qn[1, 2], Qn[2, 2]
    dirs = []
    w = np.linalg.solve(Qn, [1.0, 0.0, 0.0])
    if abs(w[0]) > 1e-12 * np.max(np.abs(w)):
        dirs.append(w)
    # m4 y^2 + (m4 + 2 m5) y z + (m5 + m6) z^2 = 0 on x = 0
    A, B, C = m4, m4 + 2 * m5, m5 + m6
    ts = _quadratic_roots(C, B, A)  # in t = z / y
    if ts is None:
        return RootSearch("undetermined", [])
    dirs.extend(np.array([0.0, 1.0, t]) for t in ts)
    if abs(C) <= 1e-12 * max(abs(A), abs(B), abs(C)):
        dirs.append(np.array([0.0, 0.0, 1.0]))  # root at y = 0
    return RootSearch("found" if dirs else "none", _dedup_lines(dirs))


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


def idempotents_multistart(F: GeodesicField, n_starts: int = 64,
                           radii=(0.25, 1.0, 4.0), max_iter: int = 60) -> RootSearch:
    """Newton on ``F(v) - v`` from a sphere/radius grid of starts."""
    found = []
    eye = np.eye(3)
    for r in radii:
        for s in _fibonacci_sphere(n_starts):
            v = r * s
            for _ in range(max_iter):
                G = F(v) - v
                try:
                    step = np.linalg.solve(F.jacobian(v) - eye, G)
                except np.linalg.LinAlgError:
                    break
                v = v - step
                if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > 1e8:
                    break
                if np.max(np.abs(step)) <= 1e-15 * max(1.0, np.max(np.abs(v))):
                    break
            # absolute residual and a norm cap: rejects spurious roots at infinity
            if (np.all(np.isfinite(v)) and 1e-6 < np.linalg.norm(v) <= MULTISTART_NORM_CAP
                    and np.max(np.abs(F(v) - v)) <= ROOT_TOL):
                found.append(v)
    roots = _dedup(found)
    # an empty multistart is never proof of absence
    return RootSearch("found" if roots else "undetermined", roots)


def singular_rays_multistart(F: GeodesicField, n_starts: int = 64, max_iter: int = 60) -> RootSearch:
    """Gauss-Newton on ``(F(w), s.w - 1)`` for start directions ``s`` on the sphere."""
    found = []
    for s in _fibonacci_sphere(n_starts):
        w = s.copy()
        for _ in range(max_iter):
            G = np.append(F(w), s @ w - 1.0)
            J = np.vstack([F.jacobian(w), s])
            step = np.linalg.lstsq(J, G, rcond=None)[0]
            w = w - step
            if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 1e8:
                break
            if np.max(np.abs(step)) <= 1e-15 * max(1.0, np.max(np.abs(w))):
                break
        if np.all(np.isfinite(w)) and np.linalg.norm(w) > 1e-8:
            u = w / np.linalg.norm(w)
            if np.max(np.abs(F(u))) <= ROOT_TOL:
                found.append(u)
    rays = _dedup_lines(found)
    return RootSearch("found" if rays else "undetermined", rays)


def search_idempotents(F: GeodesicField) -> RootSearch:
    """All idempotents ``F(v) = v, v != 0`` with an explicit status."""
    if F.metric is not None:
        result = _elimination_idempotents(F.metric.matrix)
        checked = [v for v in result.roots
                   if np.max(np.abs(F(v) - v)) <= 1e-9 * max(1.0, np.dot(v, v))]
        if len(checked) != len(result.roots):
            return RootSearch("undetermined", checked)
        return result
    return idempotents_multistart(F)


def find_idempotents(F: GeodesicField) -> list[np.ndarray]:
    result = search_idempotents(F)
    if result.status == "undetermined":
        raise UndeterminedRootsError("idempotent search undetermined")
    return result.roots


@dataclass(frozen=True, eq=False)
class SingularRay:
    """A line ``mu * direction`` of zeros of ``F`` with its linearization profile."""

    direction: np.ndarray
    unit_eigenvalues: np.ndarray

    def eigenvalues(self, mu: float) -> np.ndarray:
        """Eigenvalues of ``D_{mu w} F``; the Jacobian is linear in the base point."""
        return mu * self.unit_eigenvalues


def search_singular_rays(F: GeodesicField) -> RootSearch:
    if F.metric is not None:
        result = _elimination_singular_rays(F.metric.matrix)
        checked = [w for w in result.roots if np.max(np.abs(F(w))) <= 1e-12 * np.dot(w, w)]
        if len(checked) != len(result.roots):
            return RootSearch("undetermined", checked)
    else:
        result = singular_rays_multistart(F)
    rays = [SingularRay(w, np.linalg.eigvals(F.jacobian(w))) for w in result.roots]
    return RootSearch(result.status, rays)


def find_singular_rays(F: GeodesicField) -> list[SingularRay]:
    result = search_singular_rays(F)
    if result.status == "undetermined":
        raise UndeterminedRootsError("singular ray search undetermined")
    return result.roots


# ---------------------------------------------------------------------------
# polynomial first integrals

def polynomial_first_integrals(F: GeodesicField, max_degree: int,
                               tol: float = 1e-10) -> list[Polynomial]:
    """Basis of ``{p : grad p . F == 0, deg p <= max_degree}``, in reduced echelon form."""
    if max_degree < 0 or max_degree > 4:
        raise ValueError("max_degree must be between 0 and 4")
    basis = monomials(max_degree)
    image = monomials(max_degree + 1)
    row = {e: i for i, e in enumerate(image)}
    comps = F.components()
    L = np.zeros((len(image), len(basis)))
    for col, e in enumerate(basis):
        lie = Polynomial({})
        mono = Polynomial({e: 1.0})
        for var in range(3):
            lie = lie + mono.derivative(var) * comps[var]
        for ex, c in lie.terms.items():
            L[row[ex], col] += c
    _, sv, vt = np.linalg.svd(L)
    rank = int(np.sum(sv > tol * max(1.0, sv[0] if sv.size else 1.0)))
    null = vt[rank:]
    if null.shape[0] == 0:
        return []
    reduced = rref(null, tol=tol)
    return [Polynomial.from_vector(r, basis, tol=tol) for r in reduced]


def span_contains(polys: list[Polynomial], target: Polynomial, tol: float = 1e-9) -> bool:
    """Whether ``target`` lies in the linear span of ``polys``."""
    deg = max([target.degree] + [p.degree for p in polys])
    basis = monomials(deg)
    t = target.to_vector(basis)
    if not polys:
        return bool(np.max(np.abs(t)) <= tol)
    A = np.stack([p.to_vector(basis) for p in polys], axis=1)
    coef = np.linalg.lstsq(A, t, rcond=None)[0]
    return bool(np.max(np.abs(A @ coef - t)) <= tol * max(1.0, np.max(np.abs(t))))
