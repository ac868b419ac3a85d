"""The pseudo-homothetic Lie algebra psh, its automorphisms and its matrix group.

Basis ``e1, e2, e3`` with

    [e1, e2] = e2,   [e1, e3] = e2 + e3,   [e2, e3] = 0.

Vectors are plain length-3 float arrays of coordinates in this basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

__all__ = [
    "LieAlgebra3",
    "PSH",
    "Automorphism",
    "GroupElement",
    "InternalConsistencyError",
    "bracket",
    "ad_matrix",
    "is_automorphism",
    "matrix_realization",
    "verify_matrix_realization",
    "group_multiply",
]

AUTOMORPHISM_TOL = 1e-10


class InternalConsistencyError(RuntimeError):
    """Raised when a computed object leaves the shape it is known to have."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LieAlgebra3:
    """A 3-dimensional real Lie algebra given by structure constants.

    ``structure_constants[i, j, k]`` is the ``e_k`` coefficient of ``[e_i, e_j]``.
    Arbitrary constants are accepted so that perturbed algebras can be fed to
    the Jacobi check.
    """

    structure_constants: np.ndarray

    def __post_init__(self):
        c = _frozen(self.structure_constants)
        if c.shape != (3, 3, 3):
            raise ValueError(f"structure constants must have shape (3, 3, 3), got {c.shape}")
        object.__setattr__(self, "structure_constants", c)

    @classmethod
    def psh(cls) -> "LieAlgebra3":
        c = np.zeros((3, 3, 3))
        c[0, 1, 1] = 1.0  # [e1, e2] = e2
        c[0, 2, 1] = 1.0  # [e1, e3] = e2 + e3
        c[0, 2, 2] = 1.0
        return cls(c - c.transpose(1, 0, 2))

    def bracket(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.einsum("i,j,ijk->k", u, v, self.structure_constants)

    def ad_matrix(self, v) -> np.ndarray:
        """Matrix of ``ad_v``; column ``j`` is ``[v, e_j]``."""
        v = np.asarray(v, dtype=float)
        return np.einsum("i,ijk->kj", v, self.structure_constants)

    def antisymmetry_residual(self) -> float:
        c = self.structure_constants
        return float(np.max(np.abs(c + c.transpose(1, 0, 2))))

    def jacobi_residual(self, u=None, v=None, w=None) -> float:
        """Max-norm of the cyclic Jacobi sum; on the basis triples by default."""
        if u is None:
            eye = np.eye(3)
            return max(self.jacobi_residual(eye[i], eye[j], eye[k])
                       for i, j, k in product(range(3), repeat=3))
        br = self.bracket
        total = br(u, br(v, w)) + br(v, br(w, u)) + br(w, br(u, v))
        return float(np.max(np.abs(total)))

    def is_automorphism(self, M, tol: float = AUTOMORPHISM_TOL) -> bool:
        """True iff ``M`` is invertible and ``M[u, v] = [Mu, Mv]`` on basis pairs."""
        M = np.asarray(M, dtype=float)
        if M.shape != (3, 3) or not np.all(np.isfinite(M)):
            return False
        if abs(np.linalg.det(M)) <= tol:
            return False
        eye = np.eye(3)
        for i, j in product(range(3), repeat=2):
            lhs = self.bracket(M @ eye[i], M @ eye[j])
            rhs = M @ self.bracket(eye[i], eye[j])
            if np.max(np.abs(lhs - rhs)) > tol:
                return False
        return True


PSH = LieAlgebra3.psh()


def bracket(u, v) -> np.ndarray:
    return PSH.bracket(u, v)


def ad_matrix(v) -> np.ndarray:
    return PSH.ad_matrix(v)


def is_automorphism(M, tol: float = AUTOMORPHISM_TOL) -> bool:
    return PSH.is_automorphism(M, tol)


@dataclass(frozen=True)
class Automorphism:
    """Element ``[[1,0,0],[a,c,d],[b,0,c]]`` (``c != 0``) of Aut(psh)."""

    a: float = 0.0
    b: float = 0.0
    c: float = 1.0
    d: float = 0.0
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.c == 0 or not np.isfinite(self.c):
            raise ValueError("automorphism parameter c must be a nonzero finite number")
        object.__setattr__(
            self, "matrix",
            _frozen([[1.0, 0.0, 0.0], [self.a, self.c, self.d], [self.b, 0.0, self.c]]),
        )

    @classmethod
    def identity(cls) -> "Automorphism":
        return cls()

    @classmethod
    def from_matrix(cls, M, tol: float = AUTOMORPHISM_TOL) -> "Automorphism":
        M = np.asarray(M, dtype=float)
        pattern = np.array([[M[0, 0] - 1, M[0, 1], M[0, 2]],
                            [0, 0, 0],
                            [0, M[2, 1], M[2, 2] - M[1, 1]]])
        if np.max(np.abs(pattern)) > tol:
            raise ValueError("matrix is not of the form [[1,0,0],[a,c,d],[b,0,c]]")
        return cls(a=M[1, 0], b=M[2, 0], c=M[1, 1], d=M[1, 2])

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 2.0,
               c_range: tuple[float, float] = (0.5, 2.0)) -> "Automorphism":
        a, b, d = rng.uniform(-scale, scale, size=3)
        c = rng.uniform(*c_range) * rng.choice([-1.0, 1.0])
        return cls(a=a, b=b, c=c, d=d)

    def inverse(self) -> "Automorphism":
        a, b, c, d = self.a, self.b, self.c, self.d
        return Automorphism(a=(d * b - a * c) / c**2, b=-b / c, c=1.0 / c, d=-d / c**2)

    def compose(self, other: "Automorphism") -> "Automorphism":
        """``self @ other`` as an automorphism."""
        return Automorphism.from_matrix(self.matrix @ other.matrix)

    def __matmul__(self, other):
        if isinstance(other, Automorphism):
            return self.compose(other)
        return self.matrix @ np.asarray(other, dtype=float)

    def __call__(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)


# Matrix realization of psh: [E1, E2] = E2, [E1, E3] = E2 + E3, [E2, E3] = 0.
_E1 = np.array([[0.0, 0, 0], [0, 1, 1], [0, 0, 1]])
_E2 = np.array([[0.0, 0, 0], [-1, 0, 0], [0, 0, 0]])
_E3 = np.array([[0.0, 0, 0], [-1, 0, 0], [-1, 0, 0]])


def matrix_realization() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return _E1.copy(), _E2.copy(), _E3.copy()


def verify_matrix_realization(algebra: LieAlgebra3 = PSH, tol: float = 1e-14) -> bool:
    """Check that matrix commutators of E1, E2, E3 reproduce the structure constants."""
    E = matrix_realization()
    for i, j in product(range(3), repeat=2):
        comm = E[i] @ E[j] - E[j] @ E[i]
        coeffs = algebra.structure_constants[i, j]
        expected = sum(coeffs[k] * E[k] for k in range(3))
        if np.max(np.abs(comm - expected)) > tol:
            return False
    return True


@dataclass(frozen=True)
class GroupElement:
    """Point ``(x1, x2, x3)`` of the matrix group model of Psh."""

    x1: float
    x2: float
    x3: float

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    @property
    def matrix(self) -> np.ndarray:
        x1, x2, x3 = self.x1, self.x2, self.x3
        ex = np.exp(x1)
        return np.array([[1.0, 0.0, 0.0],
                         [-x2 - x3, ex, x1 * ex],
                         [-x3, 0.0, ex]])

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, P, tol: float = 1e-9) -> "GroupElement":
        P = np.asarray(P, dtype=float)
        if P.shape != (3, 3) or P[1, 1] <= 0:
            raise InternalConsistencyError(f"not a group matrix:\n{P}")
        x1 = float(np.log(P[1, 1]))
        x3 = float(-P[2, 0])
        x2 = float(-P[1, 0] - x3)
        g = cls(x1, x2, x3)
        scale = max(1.0, float(np.max(np.abs(P))))
        if np.max(np.abs(g.matrix - P)) > tol * scale:
            raise InternalConsistencyError(f"matrix leaves the group model:\n{P}")
        return g

    def inverse(self) -> "GroupElement":
        return GroupElement.from_matrix(np.linalg.inv(self.matrix))

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return group_multiply(self, other)


def group_multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement.from_matrix(g.matrix @ h.matrix)
