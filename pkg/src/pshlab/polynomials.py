"""Small dense polynomial toolkit in three variables (x, y, z)."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Mapping

import numpy as np

VARS = ("x", "y", "z")

Exponent = tuple[int, int, int]


def monomials(max_degree: int) -> list[Exponent]:
    """Exponents of degree <= max_degree in graded lexicographic order.

    Within a degree, x > y > z: ``1, x, y, z, x^2, xy, xz, y^2, yz, z^2, ...``
    """
    out: list[Exponent] = []
    for deg in range(max_degree + 1):
        for combo in combinations_with_replacement(range(3), deg):
            e = [0, 0, 0]
            for var in combo:
                e[var] += 1
            out.append((e[0], e[1], e[2]))
    return out


def _fmt_monomial(e: Exponent) -> str:
    parts = []
    for name, k in zip(VARS, e):
        if k == 1:
            parts.append(name)
        elif k > 1:
            parts.append(f"{name}^{k}")
    return "".join(parts)


@dataclass(frozen=True)
class Polynomial:
    terms: Mapping[Exponent, float]

    def __post_init__(self):
        clean = {tuple(int(k) for k in e): float(c) for e, c in self.terms.items() if c != 0}
        object.__setattr__(self, "terms", clean)

    @classmethod
    def from_vector(cls, coeffs, basis: list[Exponent], tol: float = 0.0) -> "Polynomial":
        return cls({e: c for e, c in zip(basis, coeffs) if abs(c) > tol})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def to_vector(self, basis: list[Exponent]) -> np.ndarray:
        index = {e: i for i, e in enumerate(basis)}
        vec = np.zeros(len(basis))
        for e, c in self.terms.items():
            if e not in index:
                raise ValueError(f"monomial {e} outside basis")
            vec[index[e]] = c
        return vec

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        x, y, z = v[..., 0], v[..., 1], v[..., 2]
        total = np.zeros(np.shape(x))
        for (a, b, c), coef in self.terms.items():
            total = total + coef * x**a * y**b * z**c
        return total

    def gradient(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.stack([self.derivative(i)(v) for i in range(3)], axis=-1)

    def derivative(self, var: int) -> "Polynomial":
        out: dict[Exponent, float] = {}
        for e, c in self.terms.items():
            if e[var]:
                d = list(e)
                d[var] -= 1
                key = (d[0], d[1], d[2])
                out[key] = out.get(key, 0.0) + c * e[var]
        return Polynomial(out)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict[Exponent, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2])
                out[key] = out.get(key, 0.0) + c1 * c2
        return Polynomial(out)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(out)

    def __str__(self):
        if not self.terms:
            return "0"
        order = {e: i for i, e in enumerate(monomials(self.degree))}
        pieces = []
        for e in sorted(self.terms, key=order.__getitem__):
            c = self.terms[e]
            mono = _fmt_monomial(e)
            mag = abs(c)
            if abs(mag - round(mag)) <= 1e-12 * max(1.0, mag):
                mag = float(round(mag))
            body = f"{mag:g}" if not mono else (mono if mag == 1 else f"{mag:g}{mono}")
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first = pieces[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text


def rref(rows: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Reduced row echelon form with partial pivoting (columns scanned left to right)."""
    A = np.array(rows, dtype=float)
    n_rows, n_cols = A.shape
    r = 0
    for col in range(n_cols):
        if r == n_rows:
            break
        piv = r + int(np.argmax(np.abs(A[r:, col])))
        if abs(A[piv, col]) <= tol:
            A[r:, col] = 0.0
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r] /= A[r, col]
        for i in range(n_rows):
            if i != r:
                A[i] -= A[i, col] * A[r]
        r += 1
    A = A[:r]
    A[np.abs(A) <= tol] = 0.0
    return A
