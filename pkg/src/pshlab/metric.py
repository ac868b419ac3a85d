"""Non-degenerate symmetric bilinear forms on psh and their normal forms.

Up to automorphisms and nonzero scaling every form is one of

    Q1(r) = diag(1, 1, r)                Q2(s) = diag(1, -1, s)
    Q3 = [[1,0,0],[0,0,1],[0,1,0]]       Q4 = [[1,0,0],[0,0,-1],[0,-1,0]]
    Q5 = [[0,0,1],[0,1,0],[1,0,0]]       Q6 = [[0,1,0],[1,0,0],[0,0,1]]

:func:`classify` finds the normal form together with an explicit witness
``(phi, lam)`` such that ``lam * phi.T @ Q @ phi`` equals the normal form.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .algebra import Automorphism

__all__ = [
    "DegenerateFormError",
    "ClassificationError",
    "InvalidParameterError",
    "SymmetricForm",
    "Signature",
    "NormalFormLabel",
    "TAGS",
    "signature",
    "act",
    "restriction_to_derived",
    "classify",
    "normal_form_matrix",
    "parse_metric",
    "parse_label",
]

TAGS = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6")
PARAMETRIC = ("Q1", "Q2")

DEGENERACY_RTOL = 1e-12
SYMMETRY_TOL = 1e-12
# decision thresholds on the inf-norm-normalized matrix
BRANCH_TOL = 1e-11
WITNESS_TOL = 1e-8


class DegenerateFormError(ValueError):
    pass


class ClassificationError(RuntimeError):
    pass


class InvalidParameterError(ValueError):
    pass


def _check_nondegenerate(Q: np.ndarray) -> None:
    norm = float(np.max(np.abs(Q)))
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateFormError("form is zero or not finite")
    eig = np.linalg.eigvalsh(Q)
    if np.min(np.abs(eig)) < DEGENERACY_RTOL * np.max(np.abs(eig)):
        raise DegenerateFormError(f"form is degenerate (eigenvalues {eig})")


@dataclass(frozen=True)
class SymmetricForm:
    """Non-degenerate symmetric form, stored as its 3x3 Gram matrix in the basis e1, e2, e3."""

    matrix: np.ndarray

    def __post_init__(self):
        Q = np.array(self.matrix, dtype=float)
        if Q.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {Q.shape}")
        if not np.array_equal(Q, Q.T):
            raise ValueError("matrix is not symmetric")
        _check_nondegenerate(Q)
        Q.setflags(write=False)
        object.__setattr__(self, "matrix", Q)

    @classmethod
    def from_entries(cls, m1, m2, m3, m4, m5, m6) -> "SymmetricForm":
        return cls(np.array([[m1, m2, m3], [m2, m4, m5], [m3, m5, m6]], dtype=float))

    @classmethod
    def from_matrix(cls, M, tol: float = SYMMETRY_TOL) -> "SymmetricForm":
        """Accept a nearly symmetric matrix (to ``tol``) and symmetrize it."""
        M = np.asarray(M, dtype=float)
        if M.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {M.shape}")
        if np.max(np.abs(M - M.T)) > tol:
            raise ValueError("matrix is not symmetric")
        return cls(0.5 * (M + M.T))

    @property
    def entries(self) -> tuple[float, ...]:
        Q = self.matrix
        return (Q[0, 0], Q[0, 1], Q[0, 2], Q[1, 1], Q[1, 2], Q[2, 2])

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def __call__(self, u, v) -> float:
        return float(np.asarray(u, dtype=float) @ self.matrix @ np.asarray(v, dtype=float))

    def scaled(self, lam: float) -> "SymmetricForm":
        return SymmetricForm(lam * self.matrix)

    def __eq__(self, other):
        if not isinstance(other, SymmetricForm):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


class Signature(NamedTuple):
    positive: int
    negative: int

    @property
    def is_riemannian(self) -> bool:
        return self.negative == 0 or self.positive == 0

    @property
    def is_lorentzian(self) -> bool:
        return not self.is_riemannian


def signature(m: SymmetricForm) -> Signature:
    Q = m.matrix if isinstance(m, SymmetricForm) else np.asarray(m, dtype=float)
    eig = np.linalg.eigvalsh(Q)
    if np.min(np.abs(eig)) < DEGENERACY_RTOL * np.max(np.abs(eig)):
        raise DegenerateFormError(f"form is degenerate (eigenvalues {eig})")
    pos = int(np.sum(eig > 0))
    return Signature(pos, 3 - pos)


def act(phi: Union[Automorphism, np.ndarray], m: SymmetricForm) -> SymmetricForm:
    """Push ``m`` forward by ``phi``: ``(phi.m)(u, v) = m(phi^-1 u, phi^-1 v)``."""
    if isinstance(phi, Automorphism):
        inv = phi.inverse().matrix
    else:
        inv = np.linalg.inv(np.asarray(phi, dtype=float))
    Q = inv.T @ m.matrix @ inv
    return SymmetricForm(0.5 * (Q + Q.T))


def restriction_to_derived(m: SymmetricForm) -> tuple[float, float]:
    """Determinant of ``m`` on span{e2, e3} and the value ``m(e2, e2)``."""
    _, _, _, m4, m5, m6 = m.entries
    return m4 * m6 - m5 * m5, m4


@dataclass(frozen=True)
class NormalFormLabel:
    """Normal-form tag, its parameter and (when classified) the reducing witness."""

    tag: str
    parameter: Optional[float] = None
    automorphism: Optional[Automorphism] = field(default=None, compare=False)
    scale: Optional[float] = field(default=None, compare=False)
    residual: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise InvalidParameterError(f"unknown normal form {self.tag!r}")
        if self.tag in PARAMETRIC:
            if self.parameter is None or self.parameter == 0 or not math.isfinite(self.parameter):
                raise InvalidParameterError(f"{self.tag} needs a finite nonzero parameter")
            object.__setattr__(self, "parameter", float(self.parameter))
        elif self.parameter is not None:
            raise InvalidParameterError(f"{self.tag} takes no parameter")

    @classmethod
    def Q1(cls, r: float) -> "NormalFormLabel":
        return cls("Q1", r)

    @classmethod
    def Q2(cls, s: float) -> "NormalFormLabel":
        return cls("Q2", s)

    @property
    def has_witness(self) -> bool:
        return self.automorphism is not None

    @property
    def key(self) -> str:
        """Command-line spelling, e.g. ``Q2:1`` or ``Q5``."""
        if self.parameter is None:
            return self.tag
        return f"{self.tag}:{self.parameter:.17g}"

    def without_witness(self) -> "NormalFormLabel":
        return NormalFormLabel(self.tag, self.parameter)

    def __str__(self):
        if self.parameter is None:
            return self.tag
        return f"{self.tag}({self.parameter:g})"


def normal_form_matrix(label: NormalFormLabel) -> SymmetricForm:
    tag, p = label.tag, label.parameter
    if tag in PARAMETRIC and not p:
        raise InvalidParameterError(f"{tag} needs a nonzero parameter")
    if tag == "Q1":
        M = np.diag([1.0, 1.0, p])
    elif tag == "Q2":
        M = np.diag([1.0, -1.0, p])
    elif tag == "Q3":
        M = np.array([[1.0, 0, 0], [0, 0, 1], [0, 1, 0]])
    elif tag == "Q4":
        M = np.array([[1.0, 0, 0], [0, 0, -1], [0, -1, 0]])
    elif tag == "Q5":
        M = np.array([[0.0, 0, 1], [0, 1, 0], [1, 0, 0]])
    else:
        M = np.array([[0.0, 1, 0], [1, 0, 0], [0, 0, 1]])
    return SymmetricForm(M)


def _reduce(Q: np.ndarray) -> tuple[str, Automorphism, float]:
    """Pick (tag, phi, lam) for a normalized Gram matrix; see module docstring."""
    m1, m2, m3 = Q[0, 0], Q[0, 1], Q[0, 2]
    m4, m5, m6 = Q[1, 1], Q[1, 2], Q[2, 2]
    det_d = m4 * m6 - m5 * m5
    e2_null = abs(m4) <= BRANCH_TOL

    if abs(det_d) > BRANCH_TOL:
        # shear e1 -> e1 + a e2 + b e3 into the orthogonal complement of the derived algebra
        B = np.array([[m4, m5], [m5, m6]])
        a, b = -np.linalg.solve(B, [m2, m3])
        m1p = m1 + a * m2 + b * m3
        lam = 1.0 / m1p
        if not e2_null:
            c = math.sqrt(abs(m1p / m4))
            d = -c * m5 / m4
            tag = "Q1" if lam * m4 > 0 else "Q2"
        else:
            c = math.sqrt(abs(m1p / m5))
            d = -c * m6 / (2.0 * m5)
            tag = "Q3" if lam * m5 > 0 else "Q4"
        return tag, Automorphism(a=a, b=b, c=c, d=d), lam

    if not e2_null:
        # radical of m on the derived algebra is n = e3 - (m5/m4) e2
        mu = m3 - m5 * m2 / m4
        kappa = m1 - m2 * m2 / m4
        b = -kappa / (2.0 * mu)
        a = -m2 / m4 - b * m5 / m4
        c = mu / m4
        d = -c * m5 / m4
        return "Q5", Automorphism(a=a, b=b, c=c, d=d), m4 / (mu * mu)

    a = -m1 / (2.0 * m2)
    c = m2 / m6
    d = -c * m3 / m2
    return "Q6", Automorphism(a=a, b=0.0, c=c, d=d), m6 / (m2 * m2)


def classify(m: SymmetricForm) -> NormalFormLabel:
    """Normal form of ``m`` with a verified witness.

    Raises :class:`ClassificationError` if the witness equation fails to hold
    to ``WITNESS_TOL`` (relative to the normal form's size).
    """
    if not isinstance(m, SymmetricForm):
        m = SymmetricForm.from_matrix(m)
    norm = float(np.max(np.abs(m.matrix)))
    Qn = m.matrix / norm
    tag, phi, lam_n = _reduce(Qn)
    P = phi.matrix
    N = lam_n * (P.T @ Qn @ P)
    param = float(N[2, 2]) if tag in PARAMETRIC else None
    if param is not None and param == 0.0:
        raise ClassificationError("reduced parameter vanished")
    target = normal_form_matrix(NormalFormLabel(tag, param)).matrix
    residual = float(np.max(np.abs(N - target)))
    if not np.isfinite(residual) or residual > WITNESS_TOL * max(1.0, float(np.max(np.abs(target)))):
        raise ClassificationError(f"witness residual {residual:.3e} for {tag}")
    return NormalFormLabel(tag, param, automorphism=phi, scale=lam_n / norm, residual=residual)


_LABEL_RE = re.compile(r"^\s*(Q[1-6])\s*(?:[:(]\s*([^)\s]+)\s*\)?)?\s*$", re.IGNORECASE)


def parse_label(text: str) -> NormalFormLabel:
    """Parse ``Q1:<r> | Q2:<s> | Q3 | Q4 | Q5 | Q6`` (``Q1(r)`` also accepted)."""
    match = _LABEL_RE.match(text)
    if not match:
        raise InvalidParameterError(f"cannot parse label {text!r}; expected e.g. Q1:2, Q2:-1, Q3")
    tag = match.group(1).upper()
    raw = match.group(2)
    param = None
    if raw is not None:
        try:
            param = float(raw)
        except ValueError as exc:
            raise InvalidParameterError(f"bad parameter in label {text!r}") from exc
    return NormalFormLabel(tag, param)


def parse_metric(text: str) -> SymmetricForm:
    """Parse ``"m1 m2 m3 m4 m5 m6"`` or a row-major 9-tuple (commas allowed)."""
    tokens = [t for t in re.split(r"[\s,;]+", text.strip()) if t]
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise ValueError(f"cannot parse metric {text!r}") from exc
    if len(values) == 6:
        return SymmetricForm.from_entries(*values)
    if len(values) == 9:
        return SymmetricForm.from_matrix(np.array(values).reshape(3, 3))
    raise ValueError(f"metric needs 6 or 9 numbers, got {len(values)}")
