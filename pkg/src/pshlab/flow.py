"""Integration of geodesic fields, blow-up certificates and completeness verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .euler_arnold import (
    FirstIntegral,
    GeodesicField,
    first_integrals,
    invariant_plane,
    search_idempotents,
    table_field,
)
from .metric import NormalFormLabel, classify, normal_form_matrix, signature

__all__ = [
    "IntegratorConfig",
    "Status",
    "Trajectory",
    "IntegrationFailure",
    "BlowUpCertificate",
    "Refusal",
    "CompletenessVerdict",
    "UnsupportedLabelError",
    "UNBOUNDED_PLANE",
    "integrate",
    "riccati_escape_bound",
    "certify_blowup",
    "level_set_bound",
    "symmetry_reduce",
    "completeness_verdict",
    "VERDICT_TABLE",
]

UNBOUNDED_PLANE = "unbounded-plane"
CHUNK = 200_000
RAY_TOL = 1e-9


class IntegrationFailure(RuntimeError):
    def __init__(self, message, last_time, last_state):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class UnsupportedLabelError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-12
    atol: float = 1e-14
    t_max: float = 1e3
    threshold: float = 1e8
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not self.threshold > 1:
            raise ValueError("blow-up threshold must exceed 1")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


class Status(str, Enum):
    REACHED_TIME_BOUND = "ReachedTimeBound"
    BLOWUP_CERTIFIED = "BlowUpCertified"
    THRESHOLD_CROSSED = "ThresholdCrossed"
    STEP_LIMIT = "StepLimit"


@dataclass(frozen=True)
class BlowUpCertificate:
    """An analytic reason why the orbit leaves every compact set in finite time.

    ``escape_upper_bound`` is an absolute time (same clock as the trajectory).
    """

    mechanism: str  # "idempotent-ray" | "riccati"
    anchor_time: float
    escape_upper_bound: float
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Refusal:
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    status: Status
    config: IntegratorConfig
    drifts: dict = field(default_factory=dict)
    monitors: tuple = ()
    escape_estimate: Optional[float] = None
    escape_interval: Optional[tuple[float, float]] = None
    certificate: Optional[BlowUpCertificate] = None
    crossed_threshold: bool = False

    @property
    def v0(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def max_norm(self) -> float:
        return float(np.max(self.norms))

    def monitor_values(self) -> dict[str, np.ndarray]:
        return {m.name: m(self.states) for m in self.monitors}

    def summary(self) -> dict:
        out = {
            "status": self.status.value,
            "t_final": float(self.t[-1]),
            "n_samples": int(self.t.size),
            "v0": [float(c) for c in self.v0],
            "final_state": [float(c) for c in self.final],
            "max_norm": self.max_norm,
            "drifts": {k: (None if v is None else float(v)) for k, v in self.drifts.items()},
            "escape_estimate": self.escape_estimate,
            "escape_interval": None if self.escape_interval is None else list(self.escape_interval),
        }
        if self.certificate is not None:
            out["certificate"] = {
                "mechanism": self.certificate.mechanism,
                "anchor_time": self.certificate.anchor_time,
                "escape_upper_bound": self.certificate.escape_upper_bound,
                "detail": self.certificate.detail,
            }
        return out


def _default_monitors(F: GeodesicField) -> list[FirstIntegral]:
    if F.label is not None:
        return first_integrals(F.label)
    if F.metric is not None:
        return [FirstIntegral.energy(F.metric.matrix)]
    return []


def _drift(monitor: FirstIntegral, states: np.ndarray) -> Optional[float]:
    values = monitor(states)
    mask = monitor.in_domain(states)
    if not mask[0]:
        return None
    return float(np.max(np.abs(values[mask] - values[0])))


def _extrapolate_escape(t: np.ndarray, states: np.ndarray) -> tuple[float, float]:
    """Extrapolate ``1/|v|`` linearly to zero from the last two and last-but-one pairs."""
    g = 1.0 / np.linalg.norm(states[-3:], axis=1)
    tt = t[-3:]
    roots = []
    for (ta, ga), (tb, gb) in zip(zip(tt[:-1], g[:-1]), zip(tt[1:], g[1:])):
        slope = (gb - ga) / (tb - ta)
        roots.append(tb - gb / slope if slope < 0 else math.inf)
    latest, previous = roots[-1], roots[0]
    spread = abs(latest - previous) if math.isfinite(previous) else abs(latest - tt[-1])
    return latest, spread


def integrate(F: GeodesicField, v0, cfg: Optional[IntegratorConfig] = None,
              monitors: Optional[Sequence[FirstIntegral]] = None,
              certify: bool = True) -> Trajectory:
    """Adaptive DOP853 integration of ``dv/dt = F(v)`` from ``v0``.

    Stops at ``cfg.t_max``, when ``|v|`` exceeds ``cfg.threshold`` or after
    ``cfg.max_steps`` accepted steps. A threshold crossing becomes
    ``BlowUpCertified`` only when :func:`certify_blowup` produces a certificate.
    """
    cfg = cfg or IntegratorConfig()
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (3,) or not np.all(np.isfinite(v0)):
        raise ValueError("v0 must be a finite 3-vector")
    monitors = list(_default_monitors(F) if monitors is None else monitors)

    t_parts, y_parts = [], []
    t0, y0, h = 0.0, v0, 0.0
    remaining = cfg.max_steps
    while True:
        capacity = min(CHUNK, remaining) + 1
        ts, ys, code, h = _kernels.run(F.coeffs, t0, y0, cfg.t_max, cfg.rtol, cfg.atol,
                                       cfg.threshold, capacity, h)
        t_parts.append(ts if not t_parts else ts[1:])
        y_parts.append(ys if not y_parts else ys[1:])
        remaining -= ts.size - 1
        if code != _kernels.BUFFER_FULL or remaining <= 0:
            break
        t0, y0 = ts[-1], ys[-1]
    t = np.concatenate(t_parts)
    states = np.concatenate(y_parts)

    if code == _kernels.NONFINITE:
        raise IntegrationFailure(f"non-finite state at t={t[-1]!r}", t[-2], states[-2])

    crossed = False
    if code == _kernels.REACHED_END:
        status = Status.REACHED_TIME_BOUND
    elif code == _kernels.CROSSED_THRESHOLD:
        status, crossed = Status.THRESHOLD_CROSSED, True
    elif code == _kernels.STEP_TOO_SMALL and np.linalg.norm(states[-1]) ** 2 > cfg.threshold:
        # step floor hit in the upper half (log scale) of the threshold: growth evidence
        status, crossed = Status.THRESHOLD_CROSSED, True
    else:
        status = Status.STEP_LIMIT

    drifts = {m.name: _drift(m, states) for m in monitors}
    traj = Trajectory(t, states, status, cfg, drifts, tuple(monitors), crossed_threshold=crossed)
    if not crossed or t.size < 3:
        return traj

    estimate, spread = _extrapolate_escape(t, states)
    lo = float(t[-1])
    hi = float(max(estimate + spread, lo))
    traj = replace(traj, escape_estimate=float(estimate), escape_interval=(lo, hi))
    if certify and (F.label is not None or F.metric is not None):
        cert = certify_blowup(F, traj)
        if cert:
            upper = max(cert.escape_upper_bound, estimate)
            traj = replace(traj, status=Status.BLOWUP_CERTIFIED, certificate=cert,
                           escape_interval=(lo, float(upper)))
    return traj


def riccati_escape_bound(a: float, x0: float) -> float:
    """Upper bound ``1/(a x0)`` on the escape time of ``dx/dt = a x^2 + alpha(t)``, ``alpha >= 0``."""
    if not (a > 0 and x0 > 0):
        raise ValueError("riccati_escape_bound needs a > 0 and x0 > 0")
    return 1.0 / (a * x0)


def _normal_coordinates(F: GeodesicField, label: Optional[NormalFormLabel]):
    """Return (label, inverse witness matrix) mapping states of F to normal-form coordinates."""
    if label is not None and label.automorphism is None:
        return label, np.eye(3)
    if label is None and F.label is not None and F.label.automorphism is None:
        return F.label, np.eye(3)
    if label is None:
        if F.metric is None:
            raise UnsupportedLabelError("field carries neither a label nor a metric")
        label = classify(F.metric)
    return label.without_witness(), label.automorphism.inverse().matrix


def certify_blowup(F: GeodesicField, traj: Trajectory,
                   label: Optional[NormalFormLabel] = None) -> Union[BlowUpCertificate, Refusal]:
    """Certify a threshold crossing by an idempotent ray or a Riccati comparison.

    States are first transported to normal-form coordinates via the
    classification witness when ``F`` is not itself a normal form.
    """
    if not traj.crossed_threshold:
        return Refusal("trajectory never crossed the blow-up threshold")
    label, to_normal = _normal_coordinates(F, label)
    u = traj.states @ to_normal.T
    t = traj.t

    idem = search_idempotents(table_field(label))
    for x0 in idem.roots:
        kappa = u @ x0 / (x0 @ x0)
        dev = np.linalg.norm(u - kappa[:, None] * x0, axis=1)
        on_ray = (kappa > 0) & (dev <= RAY_TOL * np.linalg.norm(u, axis=1))
        if np.any(on_ray):
            i = int(np.argmax(on_ray))
            return BlowUpCertificate(
                "idempotent-ray", float(t[i]), float(t[i] + 1.0 / kappa[i]),
                {"label": str(label), "idempotent": [float(c) for c in x0],
                 "ray_multiple": float(kappa[i])},
            )

    x = u[:, 0]
    if label.tag == "Q6":
        # dx/dt = x^2 on the nose
        good = np.nonzero(x > 0)[0]
        if good.size:
            i = int(good[-1])
            return BlowUpCertificate(
                "riccati", float(t[i]), float(t[i] + riccati_escape_bound(1.0, x[i])),
                {"label": "Q6", "coordinate": "x", "comparison": "dx/dt = x^2"},
            )
    elif label.tag == "Q4":
        # dx/dt = x^2 + (z^2 - q), q = x^2 - 2yz conserved; z^2 grows while x > 0
        y, z = u[:, 1], u[:, 2]
        q = x**2 - 2 * y * z
        good = np.nonzero((x > 0) & (z**2 - q >= 0))[0]
        if good.size:
            i = int(good[-1])
            return BlowUpCertificate(
                "riccati", float(t[i]), float(t[i] + riccati_escape_bound(1.0, x[i])),
                {"label": "Q4", "coordinate": "x", "comparison": "dx/dt = x^2 + z^2 - q >= x^2",
                 "energy": float(q[i])},
            )
    return Refusal(f"no certificate mechanism matches this trajectory for {label}")


# ---------------------------------------------------------------------------
# completeness evidence

def _largest_root(g, k: float, start: float, monotone_from: float) -> float:
    """Largest ``y >= start`` with ``g(y) <= k``, given ``g`` increasing beyond ``monotone_from``."""
    lo = max(start, monotone_from)
    if g(lo) <= k:
        hi = 2.0 * lo + 1.0
        while g(hi) <= k:
            lo, hi = hi, 2.0 * hi
    else:
        grid = np.geomspace(start, lo, 20001)
        vals = np.array([g(y) for y in grid])
        ok = np.nonzero(vals <= k)[0]
        i = int(ok[-1])
        if i == grid.size - 1:
            return float(grid[-1])
        lo, hi = float(grid[i]), float(grid[i + 1])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if g(mid) <= k:
            lo = mid
        else:
            hi = mid
    return hi


def symmetry_reduce(F: GeodesicField, v0) -> np.ndarray:
    """Map ``v0`` by the involution ``(x, y, z) -> (x, -y, -z)`` into the half-space
    where the invariant-plane coordinate is non-negative."""
    v0 = np.asarray(v0, dtype=float)
    if F.label is None:
        raise UnsupportedLabelError("symmetry reduction needs a normal-form field")
    S = np.diag([1.0, -1.0, -1.0])
    probe = np.random.default_rng(0).normal(size=(16, 3))
    if not np.allclose(F(probe @ S.T), F(probe) @ S.T, rtol=0, atol=1e-12):
        raise UnsupportedLabelError(f"{F.label} is not invariant under (id, -id, -id)")
    k = invariant_plane(F.label).coordinate
    if k == 0:
        raise UnsupportedLabelError(f"{F.label}: the involution fixes the invariant-plane coordinate")
    return S @ v0 if v0[k] < 0 else v0.copy()


def level_set_bound(label: NormalFormLabel, v0) -> Union[float, str]:
    """Bound on ``sup_t |v(t)|`` from the two first integrals (Q2 with s > 0, or Q3).

    Returns :data:`UNBOUNDED_PLANE` for Q3 orbits on the plane ``z = 0``.
    """
    v0 = np.asarray(v0, dtype=float)
    if label.tag == "Q2" and label.parameter > 0:
        s = label.parameter
        x0, y0, z0 = v0
        if y0 == 0:
            c0 = x0**2 + s * z0**2
            return math.sqrt(c0 / min(1.0, s))
        if y0 < 0:
            x0, y0, z0 = x0, -y0, -z0
        k = x0**2 - y0**2 + s * z0**2
        c = math.log(y0) + s * z0 / y0

        def g(y):
            return y * y / s * ((c - math.log(y)) ** 2 - s)

        # g' > 0 once c - ln y < (1 - sqrt(1 + 4s)) / 2
        log_mono = c - (1 - math.sqrt(1 + 4 * s)) / 2
        if log_mono > 700.0:
            # valid but beyond float range
            return math.inf
        mono = math.exp(log_mono)
        Y = _largest_root(g, k, y0, mono)
        xz2 = (k + Y * Y) / min(1.0, s)
        return math.sqrt(Y * Y + xz2)

    if label.tag == "Q3":
        x0, y0, z0 = v0
        if z0 == 0:
            return UNBOUNDED_PLANE
        if z0 < 0:
            x0, y0, z0 = x0, -y0, -z0
        k = x0**2 + 2 * y0 * z0
        c = math.log(z0) - y0 / z0

        def g(z):
            return 2 * z * z * (math.log(z) - c)

        # g' = 2z(2(ln z - c) + 1) > 0 once ln z > c - 1/2
        Z = _largest_root(g, k, z0, math.exp(c - 0.5) * 1.0001)
        y_max = max(abs(Z * (math.log(Z) - c)), math.exp(c - 1) if math.exp(c - 1) <= Z else 0.0)
        x_max2 = k + 2 * y_max * Z
        return math.sqrt(x_max2 + y_max**2 + Z * Z)

    raise UnsupportedLabelError(f"no level-set bound for {label}")


VERDICT_TABLE = {
    ("Complete-bounded", "riemannian-homogeneous"),
    ("Complete-bounded", "bounded-by-level-sets"),
    ("Complete-unbounded", "invariant-plane-closed-form"),
    ("Incomplete", "idempotent"),
    ("Incomplete", "riccati-no-idempotent"),
}


@dataclass(frozen=True, eq=False)
class CompletenessVerdict:
    label: NormalFormLabel
    verdict: str
    mechanism: str
    witness: Trajectory
    diagnostics: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.verdict, self.mechanism) not in VERDICT_TABLE:
            raise ValueError(f"verdict/mechanism pair not allowed: {self.verdict}/{self.mechanism}")

    @property
    def complete(self) -> bool:
        return self.verdict.startswith("Complete")

    def to_dict(self) -> dict:
        return {
            "label": str(self.label),
            "verdict": self.verdict,
            "mechanism": self.mechanism,
            "witness": self.witness.summary(),
            "diagnostics": self.diagnostics,
            "notes": list(self.notes),
        }


class VerdictValidationError(RuntimeError):
    """A witness trajectory failed to support the expected verdict."""


WITNESS_V0 = (0.3, 0.4, 0.5)
Q4_WITNESS_V0 = (math.sqrt(2.0), 1.0, 1.0)


def completeness_verdict(label: NormalFormLabel, cfg: Optional[IntegratorConfig] = None) -> CompletenessVerdict:
    """Completeness verdict for a normal form, validated by a witness trajectory."""
    label = label.without_witness()
    F = table_field(label)
    cfg = cfg or IntegratorConfig()
    tag, p = label.tag, label.parameter

    def check(cond, message):
        if not cond:
            raise VerdictValidationError(f"{label}: {message}")

    if tag == "Q1" and p > 0:
        traj = integrate(F, WITNESS_V0, replace(cfg, t_max=min(cfg.t_max, 100.0)))
        Q = normal_form_matrix(label).matrix
        # positive definite energy bounds |v|^2 by q(v0) / lambda_min
        bound = math.sqrt(float(np.dot(WITNESS_V0, Q @ WITNESS_V0)) / np.min(np.linalg.eigvalsh(Q)))
        check(traj.status is Status.REACHED_TIME_BOUND, "witness did not reach the time bound")
        check(traj.max_norm <= bound * (1 + 1e-8), "witness left the energy ellipsoid")
        check(signature(normal_form_matrix(label)) == (3, 0), "not Riemannian")
        return CompletenessVerdict(
            label, "Complete-bounded", "riemannian-homogeneous", traj,
            {"energy_bound": bound, "max_norm": traj.max_norm},
            ("completeness of Riemannian forms is taken from homogeneity, not from integration",),
        )

    if tag in ("Q1", "Q2") and p < 0 or tag == "Q5":
        idem = search_idempotents(F)
        check(idem.status == "found", "expected an idempotent")
        v0 = max(idem.roots, key=lambda v: tuple(v[::-1]))
        traj = integrate(F, v0, cfg)
        check(traj.status is Status.BLOWUP_CERTIFIED, f"witness status {traj.status.value}")
        return CompletenessVerdict(
            label, "Incomplete", "idempotent", traj,
            {"idempotent": [float(c) for c in v0], "escape_estimate": traj.escape_estimate,
             "exact_escape_time": 1.0},
        )

    if tag in ("Q4", "Q6"):
        idem = search_idempotents(F)
        check(idem.status == "none", f"idempotent search returned {idem.status}")
        v0 = Q4_WITNESS_V0 if tag == "Q4" else (1.0, 0.0, 0.0)
        traj = integrate(F, v0, cfg)
        check(traj.status is Status.BLOWUP_CERTIFIED, f"witness status {traj.status.value}")
        check(traj.certificate.mechanism == "riccati", "expected a Riccati certificate")
        return CompletenessVerdict(
            label, "Incomplete", "riccati-no-idempotent", traj,
            {"idempotents": "none", "escape_estimate": traj.escape_estimate,
             "escape_upper_bound": traj.certificate.escape_upper_bound},
        )

    if tag == "Q2":
        t_max = min(cfg.t_max, 200.0)
        # s z0 / y0 = -2 sqrt(s): the start sits where g is increasing, so the level set is tight
        v0 = (WITNESS_V0[0], WITNESS_V0[1], -2.0 * WITNESS_V0[1] / math.sqrt(p))
        traj = integrate(F, v0, replace(cfg, t_max=t_max))
        bound = level_set_bound(label, v0)
        check(traj.status is Status.REACHED_TIME_BOUND, f"witness status {traj.status.value}")
        check(traj.max_norm <= bound, "witness exceeded the level-set bound")
        return CompletenessVerdict(
            label, "Complete-bounded", "bounded-by-level-sets", traj,
            {"level_set_bound": bound, "max_norm": traj.max_norm, "t_max": t_max,
             "v0": [float(c) for c in v0]},
        )

    if tag == "Q3":
        v0 = (1.0, 1.0, 0.0)
        traj = integrate(F, v0, replace(cfg, t_max=10.0))
        exact = np.stack([np.ones_like(traj.t), np.exp(traj.t), np.zeros_like(traj.t)], axis=1)
        rel = float(np.max(np.linalg.norm(traj.states - exact, axis=1) / np.linalg.norm(exact, axis=1)))
        check(traj.status is Status.REACHED_TIME_BOUND, f"witness status {traj.status.value}")
        check(rel < 1e-8, "witness left the closed-form orbit")
        off_plane = integrate(F, WITNESS_V0, replace(cfg, t_max=min(cfg.t_max, 200.0)))
        off_bound = level_set_bound(label, WITNESS_V0)
        check(off_plane.max_norm <= off_bound, "off-plane orbit exceeded its level-set bound")
        return CompletenessVerdict(
            label, "Complete-unbounded", "invariant-plane-closed-form", traj,
            {"closed_form_rel_error": rel, "plane_orbit": "(x0, y0 exp(x0 t), 0)",
             "off_plane_max_norm": off_plane.max_norm, "off_plane_bound": off_bound},
        )

    raise UnsupportedLabelError(f"no verdict rule for {label}")


def verdict_for_metric(m, cfg: Optional[IntegratorConfig] = None) -> tuple[NormalFormLabel, CompletenessVerdict]:
    label = classify(m)
    return label, completeness_verdict(label, cfg)

