"""Thermal-failure operating envelope in (power per length, pulse duration) space.

The boundary is the drive level at which a single pulse of length ``t_p``
brings the wire exactly to its failure rise::

    rho(t_p) = T_fail / (a * (1 - exp(-t_p / (a * b))))

with ``a`` the length-scaled thermal resistance (m K/W) and ``b`` the
length-normalized heat capacity (J/(m K)); ``a * b`` is the heating time
constant. Everything here is SI: rho in W/m, t_p in s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .units import W_per_mm, mm_K_per_W, uJ_per_mm_K

DEFAULT_MARGIN = 0.10


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class EnvelopeFit:
    a: float
    b: float
    T_fail: float = 1400.0
    r2: float | None = None
    residuals: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise EnvelopeError("envelope parameters a and b must be strictly positive")
        if not self.T_fail > 0:
            raise EnvelopeError("T_fail must be positive")

    @classmethod
    def published(cls) -> "EnvelopeFit":
        """a = 6601 mm K/W, b = 6.51 uJ/(mm K), 1400 C failure rise."""
        return cls(a=6601 * mm_K_per_W, b=6.51 * uJ_per_mm_K, T_fail=1400.0, r2=0.99)

    @classmethod
    def from_time_constant(cls, a: float, tau: float, T_fail: float = 1400.0) -> "EnvelopeFit":
        return cls(a=a, b=tau / a, T_fail=T_fail)

    @property
    def tau(self) -> float:
        return self.a * self.b

    @property
    def asymptote(self) -> float:
        """Drive level sustainable indefinitely, T_fail / a (W/m)."""
        return self.T_fail / self.a

    def to_dict(self) -> dict:
        d = {
            "a_mm_K_per_W": self.a / mm_K_per_W,
            "b_uJ_per_mm_K": self.b / uJ_per_mm_K,
            "tau_ms": self.tau * 1e3,
            "T_fail_K": self.T_fail,
            "asymptote_W_per_mm": self.asymptote / W_per_mm,
        }
        if self.r2 is not None:
            d["r2"] = self.r2
        if len(self.residuals):
            d["log_residuals"] = [float(r) for r in self.residuals]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvelopeFit":
        return cls(
            a=float(d["a_mm_K_per_W"]) * mm_K_per_W,
            b=float(d["b_uJ_per_mm_K"]) * uJ_per_mm_K,
            T_fail=float(d.get("T_fail_K", 1400.0)),
            r2=d.get("r2"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class FailurePoint:
    rho: float
    t_p: float
    cavity_length: float | None = None

    def __post_init__(self):
        if not (self.rho > 0 and self.t_p > 0):
            raise EnvelopeError("failure points need positive rho and t_p")


def boundary_rho(fit: EnvelopeFit, t_p):
    """Failure drive level (W/m) for pulse duration ``t_p`` (s)."""
    t = np.asarray(t_p, dtype=float)
    if np.any(t <= 0):
        raise EnvelopeError("pulse duration must be positive")
    out = fit.T_fail / (-fit.a * np.expm1(-t / fit.tau))
    return float(out) if out.ndim == 0 else out


def max_pulse_duration(fit: EnvelopeFit, rho: float) -> float:
    """Longest pulse at drive ``rho`` before failure; ``math.inf`` below the asymptote."""
    if not rho > 0:
        raise EnvelopeError("rho must be positive")
    x = fit.asymptote / rho
    if x >= 1.0:
        return math.inf
    return -fit.tau * math.log1p(-x)


@dataclass(frozen=True)
class SafetyReport:
    safe: bool
    rho: float
    t_p: float
    margin: float
    boundary: float
    headroom: float  # allowed rho / requested rho; >= 1 means safe
    max_t_p: float  # longest safe pulse at this rho with the margin applied
    boundary_t_p: float  # longest pulse before failure at this rho, no margin

    def to_dict(self) -> dict:
        return {
            "safe": self.safe,
            "rho_W_per_mm": self.rho / W_per_mm,
            "t_p_ms": self.t_p * 1e3,
            "margin": self.margin,
            "boundary_W_per_mm": self.boundary / W_per_mm,
            "headroom": self.headroom,
            "max_safe_t_p_ms": None if math.isinf(self.max_t_p) else self.max_t_p * 1e3,
            "failure_t_p_ms": None if math.isinf(self.boundary_t_p) else self.boundary_t_p * 1e3,
        }


def is_safe(fit: EnvelopeFit, rho: float, t_p: float, margin: float = 0.0) -> SafetyReport:
    """Check ``rho <= (1 - margin) * boundary_rho(t_p)``."""
    if not 0 <= margin < 1:
        raise EnvelopeError("margin must lie in [0, 1)")
    if rho < 0:
        raise EnvelopeError("rho must be non-negative")
    bound = boundary_rho(fit, t_p)
    allowed = (1.0 - margin) * bound
    headroom = math.inf if rho == 0 else allowed / rho
    max_t = math.inf if rho == 0 else max_pulse_duration(fit, rho / (1.0 - margin))
    fail_t = math.inf if rho == 0 else max_pulse_duration(fit, rho)
    return SafetyReport(rho <= allowed, rho, t_p, margin, bound, headroom, max_t, fail_t)


# -- fitting ---------------------------------------------------------------


def _log_shape(t, tau):
    # log(1 - exp(-t/tau)), stable for small t/tau
    return np.log(-np.expm1(-t / tau))


def _solve_log_a(y, t, tau, log_T):
    # for fixed tau the optimal log a is a plain mean
    return float(np.mean(log_T - y - _log_shape(t, tau)))


def _residuals(theta, t, y, log_T):
    log_a, log_tau = theta
    return y - (log_T - log_a - _log_shape(t, math.exp(log_tau)))


def _jacobian(theta, t):
    tau = math.exp(theta[1])
    x = t / tau
    # d/dlog_tau of log(1 - e^-x) is -x / expm1(x)
    return np.column_stack([np.ones_like(t), -x / np.expm1(x)])


def fit_envelope(points, T_fail: float = 1400.0, grid_size: int = 121, max_iter: int = 100) -> EnvelopeFit:
    """Least-squares fit of (a, b) to failure points, with residuals in log(rho).

    A log-spaced grid over the time constant (with ``a`` solved exactly at each
    node) seeds a damped Gauss-Newton refinement in ``(log a, log tau)``.
    """
    pts = list(points)
    if len(pts) < 3:
        raise EnvelopeError(f"need at least 3 failure points, got {len(pts)}")
    t = np.array([p.t_p for p in pts], dtype=float)
    rho = np.array([p.rho for p in pts], dtype=float)
    if np.unique(t).size < 2:
        raise EnvelopeError("all failure points share one pulse duration; the time constant is unidentifiable")
    y = np.log(rho)
    log_T = math.log(T_fail)

    lo, hi = t.min() / 100.0, t.max() * 100.0
    taus = np.geomspace(lo, hi, grid_size)
    costs = []
    for tau in taus:
        la = _solve_log_a(y, t, tau, log_T)
        r = _residuals((la, math.log(tau)), t, y, log_T)
        costs.append(float(r @ r))
    best = int(np.argmin(costs))
    if best in (0, grid_size - 1):
        raise EnvelopeError(
            "failure points do not bend toward an asymptote within the searched time-constant range "
            f"[{lo:.3g}, {hi:.3g}] s; rho must fall with t_p and flatten at long pulses"
        )
    theta = np.array([_solve_log_a(y, t, taus[best], log_T), math.log(taus[best])])

    r = _residuals(theta, t, y, log_T)
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        J = _jacobian(theta, t)
        JtJ = J.T @ J
        g = J.T @ r
        step = np.linalg.solve(JtJ + lam * np.diag(np.diag(JtJ)), -g)
        trial = theta + step
        r_trial = _residuals(trial, t, y, log_T)
        c_trial = float(r_trial @ r_trial)
        if c_trial <= cost:
            converged = abs(cost - c_trial) <= 1e-15 * max(cost, 1e-300) or np.max(np.abs(step)) < 1e-13
            theta, r, cost = trial, r_trial, c_trial
            lam = max(lam / 10.0, 1e-12)
            if converged:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break

    a = math.exp(theta[0])
    tau = math.exp(theta[1])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - cost / ss_tot if ss_tot > 0 else 1.0
    return EnvelopeFit(a=a, b=tau / a, T_fail=T_fail, r2=r2, residuals=tuple(r.tolist()))


def boundary_table(fit: EnvelopeFit, durations) -> list[dict]:
    """Rows of (t_p, boundary rho) plus a final asymptote row."""
    rows = [{"t_p_ms": float(t) * 1e3, "rho_W_per_mm": boundary_rho(fit, float(t)) / W_per_mm} for t in durations]
    rows.append({"t_p_ms": None, "rho_W_per_mm": fit.asymptote / W_per_mm})
    return rows
