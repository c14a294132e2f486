"""Estimating-sequence bookkeeping and runtime certification of convergence bounds.

The tracker follows a solver run and maintains the quantities that never
enter the iteration itself: ``lambda_k``, the memory term

    psi_k(x) = sum_i beta_{i,k} gamma_i / 2 ||x - v_i||^2,

the scanning function ``Phi_k(x) = phi*_k + gamma_k/2 ||x - v_k||^2 - psi_k(x)``
and its minimum.  Every step is checked against the algebraic identities the
method relies on (hard checks) and against the premise ``f(x_k) <= min Phi_k``
(soft check, reported only).

Bound formulas (Lemma-4 style decay of lambda_k, the Theorem-1 gap bound and
iteration-count estimates) are plain functions so they can be used without a
run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import FlatScanningFunction, ValidityDomainError
from .solvers import Method

GAMMA_RTOL = 1e-10
LAMBDA_RTOL = 1e-12
FEASIBILITY_SLACK = 1e-12
DESCENT_SLACK = 1e-9
PREMISE_SLACK = 1e-9


def cert_slack(bound: float) -> float:
    """Additive tolerance for bound checks: ``1e-8 (1 + |bound|)``."""
    return 1e-8 * (1.0 + abs(bound))


# --------------------------------------------------------------------------
# pure formulas


def update_lambda_value(lam: float, alpha: float) -> float:
    return (1.0 - alpha) * lam


def psi_value(x, entries) -> float:
    """``sum beta gamma_i / 2 ||x - v_i||^2`` over ``(beta, gamma_i, v_i)`` triples."""
    total = 0.0
    for beta, gamma_i, v_i in entries:
        d = np.asarray(x, dtype=float) - v_i
        total += beta * gamma_i * 0.5 * float(d @ d)
    return total


def phi_argmin_point(gamma_k, v_k, entries):
    """Minimizer of ``gamma_k/2 ||x - v_k||^2 - sum beta gamma_i/2 ||x - v_i||^2``."""
    S = sum(b * g for b, g, _ in entries)
    curvature = gamma_k - S
    if curvature <= 0:
        if gamma_k == 0 and S == 0:
            # Phi_k is constant; any point minimizes it
            return np.array(v_k, dtype=float)
        raise FlatScanningFunction(f"scanning function curvature {curvature!r} is not positive")
    num = gamma_k * np.asarray(v_k, dtype=float)
    for b, g, v_i in entries:
        num = num - (b * g) * v_i
    return num / curvature


def phi_min_value(phi_star, gamma_k, v_k, x_phi, entries) -> float:
    d = x_phi - v_k
    return phi_star + 0.5 * gamma_k * float(d @ d) - psi_value(x_phi, entries)


def phi_star_next(phi_star, f_y, y, grad, v_k, x_phi, gamma_k, gamma_next, alpha, mu, entries):
    """Recursion for ``phi*_{k+1}``, evaluated summand by summand.

    ``entries`` are ``(beta_{i,k}, gamma_i, v_i)``.  The norm products are the
    Cauchy-Schwarz relaxations of the corresponding inner products.
    """
    a, g1 = alpha, gamma_next
    S = sum(b * gi for b, gi, _ in entries)
    gnorm = float(np.linalg.norm(grad))
    y_vk = y - v_k
    ny_vk = float(np.linalg.norm(y_vk))

    mem_norm_grad = 0.0  # sum beta gamma_i ||v_i - y|| ||g||
    mem_norm_vk = 0.0  # sum beta gamma_i ||y - v_i|| ||y - v_k||
    mem_sq = 0.0  # sum beta gamma_i / 2 ||y - v_i||^2
    mem_inner = 0.0  # sum beta gamma_i (v_i - y)^T g
    mem_xphi = 0.0  # sum beta gamma_i / 2 ||x_phi - v_i||^2
    for b, gi, vi in entries:
        w = b * gi
        d = vi - y
        nd = float(np.linalg.norm(d))
        mem_norm_grad += w * nd * gnorm
        mem_norm_vk += w * nd * ny_vk
        mem_sq += 0.5 * w * nd * nd
        mem_inner += w * float(d @ grad)
        e = x_phi - vi
        mem_xphi += 0.5 * w * float(e @ e)

    xv = x_phi - v_k
    terms = (
        a * f_y,
        (1 - a) * phi_star,
        a * gamma_k * (1 - a) * (mu + S) / (2 * g1) * ny_vk**2,
        a**3 / g1 * mem_norm_grad,
        (1 - a) * gamma_k / 2 * float(xv @ xv),
        -(a**2) * gnorm**2 / (2 * g1),
        a * (1 - a) * gamma_k / g1 * (float(-y_vk @ grad) + mem_norm_vk),
        a * mem_sq,
        (1 - a) * a**2 / g1 * mem_inner,
        mem_xphi,
    )
    return math.fsum(terms)


def lemma4_bounds(k: int, mu: float, L: float, S: float = 0.0) -> tuple[float, float]:
    """``(exponential, polynomial)`` upper bounds on ``lambda_k``.

    ``2 mu / (L (e^t - e^-t)^2)`` with ``t = (k+1)/2 sqrt((mu+S)/L)``, and
    ``2 mu / ((mu+S)(k+1)^2)``.
    """
    t = 0.5 * (k + 1) * math.sqrt((mu + S) / L)
    sh = math.sinh(t) if t < 700 else math.inf
    exp_bound = 2 * mu / (L * 4 * sh * sh) if sh > 0 else math.inf
    poly_bound = 2 * mu / ((mu + S) * (k + 1) ** 2)
    return exp_bound, poly_bound


def theorem1_bound(lambda_k, f0, f_star, gamma0, R0, psi_at_xstar=0.0) -> float:
    """``lambda_k [f0 - f* + gamma0/2 R0^2] - (1 - lambda_k) psi_k(x*)``.

    Passing ``psi_at_xstar=0`` gives the relaxed bound, valid because psi >= 0.
    """
    return lambda_k * (f0 - f_star + 0.5 * gamma0 * R0 * R0) - (1.0 - lambda_k) * psi_at_xstar


class IterationBounds(NamedTuple):
    k_sfgm: float
    k_sfgm_asymptotic: float
    k_fgm: float
    k_lower: float

    @property
    def fgm_over_sfgm(self):
        return self.k_fgm / self.k_sfgm_asymptotic if self.k_sfgm_asymptotic else math.inf


def iteration_lower_bounds(L: float, mu: float, S: float, R0: float, eps: float) -> IterationBounds:
    """Iteration estimates to reach ``f(x_k) - f* <= eps``.

    Requires ``0 < eps <= mu R0^2 / 2``.
    """
    if not mu > 0 or not L > 0:
        raise ValidityDomainError("need L > 0 and mu > 0")
    if not eps > 0:
        raise ValidityDomainError("eps must be positive")
    if eps > 0.5 * mu * R0 * R0:
        raise ValidityDomainError(
            f"eps = {eps!r} exceeds mu R0^2 / 2 = {0.5 * mu * R0 * R0!r}; the estimates need eps <= mu R0^2 / 2")
    ln_term = math.log(mu * R0 * R0 / (2 * eps))
    k_sfgm = math.sqrt(L / (mu + S)) * (ln_term + math.log(5))
    k_asym = math.sqrt(L / (2 * mu)) * (ln_term + math.log(5))
    k_fgm = math.sqrt(L / mu) * (ln_term + math.log(23 / 3))
    k_lower = (math.sqrt(L / mu) - 1) / 4 * ln_term
    return IterationBounds(k_sfgm, k_asym, k_fgm, k_lower)


# --------------------------------------------------------------------------
# run tracker


@dataclass
class StepCheck:
    """Outcome of the per-step checks for iteration ``k`` (``x_k -> x_{k+1}``)."""

    k: int
    alpha: float
    gamma: float  # gamma_k
    gamma_next: float
    beta_mass: float
    lam_next: float
    gamma_identity_err: float  # |gamma_{k+1} - L alpha^2| / max(gamma_{k+1}, tiny)
    feasibility_excess: float  # S - min(gamma_k, mu); <= slack is fine
    descent_excess: float  # f(x_{k+1}) - f(y_k) + ||g||^2 / 2L, scaled check below
    descent_slack: float
    premise_gap: float  # f(x_k) - min Phi_k; <= 0 means the premise holds
    phi_star: float  # phi*_k

    @property
    def gamma_ok(self):
        return not (self.gamma_identity_err > GAMMA_RTOL)

    @property
    def feasible(self):
        return not (self.feasibility_excess > FEASIBILITY_SLACK)

    @property
    def descent_ok(self):
        return not (self.descent_excess > self.descent_slack)

    @property
    def premise_ok(self):
        return math.isnan(self.premise_gap) or self.premise_gap <= PREMISE_SLACK * (1 + abs(self.phi_star))


class EstimatingTracker:
    """Follows a run (pass :meth:`observe` as the ``observer`` of ``solvers.run``).

    Keeps the full ``(gamma_i, v_i)`` history, so memory grows as ``O(k n)``;
    use it for certification runs only.
    """

    def __init__(self, oracle, config, x0, f0: Optional[float] = None):
        self.L = oracle.lipschitz
        self.mu = oracle.strong_convexity
        self.method = config.method
        self.gamma0 = 0.0 if config.method is Method.GM else float(config.gamma0)
        self.x0 = np.asarray(x0, dtype=float)
        self.f0 = oracle.value(self.x0) if f0 is None else float(f0)
        self.lam = 1.0
        self.phi_star = self.f0
        self.gamma_hist: list[float] = []
        self.v_hist: list[np.ndarray] = []
        self.beta_hist: list[dict[int, float]] = []
        self.alphas: list[float] = []
        self.lams: list[float] = [1.0]
        self.checks: list[StepCheck] = []
        self._f_current = self.f0

    # -- stepping

    def update_lambda(self, alpha: float) -> float:
        self.lam = update_lambda_value(self.lam, alpha)
        self.alphas.append(alpha)
        self.lams.append(self.lam)
        return self.lam

    def entries(self, k: Optional[int] = None):
        """``(beta_{i,k}, gamma_i, v_i)`` for iteration ``k`` (default: latest)."""
        if not self.beta_hist:
            return []
        row = self.beta_hist[-1 if k is None else k]
        return [(b, self.gamma_hist[i], self.v_hist[i]) for i, b in sorted(row.items())]

    def observe(self, prev, new, f_x):
        k = prev.k
        f_y, y, g = new.f_last, new.y_last, new.grad_last
        gnorm2 = float(g @ g)
        descent_excess = f_x - (f_y - gnorm2 / (2 * self.L))
        descent_slack = DESCENT_SLACK * (1 + abs(f_y))

        if self.method is Method.GM:
            self.checks.append(StepCheck(
                k=k, alpha=math.nan, gamma=math.nan, gamma_next=math.nan, beta_mass=0.0,
                lam_next=math.nan, gamma_identity_err=math.nan, feasibility_excess=-math.inf,
                descent_excess=descent_excess, descent_slack=descent_slack,
                premise_gap=math.nan, phi_star=math.nan))
            self._f_current = f_x
            return

        self.gamma_hist.append(prev.gamma)
        self.v_hist.append(prev.v)
        self.beta_hist.append({e.index: e.beta for e in new.memory})
        entries = self.entries(k)
        alpha, gamma_k, gamma_next = new.alpha_prev, prev.gamma, new.gamma
        S = sum(b * gi for b, gi, _ in entries)

        try:
            x_phi = phi_argmin_point(gamma_k, prev.v, entries)
            premise_gap = self._f_current - phi_min_value(self.phi_star, gamma_k, prev.v, x_phi, entries)
        except FlatScanningFunction:
            x_phi, premise_gap = None, math.nan
        phi_star_k = self.phi_star
        if x_phi is not None:
            self.phi_star = phi_star_next(self.phi_star, f_y, y, g, prev.v, x_phi,
                                          gamma_k, gamma_next, alpha, self.mu, entries)
        else:
            self.phi_star = math.nan

        lam_next = self.update_lambda(alpha)
        target = self.L * alpha * alpha
        self.checks.append(StepCheck(
            k=k, alpha=alpha, gamma=gamma_k, gamma_next=gamma_next, beta_mass=S, lam_next=lam_next,
            gamma_identity_err=abs(gamma_next - target) / max(abs(gamma_next), 1e-300),
            feasibility_excess=S - min(gamma_k, self.mu),
            descent_excess=descent_excess, descent_slack=descent_slack,
            premise_gap=premise_gap, phi_star=phi_star_k))
        self._f_current = f_x

    # -- queries

    def eval_psi(self, x, k: Optional[int] = None) -> float:
        return psi_value(x, self.entries(k))

    def phi_argmin(self, k: Optional[int] = None):
        k = len(self.beta_hist) - 1 if k is None else k
        return phi_argmin_point(self.gamma_hist[k], self.v_hist[k], self.entries(k))

    def certify_lemma1_premise(self, f_xk: float, k: Optional[int] = None) -> bool:
        """Soft check ``f(x_k) <= min Phi_k`` for an observed iteration ``k``."""
        k = len(self.beta_hist) - 1 if k is None else k
        entries = self.entries(k)
        phi_star = self.checks[k].phi_star
        x_phi = phi_argmin_point(self.gamma_hist[k], self.v_hist[k], entries)
        value = phi_min_value(phi_star, self.gamma_hist[k], self.v_hist[k], x_phi, entries)
        return f_xk <= value + PREMISE_SLACK * (1 + abs(value))


def update_lambda(tracker: EstimatingTracker, alpha: float) -> float:
    return tracker.update_lambda(alpha)


def eval_psi(tracker: EstimatingTracker, x, k=None) -> float:
    return tracker.eval_psi(x, k)


def phi_argmin(tracker: EstimatingTracker, k=None):
    return tracker.phi_argmin(k)


def certify_lemma1_premise(tracker: EstimatingTracker, f_xk: float, k=None) -> bool:
    return tracker.certify_lemma1_premise(f_xk, k)


# --------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class BoundReport:
    k: int
    lam: float
    lemma4_exp_bound: float
    lemma4_poly_bound: float
    theorem1_bound: float  # with psi_k(x*) when available
    theorem1_relaxed: float
    observed_gap: float
    lemma4_violated: bool
    theorem1_violated: bool

    @property
    def violated(self) -> bool:
        return self.lemma4_violated or self.theorem1_violated

    @property
    def slack(self) -> float:
        """Smallest margin among the applicable checks (negative means violated)."""
        margins = []
        if not math.isnan(self.lam):
            margins.append(self.lemma4_exp_bound - self.lam)
        if not math.isnan(self.observed_gap):
            margins.append(self.theorem1_relaxed - self.observed_gap)
        return min(margins) if margins else math.nan


@dataclass
class Certification:
    reports: list[BoundReport]
    lemma4_violations: int
    theorem1_violations: int
    theorem1_psi_violations: int
    lambda_violations: int
    gamma_violations: int
    feasibility_violations: int
    descent_violations: int
    premise_failures: int
    premise_checked: int

    @property
    def hard_violations(self) -> int:
        return (self.lambda_violations + self.gamma_violations
                + self.feasibility_violations + self.descent_violations)

    def summary(self) -> dict:
        return {
            "iterations": len(self.reports),
            "lemma4_violations": self.lemma4_violations,
            "theorem1_violations": self.theorem1_violations,
            "theorem1_psi_violations": self.theorem1_psi_violations,
            "lambda_violations": self.lambda_violations,
            "gamma_violations": self.gamma_violations,
            "feasibility_violations": self.feasibility_violations,
            "descent_violations": self.descent_violations,
            "hard_violations": self.hard_violations,
            "lemma1_premise_failures": self.premise_failures,
            "lemma1_premise_checked": self.premise_checked,
        }


def lambda_recursion_violations(records) -> int:
    """Compare each record's lambda against the running product of (1 - alpha)."""
    alphas = np.array([r.alpha for r in records], dtype=float)
    lams = np.array([r.lam for r in records], dtype=float)
    if alphas.size == 0 or np.all(np.isnan(alphas)):
        return 0
    expected = np.cumprod(1.0 - alphas)
    err = np.abs(lams - expected)
    return int(np.sum(~(err <= LAMBDA_RTOL * np.abs(expected) + 1e-300)))


def certify_run(trace, tracker: EstimatingTracker, truth=None) -> Certification:
    """One :class:`BoundReport` per trace record plus violation counts."""
    if not trace:
        raise ValueError("trace is empty")
    mu, L = tracker.mu, tracker.L
    is_gm = tracker.method is Method.GM
    f_star = truth.f_star if truth is not None else math.nan
    R0 = truth.dist(tracker.x0) if truth is not None else math.nan

    reports = []
    l4 = t1 = t1psi = 0
    for rec in trace:
        if is_gm:
            lam = e_b = p_b = thm = thm_rel = math.nan
            l4v = t1v = False
        else:
            lam = rec.lam
            S = rec.beta_mass if not math.isnan(rec.beta_mass) else 0.0
            e_b, p_b = lemma4_bounds(rec.k, mu, L, S)
            l4v = lam > e_b + cert_slack(e_b)
            thm = thm_rel = math.nan
            t1v = False
            if truth is not None:
                thm_rel = theorem1_bound(lam, tracker.f0, f_star, tracker.gamma0, R0)
                psi = tracker.eval_psi(truth.x_star, rec.k) if rec.k < len(tracker.beta_hist) else 0.0
                thm = theorem1_bound(lam, tracker.f0, f_star, tracker.gamma0, R0, psi)
                t1v = rec.gap > thm_rel + cert_slack(thm_rel)
                if rec.gap > thm + cert_slack(thm):
                    t1psi += 1
        l4 += l4v
        t1 += t1v
        reports.append(BoundReport(rec.k, lam, e_b, p_b, thm, thm_rel, rec.gap, l4v, t1v))

    checks = tracker.checks
    premise = [c for c in checks if not math.isnan(c.premise_gap)]
    return Certification(
        reports=reports,
        lemma4_violations=l4,
        theorem1_violations=t1,
        theorem1_psi_violations=t1psi,
        lambda_violations=0 if is_gm else lambda_recursion_violations(trace),
        gamma_violations=sum(not c.gamma_ok for c in checks),
        feasibility_violations=sum(not c.feasible for c in checks),
        descent_violations=sum(not c.descent_ok for c in checks),
        premise_failures=sum(not c.premise_ok for c in premise),
        premise_checked=len(premise),
    )


@dataclass
class TraceAudit:
    """Identity checks recoverable from a trace file alone."""

    lambda_violations: int = 0
    gamma_violations: int = 0
    feasibility_violations: int = 0
    rows: int = 0

    @property
    def hard_violations(self):
        return self.lambda_violations + self.gamma_violations + self.feasibility_violations


def audit_trace(records: Sequence, L: float, mu: float, gamma0: float) -> TraceAudit:
    """Re-check lambda, ``gamma_{k+1} = L alpha_k^2`` and feasibility from a trace.

    The memory mass is reconstructed from the gamma recursion,
    ``S = (gamma_{k+1} - (1 - alpha) gamma_k) / alpha - mu``, so the
    feasibility check carries a looser ``1e-9 max(gamma_k, mu)`` slack.
    """
    audit = TraceAudit(rows=len(records))
    if not records or all(math.isnan(r.alpha) for r in records):
        return audit
    audit.lambda_violations = lambda_recursion_violations(records)
    gamma_prev = gamma0
    for r in records:
        target = L * r.alpha * r.alpha
        if not abs(r.gamma - target) <= GAMMA_RTOL * max(abs(r.gamma), 1e-300):
            audit.gamma_violations += 1
        if r.alpha > 0:
            S = (r.gamma - (1 - r.alpha) * gamma_prev) / r.alpha - mu
            if S - min(gamma_prev, mu) > 1e-9 * max(gamma_prev, mu):
                audit.feasibility_violations += 1
        gamma_prev = r.gamma
    return audit
