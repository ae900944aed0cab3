"""Independent numerical checks of the constrained model's guarantees.

Each check returns a :class:`VerificationReport` whose margins are
normalized so that a margin ``>= -tolerance[check]`` means the property
holds. Loewner-type margins are smallest eigenvalues divided by
``1 + max |eig|`` of the reference matrix; residual-type margins are
negated relative errors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .constraint import BlockConstraint, DestinationConstraint, decompose, projector_A
from .dynamics import SystemModel
from .ellipsoid import loewner_margin, loewner_scale, symmetrize
from .reconstruct import build_step, resolve_weights
from .weights import (
    WeightBlocks,
    optimal_weight,
    process_noise_shape,
    random_feasible_weight,
    schur_gap,
)

DEFAULT_TOLERANCES = {
    "qp_vs_closed_form": 1e-8,
    "fixed_point": 1e-9,
    "null_space": 1e-10,
    "idempotence": 1e-9,
    "terminal_feasibility": 1e-9,
    "optimality": 1e-8,
    "trace": 1e-8,
    "logdet": 1e-8,
    "dominance": 1e-8,
    "schur_gap": 1e-9,
    "monotone": 1e-8,
    "closed_form": 1e-8,
    "terminal_zero": 1e-8,
}


@dataclass
class Margin:
    check: str
    index: int
    value: float
    raw: float | None = None

    def to_dict(self):
        out = {"check": self.check, "index": self.index, "value": self.value}
        if self.raw is not None:
            out["raw"] = self.raw
        return out


@dataclass
class VerificationReport:
    proposition: str
    scenario: str
    tolerance: dict = field(default_factory=dict)
    margins: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def add(self, check, index, value, raw=None):
        if check not in self.tolerance:
            self.tolerance[check] = DEFAULT_TOLERANCES[check]
        self.margins.append(Margin(check, int(index), float(value),
                                   None if raw is None else float(raw)))

    def series(self, check):
        return np.array([m.value for m in self.margins if m.check == check])

    def raw_series(self, check):
        return np.array([m.raw for m in self.margins if m.check == check])

    def failures(self):
        return [m for m in self.margins if not m.value >= -self.tolerance[m.check]]

    @property
    def passed(self):
        return not self.failures()

    def to_dict(self):
        return {
            "proposition": self.proposition,
            "scenario": self.scenario,
            "tolerance": dict(self.tolerance),
            "margins": [m.to_dict() for m in self.margins],
            "pass": self.passed,
            "details": self.details,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _relerr(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)) if b.size else 0.0


# -- Mahalanobis projection ------------------------------------------------

def qp_oracle(W, bc: BlockConstraint, d, x):
    """Minimize ``(y - x)^T W^{-1} (y - x)`` subject to ``C y = d`` via its KKT system."""
    W = np.asarray(W, dtype=float)
    C = bc.matrix
    m, p = C.shape
    Winv = np.linalg.inv(W)
    K = np.block([[Winv, C.T], [C, np.zeros((m, m))]])
    rhs = np.concatenate([Winv @ np.asarray(x, float), np.asarray(d, float)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular KKT system: {exc}") from exc
    return sol[:p]


def projection_closed_form(W, bc: BlockConstraint, d, x):
    """``x - W C^T (C W C^T)^{-1} (C x - d)``."""
    W = np.asarray(W, float)
    C = bc.matrix
    x = np.asarray(x, float)
    return x - W @ C.T @ np.linalg.solve(C @ W @ C.T, C @ x - np.asarray(d, float))


def random_spd(rng, n, cond=1e3):
    """SPD matrix with log-uniform spectrum in ``[1, cond]``."""
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.exp(rng.uniform(0.0, np.log(cond), n))
    return symmetrize((V * ev) @ V.T)


def random_constraint(rng, n, m, scale=1.0) -> DestinationConstraint:
    while True:
        D = rng.standard_normal((m, n))
        if np.linalg.svd(D, compute_uv=False)[-1] > 1e-3:
            return DestinationConstraint(D, scale * rng.standard_normal(m))


def random_system(rng, n, N) -> SystemModel:
    """Random nonsingular transitions and a dense random SPD stacked noise shape."""
    F = np.eye(n) + 0.3 * rng.standard_normal((N, n, n)) / np.sqrt(n)
    A = rng.standard_normal((n * N, n * N))
    Qw0 = symmetrize(A @ A.T / (n * N) + 0.1 * np.eye(n * N))
    return SystemModel(F, Qw0)


def check_prop1(sys: SystemModel, dc: DestinationConstraint, rng: np.random.Generator,
                instances=100, dims=((2, 1), (4, 3), (4, 4)), scenario="scenario"):
    """Projection decomposition and terminal feasibility.

    Cross-checks the closed-form projection against :func:`qp_oracle` on
    random instances, then checks for every step of ``sys`` that the
    optimal-weight projector annihilates ``[0 D]``, is idempotent, fixes
    feasible combined states, and that the terminal step satisfies the
    constraint for any noise.
    """
    report = VerificationReport("1", scenario)
    idx = 0
    for n, m in dims:
        for _ in range(instances):
            W = random_spd(rng, 2 * n)
            c = random_constraint(rng, n, m)
            x = rng.standard_normal(2 * n)
            bc = c.block()
            err = _relerr(projection_closed_form(W, bc, c.d, x), qp_oracle(W, bc, c.d, x))
            report.add("qp_vs_closed_form", idx, -err)
            idx += 1

    bc = dc.block()
    Dpinv_d = np.linalg.lstsq(dc.D, dc.d, rcond=None)[0]
    for k in range(1, sys.horizon + 1):
        W = optimal_weight(sys, k).full(strict=True)
        A = projector_A(W, bc)
        scale = max(1.0, np.max(np.abs(A)))
        report.add("null_space", k, -np.max(np.abs(bc.matrix @ A)) / scale)
        report.add("idempotence", k, -np.max(np.abs(A @ A - A)) / scale)
        # A feasible combined state: any x_k, and x_N on the constraint set.
        xk = rng.standard_normal(sys.dim)
        z = rng.standard_normal(sys.dim)
        xN = Dpinv_d + z - np.linalg.lstsq(dc.D, dc.D @ z, rcond=None)[0]
        xc = np.concatenate([xk, xN])
        report.add("fixed_point", k, -_relerr(decompose(xc, W, bc, dc.d), xc))

    last = build_step(sys, dc, optimal_weight(sys, sys.horizon), sys.horizon)
    dscale = 1.0 + np.max(np.abs(dc.d))
    report.add("terminal_feasibility", 0,
               -np.max(np.abs(dc.D @ last.Xi)) / (1.0 + np.max(np.abs(dc.D))))
    report.add("terminal_feasibility", 1, -np.max(np.abs(dc.D @ last.Dbar - dc.d)) / dscale)
    return report


# -- weight optimality -----------------------------------------------------

def check_optimality(sys: SystemModel, dc: DestinationConstraint, k, num_competitors,
                     rng: np.random.Generator, tol=1e-8, candidate: WeightBlocks | None = None,
                     report: VerificationReport | None = None):
    """Compare the candidate weight's noise cover against competitors at step ``k``.

    The candidate defaults to the closed-form optimum. Competitors are the
    closed-form optimum, the identity weight, and ``num_competitors``
    random SPD weights; each margin is the smallest eigenvalue of
    ``Q_eta(competitor) - Q_eta(candidate)``.
    """
    if report is None:
        report = VerificationReport("2", f"step {k}", tolerance={"optimality": tol})
    report.tolerance.setdefault("optimality", tol)
    W_opt = optimal_weight(sys, k)
    cand = W_opt if candidate is None else candidate
    Q_cand = process_noise_shape(sys, dc, cand, k)
    competitors = [W_opt, WeightBlocks.identity(sys.dim)]
    competitors += [random_feasible_weight(rng, sys, k) for _ in range(num_competitors)]
    base = len([m for m in report.margins if m.check == "optimality"])
    for i, Wt in enumerate(competitors):
        Q_t = process_noise_shape(sys, dc, Wt, k)
        raw = loewner_margin(Q_cand, Q_t)
        report.add("optimality", base + i, raw / loewner_scale(Q_t), raw)
    return report


def check_prop2(sys: SystemModel, dc: DestinationConstraint, num_competitors,
                rng: np.random.Generator, tol=1e-8, scenario="scenario", candidate_fn=None):
    """Optimality over every step plus the trace and log-det consequences.

    ``candidate_fn(sys, k)`` overrides the weight under test (used to show
    that a perturbed weight is caught).
    """
    report = VerificationReport("2", scenario, tolerance={"optimality": tol, "trace": tol})
    for k in range(1, sys.horizon + 1):
        cand = None if candidate_fn is None else candidate_fn(sys, k)
        check_optimality(sys, dc, k, num_competitors, rng, tol, cand, report)
    traces = compare_traces(sys, dc, "optimal", "identity")
    for k, ta, tb in traces:
        report.add("trace", k, (tb - ta) / (1.0 + abs(tb)), tb - ta)
    for k in range(1, sys.horizon + 1):
        Qa = process_noise_shape(sys, dc, optimal_weight(sys, k), k)
        Qb = process_noise_shape(sys, dc, WeightBlocks.identity(sys.dim), k)
        sa, la = np.linalg.slogdet(Qa)
        sb, lb = np.linalg.slogdet(Qb)
        if min(np.linalg.eigvalsh(Qa)[0], np.linalg.eigvalsh(Qb)[0]) <= 1e-12 * loewner_scale(Qb):
            continue
        report.add("logdet", k, lb - la)
    report.details["traces"] = [[k, ta, tb] for k, ta, tb in traces]
    return report


def compare_traces(sys: SystemModel, dc: DestinationConstraint, weight_a, weight_b):
    """``(k, trace Q_eta(a), trace Q_eta(b))`` for every step.

    Weights are mode names (``"optimal"``, ``"identity"``) or lists of
    :class:`WeightBlocks`, one per step.
    """
    Wa = resolve_weights(sys, weight_a)
    Wb = resolve_weights(sys, weight_b)
    out = []
    for k in range(1, sys.horizon + 1):
        ta = float(np.trace(process_noise_shape(sys, dc, Wa[k - 1], k)))
        tb = float(np.trace(process_noise_shape(sys, dc, Wb[k - 1], k)))
        out.append((k, ta, tb))
    return out


# -- cover dominance and monotonicity ---------------------------------------

def check_prop3(sys: SystemModel, dc: DestinationConstraint, tol=1e-8, scenario="scenario",
                schur_tol=1e-9):
    """``Q_eta(W*) <= Q_{k-1}`` at every step, plus the Schur-gap identity.

    The identity compares ``Q_{k-1} - Q_eta(W*)`` (computed as
    ``H Q_w H^T``) with ``W2 D^T (D W3 D^T)^{-1} D W2^T`` entrywise.
    """
    report = VerificationReport("3", scenario,
                                tolerance={"dominance": tol, "schur_gap": schur_tol})
    for k in range(1, sys.horizon + 1):
        Qk = sys.noise_block(k - 1)
        W = optimal_weight(sys, k)
        Qe = process_noise_shape(sys, dc, W, k)
        raw = loewner_margin(Qe, Qk)
        report.add("dominance", k, raw / loewner_scale(Qk), raw)
        gap = schur_gap(W, dc)
        err = np.max(np.abs((Qk - Qe) - gap)) / np.max(np.abs(Qk))
        report.add("schur_gap", k, -err)
    return report


def invertible_cover_closed_form(F, Q, N, k):
    """``Q - Q (F^{N-k})^T S^{-1} F^{N-k} Q`` with ``S = sum_{i=k}^{N} F^{N-i} Q (F^{N-i})^T``.

    Valid for time-invariant ``F, Q`` and an invertible constraint matrix.
    """
    F = np.atleast_2d(np.asarray(F, float))
    Q = np.atleast_2d(np.asarray(Q, float))
    S = np.zeros_like(Q)
    for i in range(k, N + 1):
        P = np.linalg.matrix_power(F, N - i)
        S += P @ Q @ P.T
    P = np.linalg.matrix_power(F, N - k)
    L = Q @ P.T
    return symmetrize(Q - L @ np.linalg.solve(S, L.T))


def check_prop4(F, Q, D, N, tol=1e-8, scenario="time-invariant"):
    """Monotone shrinkage ``Q_eta(k+1) <= Q_eta(k)`` for invertible ``D``.

    Also compares every cover with :func:`invertible_cover_closed_form` and checks the
    terminal cover vanishes.
    """
    F = np.atleast_2d(np.asarray(F, float))
    Q = np.atleast_2d(np.asarray(Q, float))
    D = np.atleast_2d(np.asarray(D, float))
    if D.shape[0] != D.shape[1] or np.linalg.matrix_rank(D) < D.shape[0]:
        raise ValueError(
            f"monotone-shrinkage check requires a square invertible D, got shape {D.shape}"
            f" with rank {np.linalg.matrix_rank(D)}"
        )
    if D.shape[1] != F.shape[0]:
        raise ValueError(f"D has {D.shape[1]} columns, state dimension is {F.shape[0]}")
    sys = SystemModel.time_invariant(F, Q, N)
    dc = DestinationConstraint(D, np.zeros(D.shape[0]))
    report = VerificationReport("4", scenario,
                                tolerance={"monotone": tol, "closed_form": tol,
                                           "terminal_zero": tol})
    covers = [process_noise_shape(sys, dc, optimal_weight(sys, k), k) for k in range(1, N + 1)]
    qscale = 1.0 + np.max(np.abs(Q))
    for k in range(1, N):
        raw = loewner_margin(covers[k], covers[k - 1])
        report.add("monotone", k, raw / loewner_scale(covers[k - 1]), raw)
    for k in range(1, N + 1):
        err = np.max(np.abs(covers[k - 1] - invertible_cover_closed_form(F, Q, N, k))) / qscale
        report.add("closed_form", k, -err)
    report.add("terminal_zero", N, -np.max(np.abs(covers[-1])) / qscale)
    report.details["traces"] = [float(np.trace(c)) for c in covers]
    return report

