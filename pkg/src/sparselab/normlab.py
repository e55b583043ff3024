"""Weighted operator norms and the experiment drivers built on them.

Operators act on arrays of the grid's shape.  ``L^2(w)`` norms are top
singular values of the conjugated map ``w^(1/2) T w^(-1/2)`` with respect
to the unweighted inner product; ``p != 2`` values are lower bounds from
input maximization only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, svds

from .errors import ConvergenceError, InvalidInput
from .grid import Grid, GridFunction
from .weights import Weight, characteristics

__all__ = [
    "OperatorHandle",
    "NormEstimate",
    "ExperimentReport",
    "identity_operator",
    "multiplication_operator",
    "fourier_multiplier_operator",
    "beurling_operator",
    "truncated_cz_operator",
    "piece_operator",
    "weighted_l2_norm",
    "weighted_lp_lower_bound",
    "stein_weiss_check",
    "epsilon_bump_chain",
    "schedule_series",
    "schedule_series_bruteforce",
    "schedule_exponent",
    "fit_loglog",
    "a2_growth_experiment",
    "beurling_power_experiment",
    "truncated_operator_norm",
]


# ---------------------------------------------------------------------------
# operator handles


@dataclass
class OperatorHandle:
    """Linear map on grid arrays together with its unweighted adjoint."""

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    grid: Grid
    descriptor: str

    def adjoint_error(self, trials: int = 3, seed: int = 0) -> float:
        """Worst ``|<Tf, g> - <f, T*g>| / (|Tf| |g|)`` over random pairs."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        shape = self.grid.shape
        for _ in range(trials):
            f = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            tf = self.apply(f)
            lhs = np.vdot(g, tf)
            rhs = np.vdot(self.adjoint(g), f)
            scale = np.linalg.norm(tf) * np.linalg.norm(g)
            worst = max(worst, float(abs(lhs - rhs) / max(scale, 1e-300)))
        return worst


def identity_operator(grid: Grid) -> OperatorHandle:
    return OperatorHandle(lambda f: np.array(f, copy=True), lambda f: np.array(f, copy=True),
                          grid, "identity")


def multiplication_operator(grid: Grid, g: np.ndarray) -> OperatorHandle:
    g = np.asarray(g)
    return OperatorHandle(lambda f: g * f, lambda f: np.conj(g) * f, grid, "multiplication")


def fourier_multiplier_operator(grid: Grid, m: np.ndarray, descriptor: str = "multiplier",
                                pad: int = 1) -> OperatorHandle:
    """``f -> F^-1(m F f)`` on the grid, zero-padded by ``pad`` when ``pad > 1``.

    ``m`` must live on the padded grid (FFT order).
    """
    n = grid.n
    npad = n * pad
    if m.shape != (npad,) * grid.d:
        raise InvalidInput("multiplier shape does not match the padded grid")
    sl = (slice(0, n),) * grid.d

    def run(f, mult):
        if pad == 1:
            return np.fft.ifftn(np.fft.fftn(f) * mult)
        buf = np.zeros((npad,) * grid.d, dtype=complex)
        buf[sl] = f
        return np.fft.ifftn(np.fft.fftn(buf) * mult)[sl]

    mc = np.conj(m)
    return OperatorHandle(lambda f: run(f, m), lambda f: run(f, mc), grid, descriptor)


def beurling_operator(grid: Grid, m: int, pad: int = 2) -> OperatorHandle:
    """``(conj(xi)/xi)^m`` with zero padding (free-space action on the grid)."""
    from . import calibration
    from .operators import beurling_multiplier_apply

    orient = calibration.load()["beurling_orientation"]
    flipped = "xi_over_conj" if orient == "conj_over_xi" else "conj_over_xi"

    def fwd(f):
        return beurling_multiplier_apply(m, GridFunction(grid, f), orient, pad).values

    def adj(g):
        return beurling_multiplier_apply(m, GridFunction(grid, g), flipped, pad).values

    return OperatorHandle(fwd, adj, grid, f"beurling:{m}")


def _reflect(f: np.ndarray) -> np.ndarray:
    # midpoints are symmetric about the origin: x_i = -x_(n-1-i)
    return f[(slice(None, None, -1),) * f.ndim]


def truncated_cz_operator(kernel, grid: Grid, eps: float | None = None,
                          delta: float | None = None) -> OperatorHandle:
    """``T_{eps, delta}`` by free-space convolution; adjoint by reflection."""
    from .operators import truncated_apply

    eps = grid.cell_diagonal if eps is None else eps
    delta = grid.diameter if delta is None else delta

    def fwd(f):
        return truncated_apply(kernel, GridFunction(grid, f), eps, delta).values

    def adj(g):
        return np.conj(_reflect(fwd(_reflect(np.conj(g)))))

    return OperatorHandle(fwd, adj, grid, f"{kernel.name}[{eps:.3g},{delta:.3g}]")


def piece_operator(kernel, schedule, j: int, grid: Grid) -> OperatorHandle:
    """Periodic Fourier realization of one Littlewood-Paley piece."""
    from .lpdecomp import piece_multiplier

    m = piece_multiplier(kernel, schedule, j, grid)
    return fourier_multiplier_operator(grid, m, f"piece[{kernel.name},{schedule.name},{j}]")


# ---------------------------------------------------------------------------
# norms


@dataclass
class NormEstimate:
    value: float
    method: str
    iterations: int
    residual: float
    converged: bool = True
    bracket: tuple = (float("nan"), float("nan"))
    history: list = field(default_factory=list)


def _weight_array(w, grid: Grid) -> np.ndarray:
    if w is None:
        return np.ones(grid.shape)
    arr = w.array if isinstance(w, Weight) else np.asarray(w, dtype=float)
    if arr.shape != grid.shape or not np.all(arr > 0):
        raise InvalidInput("weight must be positive with the grid's shape")
    return arr


def weighted_l2_norm(T: OperatorHandle, w=None, tol: float = 1e-6, maxiter: int = 500,
                     method: str = "power", seed: int = 0, strict: bool = False) -> NormEstimate:
    """``||T||_{L^2(w) -> L^2(w)}``.

    ``method="power"`` runs power iteration on ``A* A`` with
    ``A = w^(1/2) T w^(-1/2)``; the Rayleigh quotients are recorded in
    ``history`` and the bracket is ``[sqrt(mu), sqrt(mu + r)]`` with ``r``
    the final residual norm.  ``method="lanczos"`` uses ARPACK on the same
    conjugated map.
    """
    g = T.grid
    wa = _weight_array(w, g)
    sq = np.sqrt(wa)

    def A(x):
        return sq * T.apply(x / sq)

    def AH(y):
        return T.adjoint(sq * y) / sq

    if method == "lanczos":
        size = int(np.prod(g.shape))
        op = LinearOperator((size, size), dtype=complex,
                            matvec=lambda v: A(v.reshape(g.shape)).ravel(),
                            rmatvec=lambda v: AH(v.reshape(g.shape)).ravel())
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(size).astype(complex)
        try:
            # svds squares the tolerance internally
            s = svds(op, k=1, tol=1e-7, v0=v0, return_singular_vectors=False,
                     maxiter=max(maxiter, 2000))
        except ArpackNoConvergence:
            return weighted_l2_norm(T, w, tol, 4 * maxiter, "power", seed, strict)
        val = float(s[0])
        return NormEstimate(val, "lanczos", 0, 0.0, True, (val, val))
    if method != "power":
        raise InvalidInput(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(g.shape) + 0j
    x /= np.linalg.norm(x)
    history = []
    prev = None
    resid = float("inf")
    for it in range(1, maxiter + 1):
        y = AH(A(x))
        mu = float(np.vdot(x, y).real)
        history.append(mu)
        ny = np.linalg.norm(y)
        if ny == 0:
            return NormEstimate(0.0, "power", it, 0.0, True, (0.0, 0.0), history)
        resid = float(np.linalg.norm(y - mu * x))
        x = y / ny
        val = math.sqrt(max(mu, 0.0))
        if prev is not None and abs(val - prev) <= tol * max(val, 1e-300) \
                and resid <= tol * max(mu, 1e-300):
            return NormEstimate(val, "power", it, resid / max(mu, 1e-300), True,
                                (val, math.sqrt(mu + resid)), history)
        prev = val
    val = math.sqrt(max(history[-1], 0.0))
    bracket = (val, math.sqrt(history[-1] + resid))
    if strict:
        raise ConvergenceError(f"power iteration did not converge in {maxiter} steps", bracket)
    return NormEstimate(val, "power", maxiter, resid / max(history[-1], 1e-300), False,
                        bracket, history)


def truncated_operator_norm(kernel, grid: Grid, method: str = "lanczos") -> NormEstimate:
    """Unweighted ``L^2`` norm of the truncation ``T_{h sqrt(d), diam}``."""
    return weighted_l2_norm(truncated_cz_operator(kernel, grid), None, method=method)


def _lp_ratio(T, f, wa, p):
    num = np.sum(np.abs(T.apply(f)) ** p * wa)
    den = np.sum(np.abs(f) ** p * wa)
    return float((num / den) ** (1 / p)) if den > 0 else 0.0


def weighted_lp_lower_bound(T: OperatorHandle, w, p: float, budget: int = 16,
                            seed: int = 0, ascent_steps: int = 20) -> dict:
    """Lower bound for ``||T||_{L^p(w)}`` by input maximization.

    Candidate ``i`` is drawn from its own seeded stream, so a larger budget
    explores a superset of inputs.  Candidates alternate between random
    fields and indicators of random boxes; each is refined by a fixed-point
    ascent on the ``L^p(w)`` ratio.
    """
    if not p > 1:
        raise InvalidInput("p must lie in (1, inf)")
    g = T.grid
    wa = _weight_array(w, g)
    q = p / (p - 1)
    best, best_i = 0.0, -1
    for i in range(budget):
        rng = np.random.default_rng([seed, i])
        if i % 2 == 0:
            f = rng.standard_normal(g.shape)
        else:
            f = np.zeros(g.shape)
            lo = rng.integers(0, g.n - 1, g.d)
            hi = [int(rng.integers(a + 1, g.n + 1)) for a in lo]
            f[tuple(slice(a, b) for a, b in zip(lo, hi))] = 1.0
        r = _lp_ratio(T, f, wa, p)
        for _ in range(ascent_steps):
            tf = T.apply(f)
            u = T.adjoint(wa * np.abs(tf) ** (p - 2) * tf) / wa
            au = np.abs(u)
            if not np.any(au > 0):
                break
            f_new = au ** (q - 1) * np.exp(1j * np.angle(u))
            r_new = _lp_ratio(T, f_new, wa, p)
            if r_new <= r * (1 + 1e-12):
                if r_new > r:
                    f, r = f_new, r_new
                break
            f, r = f_new, r_new
        if r > best:
            best, best_i = r, i
    return {"value": best, "best_candidate": best_i, "budget": budget, "seed": seed,
            "kind": "lower bound"}


def stein_weiss_check(T: OperatorHandle, w0, w1, p: float, lam: float,
                      tol: float = 1e-6, method: str = "lanczos") -> dict:
    """Interpolation with change of measure at ``p0 = p1 = p = 2``.

    ``w = w0^lam w1^(1-lam)``; passes iff ``M <= M0^lam M1^(1-lam) (1 + tol)``.
    """
    if not 0 <= lam <= 1:
        raise InvalidInput("lambda must lie in [0, 1]")
    if p != 2:
        raise InvalidInput("certified norms exist only for p = 2")
    g = T.grid
    a0 = _weight_array(w0, g)
    a1 = _weight_array(w1, g)
    w = a0 ** lam * a1 ** (1 - lam)
    M = weighted_l2_norm(T, w, method=method).value
    M0 = weighted_l2_norm(T, a0, method=method).value
    M1 = weighted_l2_norm(T, a1, method=method).value
    rhs = M0 ** lam * M1 ** (1 - lam)
    return {"lhs": M, "rhs": rhs, "M0": M0, "M1": M1, "lambda": lam,
            "pass": bool(M <= rhs * (1 + tol))}


# ---------------------------------------------------------------------------
# the epsilon-bump chain and the schedule series


def epsilon_bump_chain(kernel, w: Weight, p: float, schedule, J: int,
                       epsilon: float | None = None, c_bump: float | None = None,
                       family=None, method: str = "lanczos") -> dict:
    """Per-piece interpolation between ``L^2`` and ``L^2(w^(1+eps))``.

    For each ``j <= J``: ``M0`` is the exact unweighted piece norm,
    ``M1`` the measured norm on ``L^2(w^(1+eps))`` and the interpolated
    bound ``M0^(eps/(1+eps)) M1^(1/(1+eps))`` is compared with the
    directly measured norm on ``L^2(w)``.  The characteristic-based bound
    ``(1+N(j)) {w}^(1+eps)`` is reported alongside.
    """
    from . import calibration
    from .lpdecomp import piece_l2_norm

    if p != 2:
        raise InvalidInput("the chain is certified for p = 2 only")
    g = w.grid
    ch = characteristics(w, p, family)
    c_cap = calibration.load()["bump_c"] if c_bump is None else c_bump
    admissible = c_cap / ch.parens
    if epsilon is None:
        epsilon = 0.5 * admissible
    if not 0 <= epsilon <= admissible * (1 + 1e-12):
        raise InvalidInput(f"epsilon={epsilon} outside admissible range [0, {admissible}]")
    wb = w.power(1 + epsilon)
    lam = epsilon / (1 + epsilon)
    rows = []
    for j in range(J + 1):
        T = piece_operator(kernel, schedule, j, g)
        m0 = piece_l2_norm(kernel, schedule, j, g)
        m1 = weighted_l2_norm(T, wb, method=method).value
        direct = weighted_l2_norm(T, w, method=method).value
        interp = m0 ** lam * m1 ** (1 - lam)
        rows.append({
            "j": j, "N": schedule(j), "unweighted": m0, "bumped": m1,
            "interpolated": interp, "direct": direct,
            "char_bound": (1 + schedule(j)) * ch.braces ** (1 + epsilon),
            "pass": bool(direct <= interp * (1 + 1e-6)),
        })
    total = sum(r["interpolated"] for r in rows)
    return {"epsilon": epsilon, "braces": ch.braces, "parens": ch.parens, "rows": rows,
            "total": total, "total_over_chars": total / (ch.braces * ch.parens),
            "pass": all(r["pass"] for r in rows)}


def schedule_series(Lambda: float, schedule, alpha: float, cutoff: float = 1e-12,
                    max_terms: int = 100_000) -> float:
    """``sum_j (1 + N(j)) 2^(-alpha N(j-1) / Lambda)``; the ``j = 0`` term is ``1 + N(0)``."""
    if not alpha > 0 or not Lambda > 0:
        raise InvalidInput("alpha and Lambda must be positive")
    total = 1.0 + schedule(0)
    j = 1
    # block-wise evaluation: terms decrease once N(j-1) >> Lambda / alpha
    while j < max_terms:
        js = np.arange(j, min(j + 256, max_terms))
        N = np.array([schedule(int(k)) for k in js], dtype=float)
        Nprev = np.array([schedule(int(k) - 1) for k in js], dtype=float)
        terms = (1 + N) * np.exp2(-alpha * Nprev / Lambda)
        total += float(terms.sum())
        if terms[-1] < cutoff and np.all(np.diff(terms[len(terms) // 2:]) <= 0):
            return total
        j = int(js[-1]) + 1
        if N[-1] > 1e300:
            return total
    raise ConvergenceError("schedule series did not reach the cutoff", (total, float("inf")))


def schedule_series_bruteforce(Lambda: float, schedule, alpha: float, terms: int = 200_000) -> float:
    """Plain term-by-term summation with ``math.fsum`` (independent oracle)."""
    vals = [1.0 + schedule(0)]
    for j in range(1, terms):
        n_prev = schedule(j - 1)
        if alpha * n_prev / Lambda > 1100:
            break
        vals.append((1 + schedule(j)) * 2.0 ** (-alpha * n_prev / Lambda))
    return math.fsum(vals)


def fit_loglog(x, y, level: float = 0.95) -> dict:
    """Least-squares exponent of ``y ~ x^b`` with a confidence interval."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or np.ptp(np.log(x)) < 1e-9:
        raise InvalidInput("degenerate family: need at least 3 spread abscissae")
    if np.ptp(np.log(y)) < 1e-12:
        raise InvalidInput("degenerate family: all measured values equal")
    res = stats.linregress(np.log(x), np.log(y))
    tq = stats.t.ppf(0.5 + level / 2, x.size - 2)
    half = float(tq * res.stderr)
    return {"exponent": float(res.slope),
            "ci": (float(res.slope - half), float(res.slope + half)),
            "r2": float(res.rvalue ** 2), "intercept": float(res.intercept)}


def schedule_exponent(schedule, alpha: float = 1.0, lambdas=None) -> dict:
    lambdas = [2.0 ** k for k in range(1, 9)] if lambdas is None else list(lambdas)
    vals = [schedule_series(L, schedule, alpha) for L in lambdas]
    brute = [schedule_series_bruteforce(L, schedule, alpha) for L in lambdas]
    fit = fit_loglog(lambdas, vals)
    rel = max(abs(a - b) / b for a, b in zip(vals, brute))
    return {"lambdas": lambdas, "values": vals, "bruteforce": brute,
            "max_rel_diff": rel, **fit}


# ---------------------------------------------------------------------------
# growth experiments


@dataclass
class ExperimentReport:
    rows: list
    fit: dict
    meta: dict = field(default_factory=dict)

    def sorted(self) -> "ExperimentReport":
        return ExperimentReport(sorted(self.rows, key=lambda r: r["param"]), self.fit, self.meta)


def a2_growth_experiment(T: OperatorHandle, weights: Sequence[tuple], p: float = 2.0,
                         bound_scale: float = 1.0, bound_power: float = 1.0,
                         method: str = "lanczos", family=None) -> ExperimentReport:
    """Measured ``||T||_{L^2(w)}`` against ``[w]_{A_2}`` over ``(param, Weight)`` pairs.

    The predicted bound column is ``bound_scale [w]_{A_2}^bound_power``.
    """
    if p != 2:
        raise InvalidInput("growth experiments use certified p = 2 norms")
    if len(weights) < 3:
        raise InvalidInput("degenerate family: need at least 3 weights")
    rows = []
    for param, w in sorted(weights, key=lambda t: t[0]):
        ch = characteristics(w, 2.0, family)
        est = weighted_l2_norm(T, w, method=method)
        bound = bound_scale * ch.ap ** bound_power
        rows.append({"param": param, "a2": ch.ap, "braces": ch.braces, "parens": ch.parens,
                     "norm": est.value, "bound": bound, "ratio": est.value / bound,
                     "converged": est.converged})
    fit = fit_loglog([r["a2"] for r in rows], [r["norm"] for r in rows])
    return ExperimentReport(rows, fit, {"operator": T.descriptor, "method": method})


def beurling_power_experiment(grid: Grid, weights: Sequence[tuple], ms=(1, 2, 4, 8),
                              method: str = "lanczos", family=None, pad: int = 2) -> dict:
    """``||B^m||_{L^2(w)} / (m [w]_{A_2})`` against ``min(1 + log m, [w]_{A_2})``.

    The single constant is the largest observed ratio of the two.
    """
    chars = {param: characteristics(w, 2.0, family) for param, w in weights}
    rows = []
    for m in ms:
        T = beurling_operator(grid, m, pad)
        for param, w in weights:
            a2 = chars[param].ap
            nrm = weighted_l2_norm(T, w, method=method).value
            shape = min(1 + math.log(m), a2)
            rows.append({"m": m, "param": param, "a2": a2, "norm": nrm,
                         "ratio": nrm / (m * a2), "shape": shape,
                         "normalized": nrm / (m * a2) / shape})
    c = max(r["normalized"] for r in rows)
    return {"rows": rows, "c": c,
            "spread": c / min(r["normalized"] for r in rows)}
