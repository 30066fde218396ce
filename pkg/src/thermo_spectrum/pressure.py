"""Partition functions and certified topological-pressure brackets.

Conventions. Z_n(F,t) sums ||Dphi_w||^t over admissible words of length n
from the finite letter set F, with supremum derivative norms. Z_n is
submultiplicative, so (1/n) log Z_n is an upper bound for the pressure
P_F(t) at every n; quasi-multiplicativity (constant K) makes
log Z_n - t log K superadditive, so (1/n)(log Z_n - t log K) is a lower
bound. Infimum-norm partition sums are supermultiplicative and give the
slack-free lower bound (1/n) log Z~_n; both one-sided directions are exact
up to floating point, with recorded slack.

A sharper bracket for Moebius systems conditions each letter on the exact
image ball of the preceding length-L cylinder ("markov" method): the sup and
inf of |phi_a'| over a cylinder image are closed-form, and the resulting
positive transfer matrices pinch the pressure between two Collatz-Wielandt
spectral bounds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .alphabet import GaussianLetter, LetterSet
from .systems import (
    SystemDescriptor,
    ccf_norms_from_s,
    deriv_norm,
    word_deriv_norm,
)

DEFAULT_WORD_BUDGET = 2_000_000
_EPS = np.finfo(np.float64).eps


class BudgetError(RuntimeError):
    pass


def _sum_slack(total: float, n_terms: int) -> float:
    """Directed rounding allowance for a floating sum of n_terms values."""
    bits = max(1, n_terms - 1).bit_length()
    return abs(total) * (bits + 8) * _EPS


@dataclass(frozen=True)
class PressureBracket:
    t: float
    lower: float
    upper: float
    n_used: int
    method: str  # subadditive | superadditive_slack | spectral_exact | tail_augmented | markov
    slack: float = 0.0
    norm_form: str = "sup"
    z_value: Optional[float] = None

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"inverted bracket [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class BowenBracket:
    F: str
    h_lower: float
    h_upper: float
    iterations: int
    slack: float = 0.0
    sufficient_n: Optional[int] = None

    def __post_init__(self):
        if self.h_lower > self.h_upper:
            raise ValueError("inverted Bowen bracket")


def _letters_of(F) -> list:
    if isinstance(F, LetterSet):
        if F.cofinite:
            raise ValueError("partition sums need a finite letter set")
        return list(F.letters)
    return list(F)


def _ccf_partition(letters: Sequence[GaussianLetter], n: int, t: float,
                   form: str, budget: int) -> Tuple[float, float]:
    """(Z_n, slack) for complex_cf via the vectorized continuant recursion."""
    d = len(letters)
    if d == 0:
        raise ValueError("empty letter set")
    if d ** n > budget:
        raise BudgetError(f"{d}^{n} words exceed the {budget}-word budget")
    max_abs = max(math.hypot(e.m, e.n) for e in letters)
    # continuants stay exactly representable in float64 while below 2^53
    if n * math.log2(2.0 * max_abs + 2.0) > 52.0:
        sys_ccf = SystemDescriptor("complex_cf")
        total = math.fsum(
            word_deriv_norm(sys_ccf, w, form) ** t
            for w in itertools.product(letters, repeat=n)
        )
        return total, _sum_slack(total, d ** n)
    arr = np.array([complex(e.m, e.n) for e in letters])
    qp = np.ones(d, dtype=np.complex128)
    qc = arr.copy()
    for _ in range(n - 1):
        qp, qc = (
            np.repeat(qc, d),
            (qc[:, None] * arr[None, :]).ravel() + np.repeat(qp, d),
        )
    big = np.abs(2.0 * qc + qp)
    small = np.abs(qp)
    base = big - small if form == "sup" else big + small
    vals = (4.0 / base ** 2) ** t
    total = float(np.sum(vals))
    return total, _sum_slack(total, vals.size)


def _real_cf_partition(letters, n: int, t: float, form: str, budget: int):
    ms = [e.m if isinstance(e, GaussianLetter) else int(e) for e in letters]
    d = len(ms)
    if d == 0:
        raise ValueError("empty letter set")
    if d ** n > budget:
        raise BudgetError(f"{d}^{n} words exceed the {budget}-word budget")
    arr = np.array(ms, dtype=np.float64)
    qp = np.ones(d)
    qc = arr.copy()
    for _ in range(n - 1):
        qp, qc = np.repeat(qc, d), (qc[:, None] * arr[None, :]).ravel() + np.repeat(qp, d)
    base = qc if form == "sup" else qc + qp
    vals = base ** (-2.0 * t)
    total = float(np.sum(vals))
    return total, _sum_slack(total, vals.size)


def _gdms_partition(system: SystemDescriptor, letters, n: int, t: float):
    idx = list(range(len(system.ratios))) if letters is None else list(letters)
    r = np.array([system.ratios[i] for i in idx], dtype=np.float64)
    A = system.incidence_array()[np.ix_(idx, idx)]
    M = A * (r[None, :] ** t)
    u = r ** t
    v = np.ones(len(idx))
    for _ in range(n - 1):
        v = M @ v
    total = float(u @ v)
    return total, _sum_slack(total, len(idx) ** n)


def partition_function(system: SystemDescriptor, F, n: int, t: float,
                       norm_form: str = "sup",
                       budget: int = DEFAULT_WORD_BUDGET) -> float:
    """Z_n(F,t): sum of word derivative norms to the power t over admissible
    length-n words from F."""
    value, _ = partition_function_with_slack(system, F, n, t, norm_form, budget)
    return value


def partition_function_with_slack(system: SystemDescriptor, F, n: int, t: float,
                                  norm_form: str = "sup",
                                  budget: int = DEFAULT_WORD_BUDGET):
    if n < 1:
        raise ValueError("word length must be >= 1")
    if t < 0:
        raise ValueError("exponent must be >= 0")
    if system.kind == "complex_cf":
        return _ccf_partition(_letters_of(F), n, t, norm_form, budget)
    if system.kind == "real_cf":
        return _real_cf_partition(_letters_of(F), n, t, norm_form, budget)
    if system.kind == "finite_gdms":
        return _gdms_partition(system, F, n, t)
    # similarity kinds: the full product set factorizes exactly
    if system.kind == "similarity_ifs":
        ratios = [system.ratios[i] for i in F] if F is not None else list(system.ratios)
    else:  # linearized_cf
        ratios = [deriv_norm(system, e) for e in _letters_of(F)]
    if len(ratios) == 0:
        raise ValueError("empty letter set")
    if len(ratios) ** n > budget:
        raise BudgetError(f"{len(ratios)}^{n} words exceed the {budget}-word budget")
    z1 = math.fsum(r ** t for r in ratios)
    total = z1 ** n
    return total, _sum_slack(total, len(ratios) ** n)


def spectral_radius_bracket(M: np.ndarray, iters: int = 5000,
                            tol: float = 1e-14) -> Tuple[float, float]:
    """Collatz-Wielandt bracket for the Perron root of a nonnegative matrix.

    For every positive v: min_i (Mv)_i/v_i <= rho(M) <= max_i (Mv)_i/v_i.
    Both sides are certified for every iterate, so the running extremes give
    a valid bracket even before convergence.
    """
    n = M.shape[0]
    v = np.ones(n)
    lo, hi = 0.0, math.inf
    for _ in range(iters):
        w = M @ v
        wmax = float(w.max())
        if wmax <= 0.0:
            return 0.0, 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(v > 0, w / v, math.inf)
        lo = max(lo, float(np.min(r)))
        hi = min(hi, float(np.max(w / np.where(v > 0, v, 1.0))) if np.all(v > 0) else hi)
        if hi - lo <= tol * max(hi, 1.0):
            break
        v = w / wmax
    return lo, hi


def _gdms_spectral_bracket(system: SystemDescriptor, F, t: float) -> PressureBracket:
    idx = list(range(len(system.ratios))) if F is None else list(F)
    r = np.array([system.ratios[i] for i in idx], dtype=np.float64)
    A = system.incidence_array()[np.ix_(idx, idx)]
    M = A * (r[None, :] ** t)
    lo, hi = spectral_radius_bracket(M)
    if lo <= 0.0:
        raise ValueError("incidence admits no cycle through the chosen letters")
    return PressureBracket(t, math.log(lo), math.log(hi), 1, "spectral_exact",
                           slack=hi - lo)


def pressure_bracket(system: SystemDescriptor, F, n: int, t: float,
                     norm_form: str = "sup",
                     budget: int = DEFAULT_WORD_BUDGET) -> PressureBracket:
    """Certified bracket for P_F(t).

    Full-shift kinds with norm_form "sup" give
    [ (log Z_n - t log K)/n, (log Z_n)/n ]  (method superadditive_slack).
    norm_form "pair" replaces the lower edge with the slack-free
    supermultiplicative (1/n) log Z~_n from infimum norms (method
    inf_sup_pair). finite_gdms is an exact spectral radius.
    """
    if system.kind == "finite_gdms":
        return _gdms_spectral_bracket(system, F, t)
    z, slack = partition_function_with_slack(system, F, n, t, "sup", budget)
    upper = math.log(z + slack) / n
    if norm_form == "pair":
        zi, slack_i = partition_function_with_slack(system, F, n, t, "inf", budget)
        lower = math.log(max(zi - slack_i, 1e-300)) / n
        return PressureBracket(t, lower, upper, n, "inf_sup_pair",
                               slack=(slack + slack_i) / max(z, 1e-300), z_value=z)
    lower = (math.log(max(z - slack, 1e-300)) - t * math.log(system.distortion_K)) / n
    return PressureBracket(t, lower, upper, n, "superadditive_slack",
                           slack=slack / max(z, 1e-300), z_value=z)


# ---------------------------------------------------------------------------
# depth-L conditioned bracket for Moebius systems

@lru_cache(maxsize=32)
def _context_balls(letters_key: tuple, depth: int):
    """Exact image balls of all depth-L cylinders, as (centers, radii)."""
    letters = [complex(m, n) for (m, n) in letters_key]
    d = len(letters)
    n_ctx = d ** depth
    centers = np.empty(n_ctx, dtype=np.complex128)
    radii = np.empty(n_ctx, dtype=np.float64)
    z0, r0 = complex(0.5, 0.0), 0.5
    for i, ctx in enumerate(itertools.product(range(d), repeat=depth)):
        e0 = letters[ctx[0]]
        a, b, c, dd = complex(0), complex(1), complex(1), e0
        for j in ctx[1:]:
            ec = letters[j]
            a, b, c, dd = b, a + b * ec, dd, c + dd * ec
        u = c * z0 + dd
        den = abs(u) ** 2 - abs(c) ** 2 * r0 * r0
        centers[i] = ((a * z0 + b) * u.conjugate() - a * c.conjugate() * r0 * r0) / den
        radii[i] = abs(a * dd - b * c) * r0 / den
    return centers, radii


def _markov_step(T: np.ndarray, v: np.ndarray, d: int) -> np.ndarray:
    # context v = (w_1..w_L) indexed base-d; prepending letter a moves mass
    # to a*d^(L-1) + v//d with weight T[a, v]
    n_ctx = v.size
    vv = v.reshape(n_ctx // d, d)
    Tr = T.reshape(d, n_ctx // d, d)
    return np.einsum("agl,gl->ag", Tr, vv).reshape(n_ctx)


def auto_depth(n_letters: int, cap: int = 300_000) -> int:
    depth = 1
    while n_letters ** (depth + 1) <= cap and depth < 8:
        depth += 1
    return depth


def markov_bracket(system: SystemDescriptor, letters: Sequence[GaussianLetter],
                   t: float, depth: Optional[int] = None,
                   iters: int = 4000, tol: float = 1e-12) -> PressureBracket:
    """Pressure bracket conditioning each letter on the exact image ball of
    the preceding depth-L cylinder; complex_cf only."""
    if system.kind != "complex_cf":
        raise ValueError("markov brackets are implemented for complex_cf")
    letters = list(letters)
    d = len(letters)
    if d == 0:
        raise ValueError("empty letter set")
    if depth is None:
        depth = auto_depth(d)
    key = tuple((e.m, e.n) for e in letters)
    centers, radii = _context_balls(key, depth)
    arr = np.array([complex(e.m, e.n) for e in letters])
    dist = np.abs(arr[:, None] + centers[None, :])
    base_sup = dist - radii[None, :]
    base_inf = dist + radii[None, :]

    def cw(T, want_hi: bool) -> float:
        v = np.ones(d ** depth)
        lo, hi = 0.0, math.inf
        for _ in range(iters):
            w = _markov_step(T, v, d)
            r = w / v
            lo = max(lo, float(r.min()))
            hi = min(hi, float(r.max()))
            if hi - lo <= tol * hi:
                break
            v = w / w.max()
        return hi if want_hi else lo

    p_hi = math.log(cw(base_sup ** (-2.0 * t), True))
    p_lo = math.log(cw(base_inf ** (-2.0 * t), False))
    return PressureBracket(t, p_lo, p_hi, depth, "markov")


# ---------------------------------------------------------------------------
# Bowen parameter bisection

def _pressure_curves(system: SystemDescriptor, F, n: int, method: str,
                     budget: int):
    """Returns (lower(t), upper(t)) callables, both certified one-sided."""
    if system.kind == "finite_gdms":
        def lower(t):
            return _gdms_spectral_bracket(system, F, t).lower

        def upper(t):
            return _gdms_spectral_bracket(system, F, t).upper

        return lower, upper
    if method == "markov" and system.kind == "complex_cf":
        letters = _letters_of(F)

        def lower(t):
            return markov_bracket(system, letters, t).lower

        def upper(t):
            return markov_bracket(system, letters, t).upper

        return lower, upper

    def lower(t):
        return pressure_bracket(system, F, n, t, budget=budget).lower

    def upper(t):
        return pressure_bracket(system, F, n, t, budget=budget).upper

    return lower, upper


def bowen_bisect(system: SystemDescriptor, F, t_lo: float, t_hi: float,
                 tol: float = 1e-6, n: int = 2, method: str = "auto",
                 budget: int = DEFAULT_WORD_BUDGET) -> BowenBracket:
    """Bracket the Bowen parameter h = inf{t : P(t) <= 0} by bisection.

    h_upper is the smallest tested t with certified upper pressure <= 0;
    h_lower the largest tested t with certified lower pressure >= 0. Pressure
    is strictly decreasing in t, which makes both bisections monotone. For
    full-shift kinds with K > 1 the lower curve carries slack (t log K)/n;
    the bracket then reports the minimal n that would meet tol instead of
    failing.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lower, upper = _pressure_curves(system, F, n, method, budget)
    up_hi = upper(t_hi)
    lo_lo = lower(t_lo)
    if not (up_hi <= 0.0 < lo_lo):
        raise ValueError(
            f"invalid initial signs: need upper({t_hi}) <= 0 < lower({t_lo}), "
            f"got upper={up_hi:.6g}, lower={lo_lo:.6g}")
    iterations = 0

    a, b = t_lo, t_hi
    exact_hit = None
    while b - a > tol:
        mid = 0.5 * (a + b)
        iterations += 1
        pu = upper(mid)
        if pu == 0.0:
            exact_hit = mid
            break
        if pu <= 0.0:
            b = mid
        else:
            a = mid
    h_upper = exact_hit if exact_hit is not None else b

    a, b = t_lo, t_hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        iterations += 1
        if lower(mid) >= 0.0:
            a = mid
        else:
            b = mid
    h_lower = exact_hit if exact_hit is not None else a

    slack = 0.0
    sufficient_n = None
    if system.kind in ("complex_cf", "real_cf") and method != "markov":
        slack = t_hi * math.log(system.distortion_K) / n
        if slack > tol:
            sufficient_n = math.ceil(2.0 * t_hi * math.log(system.distortion_K) / tol)
    tag = F.tag if isinstance(F, LetterSet) else str(F)
    return BowenBracket(tag, min(h_lower, h_upper), h_upper, iterations,
                        slack=slack, sufficient_n=sufficient_n)


def add_letter_bounds(system: SystemDescriptor, F, e, t: float,
                      pF: PressureBracket) -> Tuple[float, float]:
    """Bracket for exp(P_{F + {e}}(t)) from a bracket for P_F(t):
    adding one letter to a full shift perturbs exp(P) by at least
    K^-t ||phi_e'||^t and at most K^t ||phi_e'||^t."""
    if system.kind == "finite_gdms":
        raise ValueError("one-letter perturbation bounds need the IFS (full shift) case")
    if isinstance(F, LetterSet) and e in F:
        raise ValueError(f"letter {e} already in the set")
    k = system.distortion_K
    nrm = deriv_norm(system, e) ** t
    return (math.exp(pF.lower) + nrm / k ** t, math.exp(pF.upper) + nrm * k ** t)


# ---------------------------------------------------------------------------
# tail sums over the Gaussian grid

def _grid_sums(t: float, R: int, kind: str) -> Tuple[float, float]:
    """(sum over the box max(m,|n|) <= R, slack) of single-letter norms^t."""
    m = np.arange(1, R + 1, dtype=np.float64)
    n = np.arange(0, R + 1, dtype=np.float64)
    mm, nn = np.meshgrid(m, n, indexing="ij")
    if kind == "linearized_cf":
        vals = (mm * mm + nn * nn + mm) ** (-t)
    else:
        s = (2.0 * mm + 1.0) ** 2 + 4.0 * nn * nn
        vals = (4.0 / (np.sqrt(s) - 1.0) ** 2) ** t
    # n >= 1 rows count twice by conjugation symmetry
    total = 2.0 * float(np.sum(vals)) - float(np.sum(vals[:, 0]))
    return total, _sum_slack(total, 2 * vals.size)


def shell_majorant(t: float, R: int) -> float:
    """Upper bound for the sum of norms^t over letters with max(m,|n|) > R.

    The shell at radius r holds exactly (2r+1) + 2(r-1) = 4r-1 letters, each
    with norm at most (r - 1/2)^-2; 4r-1 <= 6(r-1/2) and an integral
    comparison of the decreasing summand give 6 u^(2-2t) / (2t-2), u = R-1/2.
    """
    if t <= 1.0:
        return math.inf
    u = R - 0.5
    return 6.0 * u ** (2.0 - 2.0 * t) / (2.0 * t - 2.0)


def tail_sum(system: SystemDescriptor, excluded, t: float, R: int = 4000) -> Tuple[float, float]:
    """Bracket for the sum of ||phi_e'||^t over all letters outside
    `excluded`. Lower bound: explicit box sum minus excluded letters; upper
    bound adds the shell majorant. For t <= 1 the series diverges and the
    upper bound is +inf."""
    if system.kind in ("similarity_ifs", "finite_gdms"):
        ex_idx = set() if excluded is None else set(excluded)
        total = math.fsum(r ** t for i, r in enumerate(system.ratios) if i not in ex_idx)
        slack = _sum_slack(total, len(system.ratios))
        return max(0.0, total - slack), total + slack
    ex_letters = []
    if excluded is not None:
        ex_letters = _letters_of(excluded)
    if system.kind == "real_cf":
        ns = np.arange(1, R + 1, dtype=np.float64)
        total = float(np.sum(ns ** (-2.0 * t)))
        slack = _sum_slack(total, R)
        ex = math.fsum((e.m if isinstance(e, GaussianLetter) else int(e)) ** (-2.0 * t)
                       for e in ex_letters)
        rem = (R + 0.0) ** (1.0 - 2.0 * t) / (2.0 * t - 1.0) if t > 0.5 else math.inf
        lower = max(0.0, total - ex - slack)
        return lower, (total - ex + slack + rem if rem != math.inf else math.inf)
    for e in ex_letters:
        if max(e.m, abs(e.n)) > R:
            raise ValueError("truncation radius must cover the excluded set")
    box, slack = _grid_sums(t, R, system.kind)
    ex = math.fsum(deriv_norm(system, e) ** t for e in ex_letters)
    lower = max(0.0, box - ex - slack)
    upper_rem = shell_majorant(t, R)
    if upper_rem == math.inf:
        return lower, math.inf
    return lower, box - ex + slack + upper_rem


def shell_count(r: int) -> int:
    """Exact number of letters with max(m, |n|) = r (m >= 1)."""
    return (2 * r + 1) + 2 * (r - 1)


# ---------------------------------------------------------------------------
# finiteness exponents for the built-in example families

def _growth_exponent(term, t: float, n0: int = 1 << 12, rounds: int = 6) -> float:
    """log2 ratio of successive dyadic block sums of term(n, t); negative
    means the series converges (regularly varying terms). term applies the
    exponent itself so that steep families do not underflow first."""
    lo_n = n0
    prev = None
    last = 0.0
    for _ in range(rounds):
        n = np.arange(lo_n, 2 * lo_n, dtype=np.float64)
        block = float(np.sum(term(n, t)))
        if prev is not None and block > 0 and prev > 0:
            last = math.log2(block / prev)
        prev = block
        lo_n *= 2
    return last


def _theta_bisect(term, lo: float, hi: float, tol: float = 2.5e-4) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _growth_exponent(term, mid) < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def theta_examples_check() -> dict:
    """Finiteness exponents of the built-in one-parameter families, located
    numerically from dyadic block growth, plus the second-order bound for
    the harmonic family."""
    fam2 = lambda n, t: n ** (-2.0 * t)   # two extra letters of ratio 1/2 do not move theta
    fam3 = lambda n, t: np.exp(-n * t)
    fam5 = lambda n, t: n ** (-t)
    theta2 = _theta_bisect(fam2, 0.25, 1.0)
    # exponential family: convergent at every positive t
    theta3 = 0.0 if _growth_exponent(fam3, 1e-3) < 0 else math.nan
    theta5 = _theta_bisect(fam5, 0.5, 1.5)
    # pairwise sums of the harmonic family collapse to 2 sum (n(n+1))^-t,
    # convergent for every t > 1/2, so the second exponent is at most 1/2
    fam5_pair = lambda n, t: (n * (n + 1.0)) ** (-t)
    eps = 1e-3
    theta5_second_ok = _growth_exponent(fam5_pair, 0.5 + eps) < 0.0
    return {
        "inverse_square": theta2,
        "exponential": theta3,
        "harmonic": theta5,
        "harmonic_second_upper": 0.5 + eps if theta5_second_ok else math.inf,
    }
