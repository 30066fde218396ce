"""System descriptors and exact derivative-norm rules.

Supported kinds:
  complex_cf     inverse branches z -> 1/(e+z) on the disk |z - 1/2| <= 1/2,
                 letters e = m+ni with m >= 1, distortion constant 4
  real_cf        x -> 1/(n+x) on [0,1], integer letters n >= 1
  linearized_cf  similarity family with ratios 1/(m^2+n^2+m) on the
                 complex-CF letter grid, distortion 1
  similarity_ifs explicit finite list of contraction ratios, distortion 1
  finite_gdms    finite letter set with a 0/1 incidence matrix and
                 per-letter similarity ratios, distortion 1

Word derivative norms for the Moebius kinds come from the continuant
recursion q_k = w_k q_{k-1} + q_{k-2} (q_0 = 1, q_1 = w_1), carried over
exact Gaussian integers up to a configurable length and switched to scaled
floats beyond it. For complex_cf the supremum norm over the disk is

    sup |phi_w'| = 4 / (|2 q_n + q_{n-1}| - |q_{n-1}|)^2

with the minus sign (the infimum takes the plus sign); the minus form is the
one that matches dense boundary sampling of |phi_w'|.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from .alphabet import GaussianLetter

EXACT_CONTINUANT_LEN = 32


@dataclass(frozen=True)
class SystemDescriptor:
    kind: str
    ratios: Optional[tuple] = None
    letters: Optional[tuple] = None
    incidence: Optional[tuple] = None  # tuple of tuples, 0/1

    _KINDS = ("complex_cf", "real_cf", "linearized_cf", "similarity_ifs", "finite_gdms")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind == "similarity_ifs":
            if not self.ratios or any(not (0 < r < 1) for r in self.ratios):
                raise ValueError("similarity_ifs needs ratios in (0,1)")
        if self.kind == "finite_gdms":
            if self.incidence is None or self.ratios is None:
                raise ValueError("finite_gdms needs incidence and ratios")
            d = len(self.ratios)
            if len(self.incidence) != d or any(len(row) != d for row in self.incidence):
                raise ValueError("incidence must be square and match ratios")

    @property
    def distortion_K(self) -> float:
        if self.kind == "complex_cf":
            return 4.0
        if self.kind == "real_cf":
            return 4.0
        return 1.0

    @property
    def n_letters(self) -> Optional[int]:
        if self.ratios is not None:
            return len(self.ratios)
        return None  # countably infinite kinds

    def incidence_array(self) -> np.ndarray:
        return np.asarray(self.incidence, dtype=np.float64)

    def to_json(self) -> str:
        d = {"kind": self.kind}
        if self.ratios is not None:
            d["ratios"] = list(self.ratios)
        if self.letters is not None:
            d["letters"] = list(self.letters)
        if self.incidence is not None:
            d["incidence"] = [list(r) for r in self.incidence]
        return json.dumps(d)

    @staticmethod
    def from_json(text: str) -> "SystemDescriptor":
        d = json.loads(text)
        return SystemDescriptor(
            kind=d["kind"],
            ratios=tuple(d["ratios"]) if "ratios" in d else None,
            letters=tuple(d["letters"]) if "letters" in d else None,
            incidence=tuple(tuple(r) for r in d["incidence"]) if "incidence" in d else None,
        )


COMPLEX_CF = SystemDescriptor("complex_cf")
REAL_CF = SystemDescriptor("real_cf")
LINEARIZED_CF = SystemDescriptor("linearized_cf")


def deriv_norm(system: SystemDescriptor, e) -> float:
    """Supremum of |phi_e'| over the system's domain, single letter."""
    if system.kind == "complex_cf":
        s = e.s_key
        return 4.0 / (math.sqrt(s) - 1.0) ** 2
    if system.kind == "real_cf":
        m = e.m if isinstance(e, GaussianLetter) else int(e)
        return 1.0 / (m * m)
    if system.kind == "linearized_cf":
        return 1.0 / (e.m * e.m + e.n * e.n + e.m)
    return float(system.ratios[e])


def deriv_norm_inf(system: SystemDescriptor, e) -> float:
    """Infimum of |phi_e'| over the domain (equals the sup for similarities)."""
    if system.kind == "complex_cf":
        s = e.s_key
        return 4.0 / (math.sqrt(s) + 1.0) ** 2
    if system.kind == "real_cf":
        m = e.m if isinstance(e, GaussianLetter) else int(e)
        return 1.0 / ((m + 1.0) * (m + 1.0))
    return deriv_norm(system, e)


def ccf_norms_from_s(s: np.ndarray, form: str = "sup") -> np.ndarray:
    """Vectorized single-letter norms from integer keys S = (2m+1)^2 + 4n^2."""
    root = np.sqrt(s.astype(np.float64))
    if form == "sup":
        return 4.0 / (root - 1.0) ** 2
    if form == "inf":
        return 4.0 / (root + 1.0) ** 2
    raise ValueError(f"unknown norm form {form!r}")


class ContinuantState:
    """Continuant pair (q_{k-1}, q_k) over Gaussian integers.

    Exact integer arithmetic while the word is short; beyond
    EXACT_CONTINUANT_LEN the pair is carried as complex floats normalized by
    a tracked log scale, which only the final magnitudes depend on.
    """

    __slots__ = ("length", "exact", "qp", "qc", "fqp", "fqc", "log_scale")

    def __init__(self):
        self.length = 0
        self.exact = True
        self.qp = (1, 0)   # q_{k-1}, starts at q_0 = 1
        self.qc = (1, 0)   # placeholder until the first letter arrives
        self.fqp = complex(1.0)
        self.fqc = complex(1.0)
        self.log_scale = 0.0

    def step(self, e) -> "ContinuantState":
        if isinstance(e, GaussianLetter):
            er, ei = e.m, e.n
        else:
            er, ei = int(e), 0
        out = ContinuantState()
        out.length = self.length + 1
        if self.exact and out.length <= EXACT_CONTINUANT_LEN:
            if self.length == 0:
                out.qp, out.qc = (1, 0), (er, ei)
            else:
                a, b = self.qc
                p, q = self.qp
                # q_next = e * q_cur + q_prev, Gaussian product
                out.qp = self.qc
                out.qc = (er * a - ei * b + p, er * b + ei * a + q)
            out.exact = True
            return out
        out.exact = False
        if self.exact:
            fqp = complex(*self.qp)
            fqc = complex(*self.qc)
            scale = 0.0
        else:
            fqp, fqc, scale = self.fqp, self.fqc, self.log_scale
        if self.length == 0:
            out.fqp, out.fqc = complex(1.0), complex(er, ei)
        else:
            out.fqp = fqc
            out.fqc = complex(er, ei) * fqc + fqp
        mag = abs(out.fqc)
        if mag > 1e100 or (0 < mag < 1e-100):
            out.fqp /= mag
            out.fqc /= mag
            scale += math.log(mag)
        out.log_scale = scale
        return out

    def pair_abs(self) -> Tuple[float, float, float]:
        """(|2 q_n + q_{n-1}|, |q_{n-1}|, log_scale)."""
        if self.length == 0:
            raise ValueError("empty word has no continuant norm")
        if self.exact:
            a, b = self.qc
            p, q = self.qp
            big = math.hypot(2 * a + p, 2 * b + q)
            small = math.hypot(p, q)
            return big, small, 0.0
        big = abs(2.0 * self.fqc + self.fqp)
        small = abs(self.fqp)
        return big, small, self.log_scale


def _ccf_word_norm(word: Sequence, form: str) -> float:
    st = ContinuantState()
    for e in word:
        st = st.step(e)
    big, small, log_scale = st.pair_abs()
    base = big - small if form == "sup" else big + small
    # norm = 4 / (scale * base)^2
    log_norm = math.log(4.0) - 2.0 * (log_scale + math.log(base))
    return math.exp(log_norm)


def word_deriv_norm(system: SystemDescriptor, word: Sequence, form: str = "sup") -> float:
    """Exact sup (or inf) of |phi_w'| over the domain for a composed word."""
    if len(word) == 0:
        return 1.0
    if form not in ("sup", "inf"):
        raise ValueError(f"unknown norm form {form!r}")
    if system.kind == "complex_cf":
        return _ccf_word_norm(word, form)
    if system.kind == "real_cf":
        st = ContinuantState()
        for e in word:
            st = st.step(e)
        if st.exact:
            qn = st.qc[0]
            qp = st.qp[0]
            val = qn if form == "sup" else qn + qp
            return 1.0 / float(val) ** 2
        qn = abs(st.fqc.real) if form == "sup" else abs(st.fqc.real + st.fqp.real)
        return math.exp(-2.0 * (st.log_scale + math.log(qn)))
    # similarity kinds: norms multiply exactly
    prod = 1.0
    for e in word:
        prod *= deriv_norm(system, e)
    return prod


def word_deriv_bracket(system: SystemDescriptor, word: Sequence) -> Tuple[float, float]:
    """Quasi-multiplicativity bracket [K^-(len-1) * prod, prod] from
    single-letter norms; valid for every kind, tight when K = 1."""
    prod = 1.0
    for e in word:
        prod *= deriv_norm(system, e)
    k = system.distortion_K
    return prod * k ** (-(len(word) - 1)) if word else 1.0, prod


def is_admissible(system: SystemDescriptor, word: Sequence) -> bool:
    if system.kind != "finite_gdms":
        return True
    inc = system.incidence
    return all(inc[word[i]][word[i + 1]] for i in range(len(word) - 1))


def enumerate_words(system: SystemDescriptor, letters: Sequence, n: int) -> Iterator[tuple]:
    """All admissible words of length n over the given letters."""
    if n == 0:
        yield ()
        return
    if system.kind != "finite_gdms":
        idx = [0] * n
        count = len(letters)
        while True:
            yield tuple(letters[i] for i in idx)
            j = n - 1
            while j >= 0:
                idx[j] += 1
                if idx[j] < count:
                    break
                idx[j] = 0
                j -= 1
            if j < 0:
                return
    else:
        inc = system.incidence

        def rec(prefix):
            if len(prefix) == n:
                yield tuple(prefix)
                return
            for e in letters:
                if prefix and not inc[prefix[-1]][e]:
                    continue
                prefix.append(e)
                yield from rec(prefix)
                prefix.pop()

        yield from rec([])


def phi_image_ball(system: SystemDescriptor, e: GaussianLetter) -> Tuple[float, float, float]:
    """Exact image phi_e(X) of the domain disk, as (center_x, center_y, radius).

    For complex_cf the image of |z - 1/2| <= 1/2 under 1/(e+z) is the disk
    centered at ((m+1/2) - ni)/d with radius 1/(2d), d = m^2 + n^2 + m; the
    diameter is 1/d.
    """
    if system.kind != "complex_cf":
        raise ValueError("image balls are defined for complex_cf only")
    d = e.m * e.m + e.n * e.n + e.m
    return ((e.m + 0.5) / d, -e.n / d, 0.5 / d)


def word_image_ball(system: SystemDescriptor, word: Sequence) -> Tuple[complex, float]:
    """Exact image phi_w(X) for complex_cf, as (center, radius).

    Composes the Moebius coefficient matrix exactly (Python ints) and maps
    the domain disk through it in closed form.
    """
    if system.kind != "complex_cf":
        raise ValueError("image balls are defined for complex_cf only")
    if not word:
        return complex(0.5, 0.0), 0.5
    e0 = word[0]
    a, b, c, d = complex(0), complex(1), complex(1), complex(e0.m, e0.n)
    for e in word[1:]:
        ec = complex(e.m, e.n)
        a, b, c, d = b, a + b * ec, d, c + d * ec
    z0, r = complex(0.5, 0.0), 0.5
    u = c * z0 + d
    den = abs(u) ** 2 - abs(c) ** 2 * r * r
    ctr = ((a * z0 + b) * u.conjugate() - a * c.conjugate() * r * r) / den
    rad = abs(a * d - b * c) * r / den
    return ctr, rad
