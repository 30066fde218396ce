"""Gaussian-integer alphabet for complex continued fraction systems.

Letters are e = m + ni with m >= 1, n in Z. The natural order sorts by the
exact integer key S(e) = (2m+1)^2 + 4n^2 (monotone in the contraction
strength), breaking ties by ascending m, then |n|, then n > 0 before n < 0.
All comparisons are exact integer comparisons, so enumeration is
deterministic and extension never reorders a previously returned prefix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np


@dataclass(frozen=True)
class GaussianLetter:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"letter real part must be >= 1, got {self.m}")

    @property
    def s_key(self) -> int:
        # exact integer, 4 * (m^2 + m + n^2) + 1
        return (2 * self.m + 1) ** 2 + 4 * self.n * self.n

    def natural_key(self) -> tuple:
        return (self.s_key, self.m, abs(self.n), 0 if self.n > 0 else 1)

    def conjugate(self) -> "GaussianLetter":
        return GaussianLetter(self.m, -self.n)

    def to_complex(self) -> complex:
        return complex(self.m, self.n)

    def __str__(self) -> str:
        if self.n == 0:
            return f"{self.m}"
        sign = "+" if self.n > 0 else "-"
        return f"{self.m}{sign}{abs(self.n)}i"

    @staticmethod
    def from_str(s: str) -> "GaussianLetter":
        s = s.strip().replace(" ", "")
        if not s.endswith("i"):
            return GaussianLetter(int(s), 0)
        body = s[:-1]
        for k in range(len(body) - 1, 0, -1):
            if body[k] in "+-":
                m = int(body[:k])
                n = int(body[k:].replace("+", ""))
                return GaussianLetter(m, n)
        raise ValueError(f"cannot parse letter {s!r}")


def natural_key(m, n):
    """Vectorized natural-order key, returned as sortable columns."""
    m = np.asarray(m, dtype=np.int64)
    n = np.asarray(n, dtype=np.int64)
    s = (2 * m + 1) ** 2 + 4 * n * n
    return s, m, np.abs(n), np.where(n > 0, 0, 1)


def _complete_pool(s_max: int):
    """All letters with S(e) <= s_max, as (m, n, S) arrays in natural order.

    The grid half-width isqrt(s_max)//2 + 2 covers every candidate: S >= (2m+1)^2
    and S >= 4n^2 force m, |n| <= sqrt(s_max)/2.
    """
    half = math.isqrt(s_max) // 2 + 2
    m = np.arange(1, half + 1, dtype=np.int64)
    n = np.arange(-half, half + 1, dtype=np.int64)
    mm, nn = np.meshgrid(m, n, indexing="ij")
    mm = mm.ravel()
    nn = nn.ravel()
    ss = (2 * mm + 1) ** 2 + 4 * nn * nn
    keep = ss <= s_max
    mm, nn, ss = mm[keep], nn[keep], ss[keep]
    order = np.lexsort((np.where(nn > 0, 0, 1), np.abs(nn), mm, ss))
    return mm[order], nn[order], ss[order]


class OrderedAlphabet:
    """Cached natural-order enumeration of E = {m + ni : m >= 1}.

    Indexing is 1-based to match e_1, e_2, ... usage. The cache only ever
    grows; prefixes are stable under extension because the pool is regenerated
    S-complete (every letter with key below the current frontier is present
    before the frontier is crossed).
    """

    def __init__(self, nonneg_only: bool = False):
        self.nonneg_only = nonneg_only
        self._m = np.empty(0, dtype=np.int64)
        self._n = np.empty(0, dtype=np.int64)
        self._s = np.empty(0, dtype=np.int64)
        self._s_bound = 0

    def __len__(self) -> int:
        return int(self._m.size)

    def _grow_to_s(self, s_bound: int):
        if s_bound <= self._s_bound:
            return
        mm, nn, ss = _complete_pool(s_bound)
        if self.nonneg_only:
            keep = nn >= 0
            mm, nn, ss = mm[keep], nn[keep], ss[keep]
        self._m, self._n, self._s = mm, nn, ss
        self._s_bound = s_bound

    def extend_to(self, count: int):
        if count <= len(self):
            return
        s_bound = max(self._s_bound, 64)
        while True:
            # density of E in the disk S <= B is about B*pi/8; double until enough
            s_bound *= 2
            self._grow_to_s(s_bound)
            if len(self) >= count:
                return

    def extend_to_s(self, s_bound: int):
        """Make the cache S-complete up to the given key bound."""
        self._grow_to_s(int(s_bound))

    def letter(self, k: int) -> GaussianLetter:
        if k < 1:
            raise IndexError("letters are 1-indexed")
        self.extend_to(k)
        return GaussianLetter(int(self._m[k - 1]), int(self._n[k - 1]))

    def prefix(self, count: int) -> list:
        self.extend_to(count)
        return [GaussianLetter(int(self._m[i]), int(self._n[i])) for i in range(count)]

    def arrays(self, count: Optional[int] = None):
        """(m, n, S) arrays of the first `count` letters (all cached if None)."""
        if count is not None:
            self.extend_to(count)
            return self._m[:count], self._n[:count], self._s[:count]
        return self._m, self._n, self._s

    def index_of(self, e: GaussianLetter) -> int:
        """1-based position of e in the natural order."""
        self._grow_to_s(max(self._s_bound, e.s_key + 1))
        hit = np.flatnonzero((self._m == e.m) & (self._n == e.n))
        if hit.size == 0:
            raise KeyError(f"letter {e} not in alphabet")
        return int(hit[0]) + 1


_FULL = OrderedAlphabet()
_NONNEG = OrderedAlphabet(nonneg_only=True)


def enumerate_letters(count: int, nonneg_only: bool = False) -> list:
    """First `count` letters of E (or of the n >= 0 half grid) in natural order."""
    if count < 0:
        raise ValueError("count must be >= 0")
    alpha = _NONNEG if nonneg_only else _FULL
    return alpha.prefix(count)


def successor(e: GaussianLetter) -> GaussianLetter:
    """The letter immediately after e in the natural order."""
    return _FULL.letter(_FULL.index_of(e) + 1)


@dataclass(frozen=True)
class LetterSet:
    """A finite or cofinite set of letters with a provenance tag.

    tag is one of "initial_block", "tilde_block", "explicit", "complement".
    For "complement" the set is E minus `letters` (cofinite); finite iteration
    is refused there.
    """

    letters: tuple
    tag: str = "explicit"
    k: Optional[int] = None

    @property
    def cofinite(self) -> bool:
        return self.tag == "complement"

    def __contains__(self, e: GaussianLetter) -> bool:
        if self.cofinite:
            return e not in self.letters
        return e in self.letters

    def __iter__(self) -> Iterator[GaussianLetter]:
        if self.cofinite:
            raise TypeError("cannot iterate a cofinite letter set")
        return iter(self.letters)

    def __len__(self) -> int:
        if self.cofinite:
            raise TypeError("cofinite letter set has no finite size")
        return len(self.letters)

    def to_json(self) -> str:
        payload = {"tag": self.tag, "letters": [str(e) for e in self.letters]}
        if self.k is not None:
            payload["k"] = self.k
        return json.dumps(payload)

    @staticmethod
    def explicit(letters: Iterable[GaussianLetter]) -> "LetterSet":
        ordered = sorted(set(letters), key=GaussianLetter.natural_key)
        return LetterSet(tuple(ordered), "explicit")


def initial_block(count: int) -> LetterSet:
    """I(count): the first `count` letters of E in natural order."""
    return LetterSet(tuple(enumerate_letters(count)), "initial_block", count)


def tilde_block(k: int) -> tuple:
    """Conjugate closure of the first k letters of the n >= 0 half grid.

    Returns (LetterSet, size). The closure is always an initial block of the
    full natural order; size is its letter count.
    """
    base = enumerate_letters(k, nonneg_only=True)
    closed = set(base)
    closed.update(e.conjugate() for e in base)
    ordered = sorted(closed, key=GaussianLetter.natural_key)
    ls = LetterSet(tuple(ordered), "tilde_block", k)
    return ls, len(ordered)


def box_block(r: int) -> LetterSet:
    """Letters in the square box 1 <= m <= r, |n| <= r."""
    out = []
    for m in range(1, r + 1):
        for n in range(-r, r + 1):
            out.append(GaussianLetter(m, n))
    out.sort(key=GaussianLetter.natural_key)
    return LetterSet(tuple(out), "explicit")


def parse_letter_set(spec_str: str) -> LetterSet:
    """Parse "I:k" (initial block), "T:k" (tilde block), "-T:k" / "-I:k"
    (complement), or a JSON array of letter strings."""
    s = spec_str.strip()
    complement = s.startswith("-")
    if complement:
        s = s[1:]
    if s.startswith("I:"):
        ls = initial_block(int(s[2:]))
    elif s.startswith("T:"):
        ls, _ = tilde_block(int(s[2:]))
    else:
        data = json.loads(s)
        if isinstance(data, dict):
            data = data["letters"]
        ls = LetterSet.explicit(GaussianLetter.from_str(x) for x in data)
    if complement:
        return LetterSet(ls.letters, "complement", ls.k)
    return ls
