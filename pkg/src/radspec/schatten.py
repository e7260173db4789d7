"""Singular-value calculus with multiplicities.

Sector operators come with multiplicities ``dim H_k`` that reach the tens of
thousands, so spectra are stored as ``(s, mult)`` pairs and only expanded
implicitly inside the weak-norm suprema.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.special import zeta

from .errors import InvalidArgument


@dataclass(frozen=True)
class SingularSpectrum:
    """Singular values ``s`` (descending) with positive integer multiplicities."""

    s: np.ndarray
    mult: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).ravel()
        m = np.asarray(self.mult, dtype=np.int64).ravel()
        if s.shape != m.shape:
            raise InvalidArgument("values and multiplicities differ in length")
        if np.any(~np.isfinite(s)) or np.any(s < 0):
            raise InvalidArgument("singular values must be finite and nonnegative")
        if np.any(m < 1):
            raise InvalidArgument("multiplicities must be >= 1")
        order = np.argsort(-s, kind="stable")
        s, m = s[order], m[order]
        s.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mult", m)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, int]]) -> "SingularSpectrum":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0), np.zeros(0, dtype=np.int64))
        s, m = zip(*pairs)
        return cls(np.array(s, dtype=float), np.array(m, dtype=np.int64))

    @classmethod
    def from_values(cls, values) -> "SingularSpectrum":
        values = np.asarray(values, dtype=float).ravel()
        return cls(values, np.ones(values.size, dtype=np.int64))

    @property
    def total_count(self) -> int:
        return int(self.mult.sum())

    def expanded(self) -> np.ndarray:
        return np.repeat(self.s, self.mult)

    def merged(self, other: "SingularSpectrum") -> "SingularSpectrum":
        """Spectrum of the orthogonal direct sum."""
        return SingularSpectrum(np.concatenate([self.s, other.s]),
                                np.concatenate([self.mult, other.mult]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "mult"])
        for s, m in zip(self.s, self.mult):
            w.writerow([repr(float(s)), int(m)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SingularSpectrum":
        rows = list(csv.reader(io.StringIO(text)))
        body = [r for r in rows[1:] if r]
        return cls.from_pairs((float(a), int(b)) for a, b in body)


def svd_singular_values(m) -> SingularSpectrum:
    m = np.asarray(m)
    if m.ndim != 2:
        raise InvalidArgument("expected a matrix")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument("matrix has non-finite entries")
    if m.size == 0:
        return SingularSpectrum.from_values([])
    return SingularSpectrum.from_values(np.linalg.svd(m, compute_uv=False))


def schatten_norm(spec: SingularSpectrum, p: float) -> float:
    """``(sum mult * s^p)^{1/p}``; ``p = inf`` gives the operator norm."""
    if p < 1:
        raise InvalidArgument(f"Schatten exponent must be >= 1, got {p}")
    if spec.s.size == 0:
        return 0.0
    smax = float(spec.s[0])
    if math.isinf(p) or smax == 0.0:
        return smax
    # factor out s_1 so large multiplicities do not overflow
    t = np.sum(spec.mult * (spec.s / smax) ** p)
    return float(smax * t ** (1.0 / p))


def _check_r(r):
    if not r > 2:
        raise InvalidArgument(f"weak Schatten index must exceed 2, got {r}")


def weak_schatten_sup(spec: SingularSpectrum, r: float) -> float:
    """``sup_n n^{1/r} s_n`` over the expanded spectrum.

    Within a block of equal values the supremum sits at the block's last index.
    """
    _check_r(r)
    if spec.s.size == 0:
        return 0.0
    n_last = np.cumsum(spec.mult).astype(float)
    return float(np.max(n_last ** (1.0 / r) * spec.s))


def weak_schatten_avg(spec: SingularSpectrum, r: float) -> float:
    """``sup_N N^{-1+1/r} sum_{n<=N} s_n`` over the expanded spectrum.

    On a block of equal values the objective is ``c N^a + s N^{1+a}`` with
    ``c >= 0`` and ``-1 < a < 0``; its only critical point is a minimum, so
    only block endpoints need checking.
    """
    _check_r(r)
    if spec.s.size == 0:
        return 0.0
    a = 1.0 / r - 1.0
    m = spec.mult.astype(float)
    ends = np.cumsum(m)
    starts = ends - m + 1
    partial = np.cumsum(spec.s * m)
    at_end = ends ** a * partial
    at_start = starts ** a * (partial - (m - 1) * spec.s)
    return float(max(at_end.max(), at_start.max()))


def weak_embedding_constant(r: float, p: float) -> float:
    """``(sum_n n^{-p/r})^{1/p}`` for ``r < p``: ``||.||_p <= C ||.||'_{r,w}``."""
    if not r < p:
        raise InvalidArgument("embedding needs r < p")
    return float(zeta(p / r, 1) ** (1.0 / p))
