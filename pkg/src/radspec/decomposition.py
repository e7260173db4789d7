"""Horizontal dyadic layers and sparse ball families for radial simple functions.

A nonnegative simple function ``W(x) = w(|x|)`` is cut into horizontal layers
``W_i = W 1_{H_i >= W > H_{i+1}}`` with

    H_i = inf{ t > 0 : |{W > t}| <= 2^{i-1} },

and every layer is split into families of pieces supported in balls
(intervals in ``r``) of a common radius whose centres are far apart compared
with that radius.  Everything here is exact bookkeeping on finite data: no
quadrature is involved.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgument
from .radial import DEFAULT_CUBE_SIZE, RadialProfile, rearrangement_norm, sphere_area

SCHEMA_VERSION = 1
DEFAULT_K = 3
DEFAULT_GAMMA = 2.0

Interval = Tuple[float, float]


def _sigma(d: int) -> float:
    if int(d) != d or d < 1:
        raise InvalidArgument(f"dimension must be a positive integer, got {d!r}")
    return 2.0 if d == 1 else sphere_area(int(d))


def shell_measure(intervals: Sequence[Interval], d: int) -> float:
    """``sigma_{d-1} int r^{d-1} dr`` over a union of disjoint intervals."""
    s = _sigma(d)
    return math.fsum(s * (b ** d - a ** d) / d for a, b in intervals)


@dataclass(frozen=True)
class Piece:
    """One level of a simple function: ``value`` on ``intervals`` (half open)."""

    value: float
    intervals: Tuple[Interval, ...]
    d_measure: float


@dataclass(frozen=True)
class SimpleFunction:
    """Nonnegative simple radial function as a list of level pieces.

    ``intervals`` may be empty for an abstract piece that only carries a
    measure (used to state distribution-function examples directly).
    """

    pieces: Tuple[Piece, ...]
    d: int = 3

    def __post_init__(self):
        pieces = tuple(self.pieces)
        _sigma(self.d)
        vals = [p.value for p in pieces]
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise InvalidArgument("piece values must be positive and finite")
        if len(set(vals)) != len(vals):
            raise InvalidArgument("piece values must be distinct")
        spans = []
        for p in pieces:
            if p.d_measure < 0:
                raise InvalidArgument("negative measure")
            for a, b in p.intervals:
                if not (0 <= a < b):
                    raise InvalidArgument(f"bad interval [{a}, {b})")
                spans.append((a, b))
            if p.intervals:
                m = shell_measure(p.intervals, self.d)
                if abs(m - p.d_measure) > 1e-12 * max(m, 1e-300):
                    raise InvalidArgument("d_measure does not match the intervals")
        spans.sort()
        for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
            if a1 < b0:
                raise InvalidArgument("piece supports overlap")
        object.__setattr__(self, "pieces", tuple(sorted(pieces, key=lambda p: -p.value)))

    # -- constructors ---------------------------------------------------------
    @classmethod
    def from_pieces(cls, spec: Sequence[Tuple[float, Sequence[Interval]]], d: int = 3) -> "SimpleFunction":
        """``[(value, [(a, b), ...]), ...]`` with measures computed from the intervals."""
        pieces = []
        for v, ivs in spec:
            ivs = tuple(sorted((float(a), float(b)) for a, b in ivs))
            pieces.append(Piece(float(v), ivs, shell_measure(ivs, d)))
        return cls(tuple(pieces), d)

    @classmethod
    def from_measures(cls, spec: Sequence[Tuple[float, float]], d: int = 3) -> "SimpleFunction":
        """Abstract pieces ``[(value, measure), ...]`` without geometry."""
        return cls(tuple(Piece(float(v), (), float(m)) for v, m in spec), d)

    @classmethod
    def from_steps(cls, edges: Sequence[float], values: Sequence[float], d: int = 3) -> "SimpleFunction":
        """Step function equal to ``values[j]`` on ``[edges[j], edges[j+1])``; zeros dropped."""
        edges = [float(e) for e in edges]
        if len(edges) != len(values) + 1:
            raise InvalidArgument("need len(edges) == len(values) + 1")
        groups: Dict[float, List[Interval]] = {}
        for j, v in enumerate(values):
            v = float(v)
            if v < 0:
                raise InvalidArgument("simple functions here are nonnegative")
            if v == 0:
                continue
            ivs = groups.setdefault(v, [])
            a, b = edges[j], edges[j + 1]
            if ivs and ivs[-1][1] == a:
                ivs[-1] = (ivs[-1][0], b)
            else:
                ivs.append((a, b))
        return cls.from_pieces(sorted(groups.items(), key=lambda kv: -kv[0]), d)

    @classmethod
    def from_profile(cls, v: RadialProfile) -> "SimpleFunction":
        """Profile that is constant on every panel of its rule (e.g. ``random_simple``)."""
        rule = v.rule
        n = rule.nodes_per_panel
        vals = np.asarray(v.values).reshape(rule.panels, n)
        if np.any(np.abs(vals.imag) > 0) or np.any(vals.real < 0):
            raise InvalidArgument("profile must be real and nonnegative")
        if np.any(vals.real != vals.real[:, :1]):
            raise InvalidArgument("profile is not constant on panels")
        return cls.from_steps(rule.edges, vals.real[:, 0], v.d)

    # -- queries --------------------------------------------------------------
    @property
    def total_measure(self) -> float:
        return math.fsum(p.d_measure for p in self.pieces)

    def is_zero(self) -> bool:
        return not self.pieces

    def evaluate(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for p in self.pieces:
            for a, b in p.intervals:
                out = np.where((r >= a) & (r < b), p.value, out)
        return out

    def distribution(self, t: float) -> float:
        """``|{W > t}|``."""
        return math.fsum(p.d_measure for p in self.pieces if p.value > t)

    def restrict(self, intervals: Sequence[Interval]) -> "SimpleFunction":
        """``W`` times the indicator of a union of intervals."""
        out = []
        for p in self.pieces:
            cut = []
            for a, b in p.intervals:
                for c0, c1 in intervals:
                    lo, hi = max(a, c0), min(b, c1)
                    if lo < hi:
                        cut.append((lo, hi))
            if cut:
                cut.sort()
                out.append(Piece(p.value, tuple(cut), shell_measure(cut, self.d)))
        return SimpleFunction(tuple(out), self.d)

    def sample_points(self) -> np.ndarray:
        """Interval midpoints and near-endpoints, used for pointwise checks."""
        pts = []
        for p in self.pieces:
            for a, b in p.intervals:
                pts.extend([a, 0.5 * (a + b), b - (b - a) * 1e-9])
        return np.array(sorted(pts))

    def to_dict(self) -> dict:
        return {"d": self.d, "pieces": [
            {"value": p.value, "intervals": [list(iv) for iv in p.intervals],
             "d_measure": p.d_measure} for p in self.pieces]}

    @classmethod
    def from_dict(cls, data: dict) -> "SimpleFunction":
        return cls(tuple(Piece(float(p["value"]), tuple(tuple(iv) for iv in p["intervals"]),
                               float(p["d_measure"])) for p in data["pieces"]), int(data["d"]))


# --------------------------------------------------------------------------
# Horizontal layers

@dataclass(frozen=True)
class Layer:
    i: int
    H: float
    layer: SimpleFunction


def level_heights(W: SimpleFunction, i: int) -> float:
    """``H_i = inf{t > 0 : |{W > t}| <= 2^{i-1}}`` from the step distribution function.

    With values ``v_1 > v_2 > ...`` and cumulative measures ``S_j``, the
    distribution function equals ``S_j`` on ``[v_{j+1}, v_j)``, so ``H_i`` is
    ``v_{j+1}`` for the largest ``j`` with ``S_j <= 2^{i-1}`` (and 0 past the end).
    """
    a = math.ldexp(1.0, i - 1)
    vals = [p.value for p in W.pieces]
    j = 0
    measures = [p.d_measure for p in W.pieces]
    while j < len(vals):
        S_next = math.fsum(measures[:j + 1])
        if S_next <= a:
            j += 1
        else:
            break
    return vals[j] if j < len(vals) else 0.0


def _first_index(W: SimpleFunction) -> int:
    """Smallest layer index needed: every ``i`` below it has ``H_i = max W``."""
    top = W.pieces[0].d_measure
    if top <= 0:
        raise InvalidArgument("top level has zero measure")
    # H_i = max W  iff  top > 2^{i-1}
    i = math.floor(math.log2(top)) + 1
    while math.ldexp(1.0, i - 1) >= top:
        i -= 1
    while math.ldexp(1.0, i) < top:
        i += 1
    return i


def horizontal_layers(W: SimpleFunction) -> List[Layer]:
    """Dyadic horizontal layers ``W_i = W 1_{H_i >= W > H_{i+1}}``.

    Indices start at the largest ``i`` with ``H_i = max W`` (this can be
    negative when the top level has small measure) and stop once
    ``H_{i+1} = 0``.  Empty intermediate layers are kept so indices are
    contiguous.  The pieces are partitioned, so the layers add up to ``W``.
    """
    W = _drop_null(W)
    if W.is_zero():
        return []
    i = _first_index(W)
    out = []
    while True:
        H = level_heights(W, i)
        H_next = level_heights(W, i + 1)
        pieces = tuple(p for p in W.pieces if H_next < p.value <= H)
        out.append(Layer(i, H, SimpleFunction(pieces, W.d)))
        if H_next == 0.0:
            return out
        i += 1


def _drop_null(W: SimpleFunction) -> SimpleFunction:
    keep = tuple(p for p in W.pieces if p.d_measure > 0)
    return W if len(keep) == len(W.pieces) else SimpleFunction(keep, W.d)


def lorentz_equivalence_check(W: SimpleFunction, q: float, r: float) -> Tuple[float, float, float]:
    """``(||H_i 2^{i/q}||_{l^r_i}, ||W||_{L^{q,r}}, ratio)``.

    The sequence runs over all integers ``i``; below the first layer index
    ``H_i = max W`` and that geometric part is summed in closed form.
    """
    if q < 1 or r < 1:
        raise InvalidArgument("need q, r >= 1")
    W = _drop_null(W)
    if W.is_zero():
        return 0.0, 0.0, math.nan
    layers = horizontal_layers(W)
    rhs = rearrangement_norm([p.value for p in W.pieces], [p.d_measure for p in W.pieces], q, r)
    i0 = layers[0].i
    top = W.pieces[0].value
    if math.isinf(r):
        lhs = max(max(L.H * 2 ** (L.i / q) for L in layers), top * 2 ** ((i0 - 1) / q))
    else:
        head = top ** r * 2 ** (i0 * r / q) / (2 ** (r / q) - 1)
        lhs = (head + math.fsum((L.H * 2 ** (L.i / q)) ** r for L in layers)) ** (1 / r)
    return float(lhs), float(rhs), float(lhs / rhs)


# --------------------------------------------------------------------------
# Sparse families

@dataclass(frozen=True)
class Member:
    center: float
    radius: float
    cells: Tuple[int, ...]
    piece: SimpleFunction = field(repr=False)


@dataclass(frozen=True)
class Family:
    level: int
    slot: int
    radius: float
    threshold: float
    members: Tuple[Member, ...]

    @property
    def centers(self) -> List[float]:
        return [m.center for m in self.members]


def family_constants(d: int, cell: float, K: int, gamma: float) -> dict:
    """Explicit constants of the construction for a layer of index ``i``.

    ``N_i <= M <= C2 2^i`` with ``C2 = d / (sigma c^d)`` (every cell
    ``[m c, (m+1) c)`` has measure at least ``sigma c^d / d``);
    ``K_i <= K (M^{1/K} + 1) <= C1 K 2^{i/K}`` with ``C1 = 2 C2^{1/K}``;
    the radius obeys ``rho_{m+1} <= (L-1)(rho_m M)^gamma + rho_m``.
    """
    C2 = d / (_sigma(d) * cell ** d)
    return {"C1": 2.0 * C2 ** (1.0 / K), "C2": C2,
            "radius_exponent": (1 + gamma) * (gamma ** K - 1) / (gamma - 1) if gamma != 1 else (1 + gamma) * K,
            "nominal_radius_exponent": gamma ** K}


def _chain_len(M: int, K: int) -> int:
    """Least integer ``L >= 2`` with ``L^K > M``."""
    L = max(2, int(math.floor(M ** (1.0 / K))))
    while L ** K <= M:
        L += 1
    while L > 2 and (L - 1) ** K > M:
        L -= 1
    return L


def radius_schedule(M: int, K: int, gamma: float, cell: float) -> List[float]:
    """Ball radii ``rho_0, ..., rho_{K-1}`` used for a layer with ``M`` cells."""
    L = _chain_len(M, K)
    rho = [cell / 2]
    for _ in range(K - 1):
        T = (rho[-1] * M) ** gamma
        rho.append((L - 1) * T + rho[-1])
    return rho


@dataclass(frozen=True)
class SparseDecomposition:
    families: Tuple[Family, ...]
    n_cells: int
    K: int
    gamma: float
    cell: float

    @property
    def K_i(self) -> int:
        return len(self.families)

    @property
    def N_i(self) -> int:
        return max((len(f.members) for f in self.families), default=0)

    @property
    def R_i(self) -> float:
        return max((f.radius for f in self.families), default=0.0)


def _cells_of(layer: SimpleFunction, cell: float) -> Dict[int, List[Interval]]:
    cells: Dict[int, List[Interval]] = {}
    for p in layer.pieces:
        for a, b in p.intervals:
            m0 = int(math.floor(a / cell))
            m1 = int(math.ceil(b / cell))
            for m in range(m0, m1):
                lo, hi = max(a, m * cell), min(b, (m + 1) * cell)
                if lo < hi:
                    cells.setdefault(m, []).append((lo, hi))
    return cells


def sparse_decompose(layer: SimpleFunction, K: int = DEFAULT_K, gamma: float = DEFAULT_GAMMA,
                     cell: float = DEFAULT_CUBE_SIZE) -> SparseDecomposition:
    """Split a layer into families of pieces living in separated intervals.

    The support is cut into cells ``[m c, (m+1) c)``; with ``M`` cells and
    ``L`` the least integer with ``L^K > M`` the construction runs ``K`` levels.
    At level ``m`` every ball has radius ``rho_m`` and consecutive centres
    closer than ``T_m = (rho_m M)^gamma`` are chained.  Chains shorter than
    ``L`` hand their ``t``-th ball to family ``(m, t)``; longer chains are cut
    into blocks of ``L`` to ``2L-1`` consecutive balls, and each block becomes
    one ball of radius ``rho_{m+1}`` at the next level.  Balls in one family
    come from different chains, so their centres are at least ``T_m`` apart.
    Since the number of balls shrinks by ``L`` per level, every ball is
    placed by level ``K-1``.
    """
    if K < 1 or int(K) != K:
        raise InvalidArgument("K must be a positive integer")
    if not gamma > 0:
        raise InvalidArgument("gamma must be positive")
    if not cell > 0:
        raise InvalidArgument("cell size must be positive")
    cells = _cells_of(layer, cell)
    M = len(cells)
    if M == 0:
        return SparseDecomposition((), 0, K, gamma, cell)
    L = _chain_len(M, K)
    rho = radius_schedule(M, K, gamma, cell)
    # a ball: (centre, tuple of cell indices)
    balls = [((m + 0.5) * cell, (m,)) for m in sorted(cells)]
    families: List[Family] = []
    for level in range(K):
        if not balls:
            break
        T = (rho[level] * M) ** gamma
        chains: List[List[tuple]] = [[balls[0]]]
        for prev, cur in zip(balls, balls[1:]):
            if cur[0] - prev[0] < T:
                chains[-1].append(cur)
            else:
                chains.append([cur])
        slots: Dict[int, List[tuple]] = {}
        nxt = []
        for ch in chains:
            if len(ch) < L or level == K - 1:
                if len(ch) >= L:  # cannot happen: counts shrink by L per level
                    raise AssertionError("chain too long at the last level")
                for t, b in enumerate(ch):
                    slots.setdefault(t, []).append(b)
            else:
                nblocks = len(ch) // L
                bounds = [j * L for j in range(nblocks)] + [len(ch)]
                for s0, s1 in zip(bounds, bounds[1:]):
                    blk = ch[s0:s1]
                    centre = 0.5 * (blk[0][0] + blk[-1][0])
                    nxt.append((centre, tuple(c for b in blk for c in b[1])))
        for t in sorted(slots):
            members = []
            for centre, idx in slots[t]:
                ivs = [iv for m in idx for iv in cells[m]]
                members.append(Member(centre, rho[level], idx, layer.restrict(ivs)))
            families.append(Family(level, t, rho[level], T, tuple(members)))
        balls = sorted(nxt)
    if balls:
        raise AssertionError("unplaced balls after K levels")
    return SparseDecomposition(tuple(families), M, K, gamma, cell)


def verify_sparse(family: Sequence[Tuple[float, float]], gamma: float,
                  N: Optional[int] = None) -> Tuple[bool, float]:
    """``(all pairwise centre gaps >= (R N)^gamma, smallest gap)``.

    ``family`` is a list of ``(centre, radius)`` with a common radius ``R``;
    ``N`` defaults to the number of members.
    """
    fam = list(family)
    if not fam:
        return True, math.inf
    radii = {r for _, r in fam}
    if len(radii) != 1:
        raise InvalidArgument("radii must be equal within a family")
    R = radii.pop()
    N = len(fam) if N is None else N
    if len(fam) == 1:
        return True, math.inf
    c = sorted(x for x, _ in fam)
    gap = min(b - a for a, b in zip(c, c[1:]))
    return bool(gap >= (R * N) ** gamma), float(gap)


def _ball_dist(c0, r0, c1, r1):
    return max(0.0, abs(c0 - c1) - r0 - r1)


def separation_sum(family: Sequence[Tuple[float, float]], a: float,
                   reference: Tuple[float, float], gamma: float) -> dict:
    """``sum_k (1 + dist(B_k, B_ref))^{-a}`` with the comparison bound.

    Reports the value, the bound ``1 + 2 N (N R)^{-gamma a}``, whether it
    holds, and the number of members whose centre lies within
    ``(N R)^gamma / 2`` of the reference centre (at most one for a sparse
    family).
    """
    if not a > 0:
        raise InvalidArgument("exponent must be positive")
    fam = list(family)
    ok, _ = verify_sparse(fam, gamma)
    if not ok:
        raise InvalidArgument("family is not sparse")
    N = len(fam)
    R = fam[0][1] if fam else 0.0
    c_ref, r_ref = reference
    value = math.fsum((1 + _ball_dist(c, r, c_ref, r_ref)) ** (-a) for c, r in fam)
    T = (N * R) ** gamma if N else 0.0
    near = sum(1 for c, _ in fam if abs(c - c_ref) < T / 2)
    bound = 1 + 2 * N * (N * R) ** (-gamma * a) if N * R > 0 else math.inf
    return {"value": value, "bound": bound, "holds": bool(value <= bound),
            "near_count": near, "applicable": bool(gamma * a >= 1), "slack": bound - value}


# --------------------------------------------------------------------------
# Full tree

@dataclass(frozen=True)
class DecompositionTree:
    W: SimpleFunction
    layers: Tuple[Layer, ...]
    sparse: Dict[int, SparseDecomposition]
    K: int
    gamma: float
    cell: float

    def pieces(self):
        for L in self.layers:
            for fam in self.sparse[L.i].families:
                for mem in fam.members:
                    yield L.i, fam, mem

    def to_dict(self) -> dict:
        const = family_constants(self.W.d, self.cell, self.K, self.gamma)
        layers = []
        for L in self.layers:
            sd = self.sparse[L.i]
            layers.append({
                "i": L.i, "H": L.H, "measure": L.layer.total_measure,
                "K_i": sd.K_i, "N_i": sd.N_i, "R_i": sd.R_i, "cells": sd.n_cells,
                "families": [{"level": f.level, "slot": f.slot, "radius": f.radius,
                              "threshold": f.threshold, "centers": f.centers,
                              "cells": [list(m.cells) for m in f.members]}
                             for f in sd.families],
            })
        return {"schema_version": SCHEMA_VERSION, "params": {"K": self.K, "gamma": self.gamma,
                                                             "cell": self.cell},
                "constants": const, "function": self.W.to_dict(), "layers": layers}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def decompose(W: SimpleFunction, K: int = DEFAULT_K, gamma: float = DEFAULT_GAMMA,
              cell: float = DEFAULT_CUBE_SIZE) -> DecompositionTree:
    layers = tuple(horizontal_layers(W))
    sparse = {L.i: sparse_decompose(L.layer, K, gamma, cell) for L in layers}
    return DecompositionTree(W, layers, sparse, K, gamma, cell)


def verify_tree(tree: DecompositionTree) -> dict:
    """Check reconstruction, layer measures, sparseness and the counting bounds.

    Returns a dict of named boolean checks plus the measured counts.
    """
    W = tree.W
    pts = np.concatenate([W.sample_points(), (np.arange(4096) + 0.5) * tree.cell / 2])
    total = np.zeros_like(pts)
    cover = np.zeros_like(pts, dtype=int)
    for _, _, mem in tree.pieces():
        v = mem.piece.evaluate(pts)
        total = total + v
        cover += (v > 0)
    recon = bool(np.array_equal(total, W.evaluate(pts)) and np.all(cover <= 1))
    layer_sum = sum(L.layer.evaluate(pts) for L in tree.layers) if tree.layers else np.zeros_like(pts)
    recon = recon and bool(np.array_equal(layer_sum, W.evaluate(pts)))
    meas_ok = all(L.layer.total_measure <= math.ldexp(1.0, L.i) for L in tree.layers)
    const = family_constants(W.d, tree.cell, tree.K, tree.gamma)
    sparse_ok = True
    counts_ok = True
    rows = []
    for L in tree.layers:
        sd = tree.sparse[L.i]
        for f in sd.families:
            ok, _ = verify_sparse([(m.center, m.radius) for m in f.members], tree.gamma)
            sparse_ok = sparse_ok and ok
            # every member ball covers its cells
            for m in f.members:
                lo = min(c for c in m.cells) * tree.cell
                hi = (max(c for c in m.cells) + 1) * tree.cell
                sparse_ok = sparse_ok and (m.center - m.radius <= lo + 1e-12 and hi <= m.center + m.radius + 1e-12)
        M = sd.n_cells
        if M:
            rho = radius_schedule(M, tree.K, tree.gamma, tree.cell)
            M_bound = const["C2"] * math.ldexp(1.0, L.i)
            k_ok = sd.K_i <= tree.K * (M ** (1 / tree.K) + 1) and \
                sd.K_i <= const["C1"] * tree.K * 2 ** (L.i / tree.K) * (1 + 1e-12)
            n_ok = sd.N_i <= M <= M_bound * (1 + 1e-12)
            rho_b = radius_schedule(int(math.floor(M_bound)), tree.K, tree.gamma, tree.cell) \
                if M_bound >= 1 else rho
            r_ok = sd.R_i <= max(rho) * (1 + 1e-12) and sd.R_i <= max(rho_b) * (1 + 1e-12)
            counts_ok = counts_ok and k_ok and n_ok and r_ok
        rows.append({"i": L.i, "K_i": sd.K_i, "N_i": sd.N_i, "R_i": sd.R_i, "cells": M})
    return {"reconstruction": recon, "layer_measure": meas_ok, "sparse": sparse_ok,
            "counts": counts_ok, "rows": rows}
