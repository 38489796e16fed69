"""Coupling matrices between multipliers on the slave chain and displacement
traces on either chain, assembled exactly on the common arc-length
parametrization.

The slave-side matrix is square (m x m): multipliers sit on slave nodes, with
either continuous piecewise-linear hats (P1) or piecewise constants on dual
midpoint cells (P0). The master-side matrix is rectangular (n x m). All
entries are integrals of products of piecewise polynomials, computed with
3-point Gauss per merged subinterval (exact through degree 5, which covers
quadratic traces against linear multipliers).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .surface import ContactSurface, CurvilinearFrame, build_curvilinear_frame

P0 = "P0"
P1 = "P1"

_GAUSS3_X = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 9.0


class MortarError(ValueError):
    pass


# ---------------------------------------------------------------------------
# basis functions on a chain, as functions of arc length
# ---------------------------------------------------------------------------

class ChainTraces:
    """Displacement trace functions along a chain.

    Q1: hat functions with breakpoints at the node abscissas. Q2: one
    quadratic per element edge (corner-mid-corner node triple), mapped to
    arc length affinely per half-edge; the chain must have an odd node
    count with corners at even positions.
    """

    def __init__(self, kind: str, node_s: np.ndarray):
        self.kind = kind
        self.s = np.asarray(node_s, dtype=float)
        if np.any(np.diff(self.s) <= 0):
            raise MortarError("trace abscissas must be strictly increasing")
        if kind == "Q2" and len(self.s) % 2 == 0:
            raise MortarError("a Q2 chain needs an odd node count")

    @property
    def n_funcs(self) -> int:
        return len(self.s)

    @property
    def range(self):
        return self.s[0], self.s[-1]

    def support(self, i: int):
        s = self.s
        if self.kind == "Q1":
            return s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
        if i % 2 == 1:  # mid-side: one edge
            return s[i - 1], s[i + 1]
        return s[max(i - 2, 0)], s[min(i + 2, len(s) - 1)]

    def breakpoints(self, i: int) -> np.ndarray:
        lo, hi = self.support(i)
        return self.s[(self.s >= lo) & (self.s <= hi)]

    def eval(self, i: int, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        lo, hi = self.support(i)
        out = np.zeros_like(s)
        inside = (s >= lo) & (s <= hi)
        if self.kind == "Q1":
            xp = [self.s[max(i - 1, 0)], self.s[i], self.s[min(i + 1, len(self.s) - 1)]]
            fp = [0.0, 1.0, 0.0]
            if i == 0:
                xp, fp = xp[1:], fp[1:]
            if i == len(self.s) - 1:
                xp, fp = xp[:-1], fp[:-1]
            out[inside] = np.interp(s[inside], xp, fp)
            return out
        # Q2: local edge coordinate z in [-1, 1], affine per half-edge
        for e0 in range(max(0, (i // 2 - 1) * 2), min(len(self.s) - 2, i + 1), 2):
            if not (e0 <= i <= e0 + 2):
                continue
            sa, sm, sb = self.s[e0], self.s[e0 + 1], self.s[e0 + 2]
            m = inside & (s >= sa) & (s <= sb)
            if not np.any(m):
                continue
            z = np.where(s[m] <= sm, -1.0 + (s[m] - sa) / (sm - sa),
                         (s[m] - sm) / (sb - sm))
            if i == e0:
                out[m] = 0.5 * z * (z - 1.0)
            elif i == e0 + 1:
                out[m] = 1.0 - z * z
            else:
                out[m] = 0.5 * z * (z + 1.0)
        return out


class MultiplierSpace:
    """Multiplier basis on the slave chain: P1 nodal hats or P0 indicators
    of the dual cells bounded by segment midpoints."""

    def __init__(self, kind: str, node_s: np.ndarray, dual_breaks: np.ndarray | None = None):
        if kind not in (P0, P1):
            raise MortarError(f"unknown multiplier space {kind!r}")
        self.kind = kind
        self.s = np.asarray(node_s, dtype=float)
        if dual_breaks is None:
            z = np.empty(len(self.s) + 1)
            z[0], z[-1] = self.s[0], self.s[-1]
            z[1:-1] = 0.5 * (self.s[:-1] + self.s[1:])
            dual_breaks = z
        self.dual_breaks = np.asarray(dual_breaks, dtype=float)

    @property
    def n_funcs(self) -> int:
        return len(self.s)

    def support(self, k: int):
        if self.kind == P1:
            s = self.s
            return s[max(k - 1, 0)], s[min(k + 1, len(s) - 1)]
        return self.dual_breaks[k], self.dual_breaks[k + 1]

    def breakpoints(self, k: int) -> np.ndarray:
        if self.kind == P1:
            lo, hi = self.support(k)
            return self.s[(self.s >= lo) & (self.s <= hi)]
        return self.dual_breaks[k:k + 2]

    def eval(self, k: int, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        lo, hi = self.support(k)
        if self.kind == P0:
            return ((s >= lo) & (s <= hi)).astype(float)
        out = np.zeros_like(s)
        inside = (s >= lo) & (s <= hi)
        xp = [self.s[max(k - 1, 0)], self.s[k], self.s[min(k + 1, len(self.s) - 1)]]
        fp = [0.0, 1.0, 0.0]
        if k == 0:
            xp, fp = xp[1:], fp[1:]
        if k == len(self.s) - 1:
            xp, fp = xp[:-1], fp[:-1]
        out[inside] = np.interp(s[inside], xp, fp)
        return out

    def tributary(self, k: int) -> float:
        """Integral of the basis function = tributary arc length of node k."""
        if self.kind == P0:
            return float(self.dual_breaks[k + 1] - self.dual_breaks[k])
        lo, hi = self.support(k)
        return 0.5 * float(hi - lo)


# ---------------------------------------------------------------------------
# exact integration on merged partitions
# ---------------------------------------------------------------------------

def overlap_partition(breaks_a, breaks_b) -> np.ndarray:
    """Sorted union of two breakpoint lists; on each subinterval of the
    union both piecewise-polynomial integrands are smooth."""
    merged = np.union1d(np.asarray(breaks_a, dtype=float),
                        np.asarray(breaks_b, dtype=float))
    return merged


def product_integral(f_eval, g_eval, breaks) -> float:
    """Integral of f*g with 3-point Gauss on each subinterval of `breaks`."""
    breaks = np.asarray(breaks, dtype=float)
    if len(breaks) < 2:
        return 0.0
    a, b = breaks[:-1], breaks[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = mid[:, None] + half[:, None] * _GAUSS3_X[None, :]
    w = half[:, None] * _GAUSS3_W[None, :]
    return float((w * f_eval(pts) * g_eval(pts)).sum())


def pair_integral(traces: ChainTraces, i: int, space: MultiplierSpace, k: int,
                  s_lo: float, s_hi: float) -> float:
    """Integral of trace i against multiplier k over the window [s_lo, s_hi],
    using the same merged-partition Gauss rule as the assembly."""
    if s_hi <= s_lo:
        return 0.0
    merged = overlap_partition(traces.breakpoints(i), space.breakpoints(k))
    merged = np.unique(np.concatenate([[s_lo], merged[(merged > s_lo) & (merged < s_hi)],
                                       [s_hi]]))
    return product_integral(lambda s: traces.eval(i, s),
                            lambda s: space.eval(k, s), merged)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _assembly_pieces(traces: ChainTraces, space: MultiplierSpace, clip=None):
    """Merged subintervals (a, b, multiplier index) covering all products."""
    from bisect import bisect_left, bisect_right

    t_lo, t_hi = traces.range
    if clip is not None:
        t_lo, t_hi = max(t_lo, clip[0]), min(t_hi, clip[1])
    trace_nodes = traces.s.tolist()
    a_all, b_all, k_all = [], [], []
    for k in range(space.n_funcs):
        k_lo, k_hi = space.support(k)
        lo, hi = max(k_lo, t_lo), min(k_hi, t_hi)
        if hi <= lo:
            continue
        brk = {lo, hi}
        brk.update(b for b in space.breakpoints(k) if lo < b < hi)
        i0 = bisect_right(trace_nodes, lo)
        i1 = bisect_left(trace_nodes, hi)
        brk.update(trace_nodes[i0:i1])
        brk = sorted(brk)
        a_all.extend(brk[:-1])
        b_all.extend(brk[1:])
        k_all.extend([k] * (len(brk) - 1))
    return (np.asarray(a_all), np.asarray(b_all), np.asarray(k_all, dtype=int))


def _psi_values(space: MultiplierSpace, kk: np.ndarray, X: np.ndarray) -> np.ndarray:
    if space.kind == P0:
        return np.ones_like(X)
    s = space.s
    m = len(s)
    sk = s[kk]
    skm = s[np.maximum(kk - 1, 0)]
    skp = s[np.minimum(kk + 1, m - 1)]
    lden = np.where(kk > 0, sk - skm, np.inf)[:, None]
    rden = np.where(kk < m - 1, skp - sk, np.inf)[:, None]
    left = (X - skm[:, None]) / lden
    right = (skp[:, None] - X) / rden
    return np.clip(np.where(X <= sk[:, None], np.where(np.isinf(lden), 1.0, left),
                            np.where(np.isinf(rden), 1.0, right)), 0.0, 1.0)


def _assemble_coupling(traces: ChainTraces, space: MultiplierSpace,
                       clip=None) -> np.ndarray:
    """Batched exact assembly of ∫ trace_i * psi_k over merged subintervals."""
    G = np.zeros((traces.n_funcs, space.n_funcs))
    a, b, kk = _assembly_pieces(traces, space, clip)
    if len(a) == 0:
        return G
    half = 0.5 * (b - a)
    X = 0.5 * (a + b)[:, None] + half[:, None] * _GAUSS3_X[None, :]  # (P, 3)
    W = half[:, None] * _GAUSS3_W[None, :]
    psi = _psi_values(space, kk, X)
    mid = 0.5 * (a + b)
    j = np.clip(np.searchsorted(traces.s, mid) - 1, 0, len(traces.s) - 2)
    sj = traces.s[j][:, None]
    sj1 = traces.s[j + 1][:, None]
    if traces.kind == "Q1":
        phi_r = (X - sj) / (sj1 - sj)
        np.add.at(G, (j, kk), (W * psi * (1.0 - phi_r)).sum(axis=1))
        np.add.at(G, (j + 1, kk), (W * psi * phi_r).sum(axis=1))
    else:  # Q2: quadratic per corner-mid-corner edge, affine per half-edge
        zeta = np.where((j % 2 == 0)[:, None],
                        -1.0 + (X - sj) / (sj1 - sj),
                        (X - sj) / (sj1 - sj))
        c0 = 2 * (j // 2)
        np.add.at(G, (c0, kk), (W * psi * 0.5 * zeta * (zeta - 1.0)).sum(axis=1))
        np.add.at(G, (c0 + 1, kk), (W * psi * (1.0 - zeta * zeta)).sum(axis=1))
        np.add.at(G, (c0 + 2, kk), (W * psi * 0.5 * zeta * (zeta + 1.0)).sum(axis=1))
    scale = np.abs(G).max()
    if scale > 0:
        G[np.abs(G) < 1e-14 * scale] = 0.0
    return G


def assemble_G1(traces: ChainTraces, space: MultiplierSpace) -> np.ndarray:
    """Slave-side coupling matrix, (m x m): entry (i, k) integrates trace i
    against multiplier k over the slave chain."""
    if traces.n_funcs != space.n_funcs:
        raise MortarError("slave traces and multipliers must share the node set")
    return _assemble_coupling(traces, space)


def assemble_G1_generic(traces: ChainTraces, space: MultiplierSpace) -> np.ndarray:
    """Entry-by-entry assembly via pair_integral; slower reference route."""
    m = space.n_funcs
    G = np.zeros((traces.n_funcs, m))
    for k in range(m):
        k_lo, k_hi = space.support(k)
        for i in range(traces.n_funcs):
            i_lo, i_hi = traces.support(i)
            lo, hi = max(k_lo, i_lo), min(k_hi, i_hi)
            if hi > lo:
                G[i, k] = pair_integral(traces, i, space, k, lo, hi)
    return G


def assemble_G21(master_traces: ChainTraces, space: MultiplierSpace):
    """Master-side coupling matrix in the trace ordering, (n x m), plus the
    coverage fraction of each multiplier support by the master chain."""
    m_lo, m_hi = master_traces.range
    G = _assemble_coupling(master_traces, space, clip=(m_lo, m_hi))
    coverage = np.empty(space.n_funcs)
    for k in range(space.n_funcs):
        k_lo, k_hi = space.support(k)
        lo_k, hi_k = max(k_lo, m_lo), min(k_hi, m_hi)
        coverage[k] = (pair_integral_window(space, k, lo_k, hi_k)
                       / space.tributary(k)) if hi_k > lo_k else 0.0
    return G, coverage


def pair_integral_window(space: MultiplierSpace, k: int, lo: float, hi: float) -> float:
    """Integral of multiplier k alone over [lo, hi]."""
    if hi <= lo:
        return 0.0
    merged = np.unique(np.concatenate([[lo],
                                       space.breakpoints(k)[(space.breakpoints(k) > lo)
                                                            & (space.breakpoints(k) < hi)],
                                       [hi]]))
    return product_integral(lambda s: space.eval(k, s),
                            lambda s: np.ones_like(s), merged)


@dataclass
class MortarOperator:
    """Assembled coupling operator for one contact pair at one configuration.

    G1 is the square slave matrix, G21 the rectangular master matrix in
    master *chain* order; R = G1^{-1} G21^T maps master nodal values to
    slave nodes (rows sum to 1 where the multiplier support is fully
    covered by the master chain).
    """

    space_kind: str
    G1: np.ndarray        # (m, m)
    G21: np.ndarray       # (n, m)
    R: np.ndarray         # (m, n)
    coverage: np.ndarray  # (m,)
    tributary: np.ndarray  # (m,) arc length attributed to each multiplier
    cond_estimate: float
    frame: CurvilinearFrame


def build_mortar_operator(slave: ContactSurface, master: ContactSurface,
                          space_kind: str, slave_trace_kind: str = "Q1",
                          master_trace_kind: str = "Q1",
                          frame: CurvilinearFrame | None = None) -> MortarOperator:
    if frame is None:
        frame = build_curvilinear_frame(slave, master)
    space = MultiplierSpace(space_kind, frame.slave_s, frame.dual_breaks)
    slave_traces = ChainTraces(slave_trace_kind, frame.slave_s)
    G1 = assemble_G1(slave_traces, space)

    ms = frame.master_s[::-1] if frame.master_reversed else frame.master_s
    master_traces = ChainTraces(master_trace_kind, ms)
    G21s, coverage = assemble_G21(master_traces, space)
    G21 = G21s[::-1] if frame.master_reversed else G21s

    cond = float(np.linalg.cond(G1, 1))
    if not np.isfinite(cond) or cond > 1e12:
        raise MortarError(f"slave coupling matrix is singular (cond ~ {cond:.2e})")
    lu = lu_factor(G1)
    R = lu_solve(lu, G21.T)
    trib = np.array([space.tributary(k) for k in range(space.n_funcs)])
    return MortarOperator(space_kind, G1, G21, R, coverage, trib, cond, frame)
