"""Exact-oracle verification of the splitting, chain-rule and pair-channel
identities, runnable as a library and through the ``verify`` CLI command.

The checks deliberately avoid the production recursion wherever it would
make a comparison circular: joint bit-channels are re-derived here by
brute-force marginalization of the defining sum, streamed over input
configurations so per-user lengths up to 8 stay tractable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import (
    DiscreteBimc,
    DiscreteMac,
    bhattacharyya,
    combine_minus,
    combine_plus,
    mac_region_vertices,
    mutual_information,
)
from .mac_polar import BlockOrder, Schedule, block_rates
from .polar_core import FeasibilityError, exact_bit_channels, polar_encode

__all__ = [
    "LemmaReport",
    "StyTriple",
    "direct_bit_channel_stats",
    "direct_bit_channels",
    "verify_channel_split",
    "verify_chain_rules",
    "build_sty_example",
    "verify_sty_identities",
]


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of one exact check: instances compared and worst deviation."""

    lemma: str
    instances: int
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.lemma:<24} instances={self.instances:<6d} "
                f"max_dev={self.max_deviation:.3e} tol={self.tolerance:.1e} "
                f"{status}")


@dataclass(frozen=True)
class StyTriple:
    """Per-pair-channel information triple (user 1, user 2, joint)."""

    i1: float
    i2: float
    sum: float


# ---------------------------------------------------------------------------
# Direct joint bit-channel enumeration (the independent oracle)
# ---------------------------------------------------------------------------

_MAX_CONFIGS = 1 << 16
_MAX_YSPACE = 1 << 13


def _config_codewords(order: BlockOrder, n: int, configs: np.ndarray):
    """Map schedule-bit configurations to the two users' codewords."""
    N = 1 << n
    sched = Schedule(N, order)
    S = 2 * N
    bits = ((configs[:, None] >> (S - 1 - np.arange(S))) & 1).astype(np.uint8)
    u = np.zeros((configs.size, N), dtype=np.uint8)
    v = np.zeros((configs.size, N), dtype=np.uint8)
    for slot in range(S):
        user = sched.owner_of_slot[slot]
        pos = sched.user_index_of_slot[slot]
        (u if user == 1 else v)[:, pos] = bits[:, slot]
    return polar_encode(u), polar_encode(v)


def _chunk_tables(w: DiscreteMac, order: BlockOrder, n: int):
    """Yield (chunk_bits, chunk_index, T) with T[row, y] = P(y-tuple | config).

    Configurations are enumerated prefix-major (first decoded bit most
    significant), so each chunk covers all completions of one prefix of
    ``chunk_bits`` schedule bits.
    """
    N = 1 << n
    S = 2 * N
    M = w.output_size
    n_y = M ** N
    if (1 << S) > _MAX_CONFIGS or n_y > _MAX_YSPACE:
        raise FeasibilityError(
            f"direct enumeration infeasible: 2^{S} configs x {n_y} outputs")
    rows = max(2, min(1 << S, (1 << 23) // n_y))
    rows = 1 << (rows.bit_length() - 1)
    chunk_bits = S - rows.bit_length() + 1
    for c in range(1 << chunk_bits):
        configs = c * rows + np.arange(rows, dtype=np.int64)
        x1, x2 = _config_codewords(order, n, configs)
        T = np.ones((rows, 1))
        for t in range(N):
            F = w.prob[x1[:, t], x2[:, t], :]
            T = (T[:, :, None] * F[:, None, :]).reshape(rows, -1)
        yield chunk_bits, c, T


def _plogp_sum(x: np.ndarray) -> float:
    out = np.zeros_like(x)
    np.log2(x, out=out, where=x > 0.0)
    return float((x * out).sum())


def _pair_sqrt_sum(level: np.ndarray) -> float:
    pairs = level.reshape(-1, 2, level.shape[-1])
    return float(np.sqrt(pairs[:, 0] * pairs[:, 1]).sum())


def _is_deterministic(w: DiscreteMac) -> bool:
    p = w.prob
    return bool(np.all((p == 0.0) | (p == 1.0)))


def _deterministic_stats(w: DiscreteMac, order: BlockOrder, n: int):
    """Counting form of the direct enumeration for 0/1 transition channels.

    Each input configuration maps to exactly one output tuple, so every
    conditional probability is an integer count of configurations and the
    per-slot statistics reduce to sorts over combined (prefix, output) keys.
    """
    N = 1 << n
    S = 2 * N
    if (1 << S) > _MAX_CONFIGS:
        raise FeasibilityError(f"direct enumeration infeasible: 2^{S} configs")
    M = w.output_size
    configs = np.arange(1 << S, dtype=np.int64)
    x1, x2 = _config_codewords(order, n, configs)
    symbol = np.argmax(w.prob, axis=2)
    y_index = np.zeros(configs.size, dtype=np.int64)
    for t in range(N):
        y_index = y_index * M + symbol[x1[:, t], x2[:, t]]
    n_y = M ** N
    A = np.zeros(S + 1)
    B = np.zeros(S + 1)
    counts0 = np.bincount(y_index).astype(np.float64)
    A[0] = _plogp_sum(counts0[counts0 > 0.0])
    for j in range(1, S + 1):
        g = configs >> (S - j)
        key = g * n_y + y_index
        cells, counts = np.unique(key, return_counts=True)
        counts = counts.astype(np.float64)
        A[j] = _plogp_sum(counts)
        # pair cells that differ only in the slot-j bit
        pk = (cells // n_y >> 1) * n_y + cells % n_y
        dj = (cells // n_y) & 1
        uniq, inv = np.unique(pk, return_inverse=True)
        c0 = np.zeros(uniq.size)
        c1 = np.zeros(uniq.size)
        c0[inv[dj == 0]] = counts[dj == 0]
        c1[inv[dj == 1]] = counts[dj == 1]
        B[j] = float(np.sqrt(c0 * c1).sum())
    return A, B, S


def _dense_stats(w: DiscreteMac, order: BlockOrder, n: int):
    S = 2 * (1 << n)
    A = np.zeros(S + 1)
    B = np.zeros(S + 1)
    head = None
    chunk_bits = 0
    for chunk_bits, c, T in _chunk_tables(w, order, n):
        if head is None:
            head = np.zeros((1 << chunk_bits, T.shape[1]))
        level = T
        for j in range(S, chunk_bits, -1):
            A[j] += _plogp_sum(level)
            B[j] += _pair_sqrt_sum(level)
            level = level.reshape(-1, 2, level.shape[1]).sum(axis=1)
        head[c] = level[0]
    level = head
    for j in range(chunk_bits, 0, -1):
        A[j] += _plogp_sum(level)
        B[j] += _pair_sqrt_sum(level)
        level = level.reshape(-1, 2, level.shape[1]).sum(axis=1)
    A[0] = _plogp_sum(level)
    return A, B, S


def direct_bit_channel_stats(w: DiscreteMac, order: BlockOrder, n: int):
    """Mutual information and Bhattacharyya of every joint bit-channel,
    computed straight from the defining marginalization (no recursion).

    Returns ``(I, Z)`` arrays of length 2N.  Feasible for per-user lengths
    up to 8 on small output alphabets.

    Per slot j the unnormalized level sums satisfy
    ``I_j = 1 + s/2 * (A_j - A_{j-1})`` with ``s = 2^-(S-1)``, where ``A_j``
    sums p*log2(p) over the conditionals grouped by the first j decisions;
    the conditioned-output entropy term of slot j is exactly the grouped
    table of slot j-1.
    """
    if _is_deterministic(w):
        A, B, S = _deterministic_stats(w, order, n)
    else:
        A, B, S = _dense_stats(w, order, n)
    s = np.ldexp(1.0, -(S - 1))
    I = 1.0 + 0.5 * s * (A[1:] - A[:-1])
    Z = s * B[1:]
    return I, Z


def direct_bit_channels(w: DiscreteMac, order: BlockOrder, n: int,
                        merge_tol: float = 1e-12) -> list[DiscreteBimc]:
    """Materialize every joint bit-channel from the defining sum (merged).

    Only for small instances (per-user length <= 4); larger instances
    should use :func:`direct_bit_channel_stats`.
    """
    N = 1 << n
    S = 2 * N
    M = w.output_size
    n_y = M ** N
    if (1 << S) * n_y > (1 << 24):
        raise FeasibilityError("direct channel materialization too large")
    configs = np.arange(1 << S, dtype=np.int64)
    x1, x2 = _config_codewords(order, n, configs)
    T = np.ones((configs.size, 1))
    for t in range(N):
        F = w.prob[x1[:, t], x2[:, t], :]
        T = (T[:, :, None] * F[:, None, :]).reshape(configs.size, -1)
    out = []
    from .channels import merge_outputs
    for j in range(1, S + 1):
        grouped = T.reshape(1 << j, -1, n_y).sum(axis=1)
        pairs = grouped.reshape(1 << (j - 1), 2, n_y)
        prob = pairs.transpose(1, 0, 2).reshape(2, -1) / (1 << (S - 1))
        out.append(merge_outputs(DiscreteBimc(prob), tol=merge_tol))
    return out


# ---------------------------------------------------------------------------
# Lemma checks
# ---------------------------------------------------------------------------

def verify_channel_split(w: DiscreteMac, order: BlockOrder, n_max: int,
                         tol: float = 1e-9) -> LemmaReport:
    """Check that doubling the block pairs bit-channels through the polar
    combines: channel 2j-1 at length 2N equals the check-side combination
    of channel j at length N, channel 2j the variable-side one (I and Z).

    Both sides are derived from the defining marginalization, not from the
    production recursion, so the comparison is an independent oracle.
    """
    l = order.L.bit_length() - 1
    max_dev = 0.0
    instances = 0
    for n in range(l, n_max):
        small = direct_bit_channels(w, order, n)
        I_big, Z_big = direct_bit_channel_stats(w, order, n + 1)
        for j, chan in enumerate(small):
            minus = combine_minus(chan, chan, merge=True)
            plus = combine_plus(chan, chan, merge=True)
            for k, side in ((2 * j, minus), (2 * j + 1, plus)):
                max_dev = max(max_dev,
                              abs(I_big[k] - mutual_information(side)),
                              abs(Z_big[k] - bhattacharyya(side)))
                instances += 1
    return LemmaReport("channel-split", instances, max_dev, tol)


def verify_chain_rules(w: DiscreteMac, L: int, tol: float = 1e-9,
                       probes: int = 9) -> LemmaReport:
    """Check the rate-pair family swept by the preset decoding orders.

    Every preset's rates sum to the channel's sum rate and land on the
    segment between the corner points; consecutive presets move each
    coordinate monotonically by at most 1/L; the endpoints hit the two
    corners; and every probe point on the dominant face is within 1/L of
    some preset pair in both coordinates.
    """
    v = mac_region_vertices(w)
    capacity = v.sum_rate
    profiles = [block_rates(w, L, i) for i in range(1, L + 2)]
    devs = []
    instances = 0
    for prof in profiles:
        devs.append(abs(prof.r1 + prof.r2 - capacity))
        devs.append(max(np.maximum(-prof.terms, prof.terms - 1.0).max(), 0.0))
        instances += 1
    for a, b in zip(profiles[:-1], profiles[1:]):
        d1 = b.r1 - a.r1
        d2 = a.r2 - b.r2
        for d in (d1, d2):
            devs.append(max(0.0, -d))            # moves the stated direction
            devs.append(max(0.0, d - 1.0 / L))   # by at most 1/L
        instances += 1
    devs.append(abs(profiles[0].r1 - v.a_point[0]))
    devs.append(abs(profiles[0].r2 - v.a_point[1]))
    devs.append(abs(profiles[-1].r1 - v.b_point[0]))
    devs.append(abs(profiles[-1].r2 - v.b_point[1]))
    instances += 2
    for t in np.linspace(0.0, 1.0, probes):
        q1 = (1 - t) * v.a_point[0] + t * v.b_point[0]
        q2 = (1 - t) * v.a_point[1] + t * v.b_point[1]
        gap = min(max(abs(q1 - p.r1), abs(q2 - p.r2)) for p in profiles)
        devs.append(max(0.0, gap - 1.0 / L))
        instances += 1
    return LemmaReport(f"chain-rules-L{L}", instances, float(max(devs)), tol)


# ---------------------------------------------------------------------------
# Constructed two-user example from a single-user channel
# ---------------------------------------------------------------------------

def build_sty_example(wp: DiscreteBimc) -> DiscreteMac:
    """Two-user channel that routes u XOR v and v through two copies of a
    single-user channel; output symbols are the pairs (y1, y2).
    """
    M = wp.output_size
    p = np.empty((2, 2, M * M))
    for u in range(2):
        for v in range(2):
            p[u, v] = np.outer(wp.prob[u ^ v], wp.prob[v]).ravel()
    return DiscreteMac(p)


def _merge_rows(prob: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Merge output columns with proportional conditional vectors."""
    mass = prob.sum(axis=0)
    keep = mass > 0.0
    prob = prob[:, keep]
    mass = mass[keep]
    ratios = prob / mass
    keys = np.round(ratios / tol).astype(np.int64)
    _, inv = np.unique(keys.T, axis=0, return_inverse=True)
    out = np.zeros((prob.shape[0], inv.max() + 1))
    np.add.at(out.T, inv, prob.T)
    return out


def _pair_minus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Check-side combining of two four-ary (bit-pair input) channels."""
    Ma, Mb = a.shape[1], b.shape[1]
    out = np.zeros((4, Ma * Mb))
    for s in range(4):
        acc = np.zeros((Ma, Mb))
        for t in range(4):
            acc += np.outer(a[s ^ t], b[t])
        out[s] = acc.ravel() / 4.0
    return out


def _pair_plus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Variable-side combining; the masking pair is revealed at the output."""
    Ma, Mb = a.shape[1], b.shape[1]
    out = np.zeros((4, 4 * Ma * Mb))
    for s in range(4):
        blocks = [np.outer(a[t ^ s], b[s]).ravel() / 4.0 for t in range(4)]
        out[s] = np.concatenate(blocks)
    return out


def _pair_triple(p: np.ndarray) -> StyTriple:
    """Information triple of a channel with a uniform (u, v) bit-pair input."""
    joint = p / 4.0  # P(u, v, z) with rows s = 2u + v
    pz = joint.sum(axis=0)

    def h(x):
        nz = x > 0.0
        return -float((x[nz] * np.log2(x[nz])).sum())

    h_all = h(joint.ravel())
    i_sum = 2.0 + h(pz) - h_all          # I(U,V;Z) = H(UV) + H(Z) - H(UVZ)
    pvz = joint[:2] + joint[2:]          # P(v, z): rows 2u+v summed over u
    puz = joint[0::2] + joint[1::2]      # P(u, z): summed over v
    i1 = 1.0 + h(pvz.ravel()) - h_all    # I(U; Z, V) = H(U) + H(Z,V) - H(U,V,Z)
    i2 = 1.0 + h(puz.ravel()) - h_all    # I(V; Z, U)
    return StyTriple(i1=i1, i2=i2, sum=i_sum)


def pair_bit_channels(w: DiscreteMac, n: int) -> list[np.ndarray]:
    """Pairwise bit-channels of the two-user transform where both users'
    vectors pass through the same polar transform and the pair (u_i, v_i)
    is treated as one four-ary input.
    """
    base = _merge_rows(w.prob.reshape(4, -1))
    channels = [base]
    for _ in range(n):
        nxt = []
        for ch in channels:
            nxt.append(_merge_rows(_pair_minus(ch, ch)))
            nxt.append(_merge_rows(_pair_plus(ch, ch)))
        channels = nxt
    return channels


def verify_sty_identities(wp: DiscreteBimc, n_max: int,
                          tol: float = 1e-9) -> LemmaReport:
    """Check the constructed example's pair-channel identities.

    For the channel built by :func:`build_sty_example`, the pairwise
    transform of length N is equivalent to a single-user transform of
    length 2N on the constituent channel: per pair index i, the user-2
    information equals the even child's, the joint information equals the
    sum of both children's, and the user-1 information dominates the odd
    child's.
    """
    w = build_sty_example(wp)
    max_dev = 0.0
    instances = 0
    for n in range(1, n_max + 1):
        triples = [_pair_triple(ch) for ch in pair_bit_channels(w, n)]
        singles = exact_bit_channels(wp, n + 1)
        I_single = [mutual_information(ch) for ch in singles]
        for i, tri in enumerate(triples):
            odd, even = I_single[2 * i], I_single[2 * i + 1]
            max_dev = max(max_dev,
                          abs(tri.i2 - even),
                          abs(tri.sum - (odd + even)),
                          max(0.0, odd - tri.i1))
            instances += 3
    return LemmaReport("sty-identities", instances, max_dev, tol)
