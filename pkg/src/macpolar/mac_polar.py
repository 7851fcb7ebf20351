"""MAC polarization building blocks and the joint SC decoder.

A building block is L parallel uses of the two-user channel with each
user's L bits pre-mixed by the small polar transform.  A block order (any
permutation of the 2L inputs that keeps each user's own indices ascending)
fixes the joint successive-cancellation schedule and thereby the rate pair
the construction polarizes toward.  Outer polarization levels replicate
the block, so slot j of the length-2N schedule is outer bit m of
building-block input k with k = 1 + j // (N/L), m = j % (N/L).

Per-user codewords are produced independently by the plain polar encoder;
only the construction and the decoder are joint.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .channels import (
    DiscreteBimc,
    DiscreteMac,
    GaussianMacSpec,
    merge_outputs,
)
from .polar_core import (
    LLR_CLAMP,
    FeasibilityError,
    _sc_pass,
    exact_bit_channels,
    polar_encode,
)

__all__ = [
    "BlockOrder",
    "Schedule",
    "MacPolarCode",
    "BlockRateProfile",
    "make_preset_order",
    "enumerate_monotone_orders",
    "building_block_channels",
    "exact_mac_bit_channels",
    "block_rates",
    "order_rate_profile",
    "mac_polar_encode",
    "joint_sc_decode",
    "JointDecodeResult",
    "save_code",
    "load_code",
]

_ORDER_CAP = 8


@dataclass(frozen=True)
class BlockOrder:
    """Decoding order of the 2L building-block inputs.

    ``labels`` is a sequence of (user, index) pairs with user in {1, 2}
    and index in 1..L; each user's indices must appear in increasing
    order (monotone interleaving).
    """

    labels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        labels = tuple((int(u), int(i)) for u, i in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) % 2 != 0:
            raise ValueError("order must list 2L labels")
        L = len(labels) // 2
        if L < 1 or (L & (L - 1)) != 0:
            raise ValueError(f"L must be a power of two, got {L}")
        for user in (1, 2):
            idx = [i for u, i in labels if u == user]
            if sorted(idx) != list(range(1, L + 1)):
                raise ValueError(f"user {user} must use indices 1..{L} once each")
            if idx != sorted(idx):
                raise ValueError("per-user indices must appear in increasing order")

    @property
    def L(self) -> int:
        return len(self.labels) // 2

    @property
    def order_id(self) -> str:
        return "".join(f"{'U' if u == 1 else 'V'}{i}" for u, i in self.labels)

    @classmethod
    def from_string(cls, text: str) -> "BlockOrder":
        """Parse e.g. ``"U1,V1,U2,V2"`` or ``"U1V1U2V2"``."""
        toks = [t for t in text.replace(",", " ").replace("V", " V")
                .replace("U", " U").split() if t]
        labels = []
        for tok in toks:
            user = {"U": 1, "V": 2}.get(tok[0].upper())
            if user is None or not tok[1:].isdigit():
                raise ValueError(f"bad order token {tok!r}")
            labels.append((user, int(tok[1:])))
        return cls(tuple(labels))

    def __str__(self) -> str:
        return self.order_id


def make_preset_order(L: int, i: int) -> BlockOrder:
    """Preset order family: user 2's first i-1 bits, then all of user 1.

    ``i = 1`` decodes user 1 entirely first; ``i = L + 1`` is the reverse.
    """
    if not 1 <= i <= L + 1:
        raise ValueError(f"preset index must be in 1..{L + 1}, got {i}")
    labels = [(2, j) for j in range(1, i)]
    labels += [(1, j) for j in range(1, L + 1)]
    labels += [(2, j) for j in range(i, L + 1)]
    return BlockOrder(tuple(labels))


def enumerate_monotone_orders(L: int) -> list[BlockOrder]:
    """All C(2L, L) monotone interleavings of the two users' inputs."""
    if L < 1 or (L & (L - 1)) != 0 or L > _ORDER_CAP:
        raise ValueError(f"L must be a power of two <= {_ORDER_CAP}")
    orders = []
    for user1_slots in itertools.combinations(range(2 * L), L):
        labels = [(2, 0)] * (2 * L)
        for k, pos in enumerate(user1_slots):
            labels[pos] = (1, k + 1)
        j = 1
        for pos in range(2 * L):
            if labels[pos] == (2, 0):
                labels[pos] = (2, j)
                j += 1
        orders.append(BlockOrder(tuple(labels)))
    return orders


class Schedule:
    """Slot bookkeeping for the lifted length-2N joint schedule.

    Slot j (0-based) belongs to super-channel ``stage = j // (N // L)`` and
    outer position ``m = j % (N // L)``; its owner and per-user transform
    index follow from the block order's label at that stage.
    """

    def __init__(self, N: int, order: BlockOrder):
        L = order.L
        if N % L != 0 or N < L or (N & (N - 1)) != 0:
            raise ValueError(f"N must be a power of two >= L={L}, got {N}")
        self.N = N
        self.order = order
        self.chunk = N // L
        slots = np.arange(2 * N)
        self.stage_of_slot = slots // self.chunk
        self.outer_of_slot = slots % self.chunk
        users = np.array([u for u, _ in order.labels])
        idx = np.array([i for _, i in order.labels])
        self.owner_of_slot = users[self.stage_of_slot]
        self.user_index_of_slot = ((idx[self.stage_of_slot] - 1) * self.chunk
                                   + self.outer_of_slot)

    def user_slots(self, user: int) -> np.ndarray:
        return np.flatnonzero(self.owner_of_slot == user)

    def slot_of_user_index(self, user: int, position: int) -> int:
        """Inverse map: per-user transform position -> schedule slot."""
        idx = position // self.chunk + 1
        stage = self.order.labels.index((user, idx))
        return stage * self.chunk + position % self.chunk


@dataclass
class MacPolarCode:
    """Per-user block length, block order, information sets, frozen values.

    Info sets hold 0-based per-user transform positions; frozen value
    arrays have full length N (entries at information positions unused).
    """

    N: int
    order: BlockOrder
    info_set_1: np.ndarray
    info_set_2: np.ndarray
    frozen_values_1: np.ndarray = None
    frozen_values_2: np.ndarray = None

    def __post_init__(self):
        self.info_set_1 = np.unique(np.asarray(self.info_set_1, dtype=np.int64))
        self.info_set_2 = np.unique(np.asarray(self.info_set_2, dtype=np.int64))
        for s in (self.info_set_1, self.info_set_2):
            if s.size and (s.min() < 0 or s.max() >= self.N):
                raise ValueError("info set positions must lie in [0, N)")
        if self.frozen_values_1 is None:
            self.frozen_values_1 = np.zeros(self.N, dtype=np.uint8)
        if self.frozen_values_2 is None:
            self.frozen_values_2 = np.zeros(self.N, dtype=np.uint8)
        self.frozen_values_1 = np.asarray(self.frozen_values_1, dtype=np.uint8)
        self.frozen_values_2 = np.asarray(self.frozen_values_2, dtype=np.uint8)
        Schedule(self.N, self.order)  # validates N against L

    @property
    def rate_1(self) -> float:
        return self.info_set_1.size / self.N

    @property
    def rate_2(self) -> float:
        return self.info_set_2.size / self.N

    def frozen_mask(self, user: int) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        mask[self.info_set_1 if user == 1 else self.info_set_2] = False
        return mask


def save_code(code: MacPolarCode, path) -> None:
    frozen = {}
    for user in (1, 2):
        mask = code.frozen_mask(user)
        vals = code.frozen_values_1 if user == 1 else code.frozen_values_2
        frozen[str(user)] = vals[mask].tolist()
    doc = {
        "N": code.N,
        "L": code.order.L,
        "order": [[u, i] for u, i in code.order.labels],
        "info_set_1": code.info_set_1.tolist(),
        "info_set_2": code.info_set_2.tolist(),
        "frozen_values": frozen,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_code(path) -> MacPolarCode:
    with open(path) as fh:
        doc = json.load(fh)
    order = BlockOrder(tuple((u, i) for u, i in doc["order"]))
    code = MacPolarCode(N=int(doc["N"]), order=order,
                        info_set_1=doc["info_set_1"],
                        info_set_2=doc["info_set_2"])
    for user in (1, 2):
        mask = code.frozen_mask(user)
        vals = np.zeros(code.N, dtype=np.uint8)
        vals[mask] = np.asarray(doc["frozen_values"][str(user)], dtype=np.uint8)
        if user == 1:
            code.frozen_values_1 = vals
        else:
            code.frozen_values_2 = vals
    return code


# ---------------------------------------------------------------------------
# Building-block enumeration
# ---------------------------------------------------------------------------

def _inner_code_tables(order: BlockOrder):
    """Per-combo inner codeword bits for both users.

    Combos index the 2L schedule bits, first-decoded bit most significant.
    Returns (x1, x2) of shape (2**(2L), L): the bits each user puts on the
    L block uses for that joint input combination.
    """
    L = order.L
    n_combo = 1 << (2 * L)
    bits = ((np.arange(n_combo)[:, None] >> (2 * L - 1 - np.arange(2 * L))) & 1)
    a = np.zeros((n_combo, L), dtype=np.uint8)
    b = np.zeros((n_combo, L), dtype=np.uint8)
    for pos, (user, idx) in enumerate(order.labels):
        (a if user == 1 else b)[:, idx - 1] = bits[:, pos]
    return polar_encode(a), polar_encode(b)


def building_block_channels(w: DiscreteMac, order: BlockOrder,
                            merge: bool = True, merge_tol: float = 1e-12,
                            max_cells: int = 20_000_000) -> list[DiscreteBimc]:
    """Brute-force the 2L bit-channels of one building block.

    Channel k's outputs are (block outputs, decoded prefix) pairs; later
    inputs are marginalized with uniform priors.
    """
    L = order.L
    M = w.output_size
    n_combo = 1 << (2 * L)
    n_y = M ** L
    if n_combo * n_y > max_cells:
        raise FeasibilityError("building block enumeration too large")
    x1, x2 = _inner_code_tables(order)
    # T[combo, y-tuple] = prod_l W(y_l | x1_l, x2_l)
    T = np.ones((n_combo, 1))
    for l in range(L):
        F = w.prob[x1[:, l], x2[:, l], :]
        T = (T[:, :, None] * F[:, None, :]).reshape(n_combo, -1)
    channels = []
    for k in range(2 * L):
        grouped = T.reshape(1 << k, 2, 1 << (2 * L - 1 - k), n_y).sum(axis=2)
        prob = grouped.transpose(1, 0, 2).reshape(2, -1) / (1 << (2 * L - 1))
        bimc = DiscreteBimc(prob)
        channels.append(merge_outputs(bimc, tol=merge_tol) if merge else bimc)
    return channels


def exact_mac_bit_channels(w: DiscreteMac, order: BlockOrder, n: int,
                           merge_tol: float = 1e-12) -> list[DiscreteBimc]:
    """All 2N joint bit-channels of the lifted schedule at N = 2**n.

    The building block is enumerated exactly, then each of its 2L channels
    is polarized through the n - l outer levels; slot j of the result is
    outer bit-channel m of super-channel k.
    """
    L = order.L
    N = 1 << n
    if N < L:
        raise ValueError(f"N=2**{n} must be at least L={L}")
    base = building_block_channels(w, order, merge_tol=merge_tol)
    outer_n = n - (L.bit_length() - 1)
    slots: list[DiscreteBimc] = []
    for ch in base:
        slots.extend(exact_bit_channels(ch, outer_n, merge_tol=merge_tol))
    return slots


# ---------------------------------------------------------------------------
# Block rate profiles
# ---------------------------------------------------------------------------

def _entropy_sum(p: np.ndarray) -> float:
    nz = p > 0.0
    return -float((p[nz] * np.log2(p[nz])).sum())


def order_rate_profile(w: DiscreteMac, order: BlockOrder,
                       max_cells: int = 20_000_000) -> "BlockRateProfile":
    """Exact per-input mutual-information terms of one building block.

    Term j is the information carried by the j-th decoded input given the
    block outputs and all earlier decisions; the per-user rates are the
    averages of each user's own terms.  Works for large output alphabets
    at L = 2 by streaming over 2-D output grids.
    """
    L = order.L
    M = w.output_size
    if L == 2:
        terms = _profile_terms_l2(w, order)
    else:
        if (M ** L) * (1 << (2 * L)) > max_cells:
            raise FeasibilityError("rate profile enumeration too large")
        terms = _profile_terms_generic(w, order)
    users = np.array([u for u, _ in order.labels])
    r1 = float(terms[users == 1].sum() / L)
    r2 = float(terms[users == 2].sum() / L)
    return BlockRateProfile(order=order, terms=terms, r1=r1, r2=r2)


def _profile_terms_generic(w: DiscreteMac, order: BlockOrder) -> np.ndarray:
    L = order.L
    n_combo = 1 << (2 * L)
    x1, x2 = _inner_code_tables(order)
    T = np.ones((n_combo, 1))
    for l in range(L):
        F = w.prob[x1[:, l], x2[:, l], :]
        T = (T[:, :, None] * F[:, None, :]).reshape(n_combo, -1)
    T = T / n_combo  # joint P(d, y)
    terms = np.empty(2 * L)
    for j in range(1, 2 * L + 1):
        with_dj = T.reshape(1 << j, -1, T.shape[1]).sum(axis=1)
        without = with_dj.reshape(1 << (j - 1), 2, -1).sum(axis=1)
        # I(d_j ; Y, prefix) = H(Y,pre) + H(d_j) - H(Y,pre,d_j)
        terms[j - 1] = _entropy_sum(without) + 1.0 - _entropy_sum(with_dj)
    return terms


def _profile_terms_l2(w: DiscreteMac, order: BlockOrder) -> np.ndarray:
    """L = 2 profile via 2-D output grids; scales to fine quantizations."""
    P = w.prob
    x1, x2 = _inner_code_tables(order)
    terms = np.empty(4)
    for j in range(1, 5):
        h_with = 0.0
        h_without = 0.0
        for pre in range(1 << (j - 1)):
            g_pre = None
            for dj in range(2):
                head = (pre << 1) | dj
                g = None
                for fut in range(1 << (4 - j)):
                    c = (head << (4 - j)) | fut
                    term = np.outer(P[x1[c, 0], x2[c, 0]], P[x1[c, 1], x2[c, 1]])
                    g = term if g is None else g + term
                g /= 16.0
                h_with += _entropy_sum(g)
                g_pre = g if g_pre is None else g_pre + g
            h_without += _entropy_sum(g_pre)
        terms[j - 1] = h_without + 1.0 - h_with
    return terms


def block_rates(w: DiscreteMac, L: int, i: int) -> "BlockRateProfile":
    """Rate pair of the length-2L building block under preset order i."""
    profile = order_rate_profile(w, make_preset_order(L, i))
    profile.preset_index = i
    return profile


@dataclass
class BlockRateProfile:
    """Per-input information terms and the rate pair they average to."""

    order: BlockOrder
    terms: np.ndarray
    r1: float
    r2: float
    preset_index: int | None = None

    @property
    def L(self) -> int:
        return self.order.L

    @property
    def rate_pair(self) -> tuple[float, float]:
        return (self.r1, self.r2)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def mac_polar_encode(code: MacPolarCode, info1, info2):
    """Scatter information bits, fill frozen values, encode each user.

    The two encoders are completely separate; only the construction that
    chose the information sets was joint.  Batched when the info arrays
    carry a leading frame axis.
    """
    info1 = np.asarray(info1, dtype=np.uint8)
    info2 = np.asarray(info2, dtype=np.uint8)
    if info1.shape[-1] != code.info_set_1.size:
        raise ValueError("info1 length does not match the code's info set")
    if info2.shape[-1] != code.info_set_2.size:
        raise ValueError("info2 length does not match the code's info set")
    u = np.broadcast_to(code.frozen_values_1,
                        info1.shape[:-1] + (code.N,)).copy()
    v = np.broadcast_to(code.frozen_values_2,
                        info2.shape[:-1] + (code.N,)).copy()
    u[..., code.info_set_1] = info1
    v[..., code.info_set_2] = info2
    return polar_encode(u), polar_encode(v)


# ---------------------------------------------------------------------------
# Joint successive-cancellation decoding
# ---------------------------------------------------------------------------

@dataclass
class JointDecodeResult:
    u_hat: np.ndarray
    v_hat: np.ndarray
    decisions: np.ndarray
    errors: np.ndarray | None = None
    op_counts: dict | None = None


def _evidence_tables(channel, observations, order: BlockOrder, N: int):
    """Per-block likelihoods of every joint input combination.

    Returns an array of shape (frames, N/L, 2**(2L)); the combo axis is
    indexed by the schedule bits, first-decoded most significant.  Block t
    covers channel uses t, t + N/L, ..., t + (L-1) N/L.  Gaussian evidence
    rows are rescaled per use (ratios are what the decoder consumes).
    """
    L = order.L
    chunk = N // L
    x1, x2 = _inner_code_tables(order)
    n_combo = 1 << (2 * L)
    y = np.asarray(observations)
    if y.shape[-1] != N:
        raise ValueError(f"need {N} observations per frame, got {y.shape[-1]}")
    B = y.shape[0]
    E = np.ones((B, chunk, n_combo))
    if isinstance(channel, DiscreteMac):
        yi = y.astype(np.int64)
        for l in range(L):
            use = yi[:, l * chunk:(l + 1) * chunk]
            E *= channel.prob[x1[:, l], x2[:, l], use[:, :, None]]
    elif isinstance(channel, GaussianMacSpec):
        s2 = channel.sigma ** 2
        means = (2.0 * x1 - 1.0) + (2.0 * x2 - 1.0)
        for l in range(L):
            use = y[:, l * chunk:(l + 1) * chunk]
            expo = -((use[:, :, None] - means[None, None, :, l]) ** 2) / s2
            expo -= expo.max(axis=2, keepdims=True)
            E *= np.exp(expo)
    else:
        raise TypeError(f"unsupported channel type {type(channel).__name__}")
    return E


def _stage_llr(partial_sums, stage: int, prefix: np.ndarray) -> np.ndarray:
    """Leaf LLRs of super-channel ``stage`` given decided block prefixes."""
    table = partial_sums[stage]
    idx = (prefix.astype(np.int64) << 1)[:, :, None]
    p0 = np.take_along_axis(table, idx, axis=2)[:, :, 0]
    p1 = np.take_along_axis(table, idx + 1, axis=2)[:, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log(p0) - np.log(p1)
    return np.clip(np.nan_to_num(llr, nan=0.0,
                                 posinf=LLR_CLAMP, neginf=-LLR_CLAMP),
                   -LLR_CLAMP, LLR_CLAMP)


def joint_sc_decode(code: MacPolarCode, observations, channel,
                    genie_bits=None, count_ops: bool = False) -> JointDecodeResult:
    """Decode the 2N schedule slots of a joint frame (or batch of frames).

    Stage by stage: compute the leaf likelihood pair of the current
    building-block input for every block (marginalizing undecided inputs,
    conditioning on decided ones), run a single-user SC pass of length N/L
    with the owner's frozen pattern over those leaves, then re-encode the
    decided outer bits to pin that input in every block.

    ``genie_bits``: optional (u_true, v_true); decisions are then compared
    against the truth and corrected before proceeding, and per-slot error
    flags are returned.
    """
    N, order = code.N, code.order
    L = order.L
    chunk = N // L
    y = np.asarray(observations)
    single = y.ndim == 1
    if single:
        y = y[None, :]
    B = y.shape[0]

    E = _evidence_tables(channel, y, order, N)
    # partial_sums[k][b, t, p] sums E over all inputs after the first k
    partial_sums = [None] * (2 * L + 1)
    partial_sums[2 * L] = E
    for k in range(2 * L - 1, 0, -1):
        partial_sums[k] = partial_sums[k + 1].reshape(B, chunk, 1 << k, 2).sum(axis=3)

    masks = {1: code.frozen_mask(1), 2: code.frozen_mask(2)}
    vals = {1: code.frozen_values_1, 2: code.frozen_values_2}
    pins = None
    if genie_bits is not None:
        u_true = np.asarray(genie_bits[0], dtype=np.uint8).reshape(B, N)
        v_true = np.asarray(genie_bits[1], dtype=np.uint8).reshape(B, N)
        pins = {1: u_true, 2: v_true}

    u_hat = np.zeros((B, N), dtype=np.uint8)
    v_hat = np.zeros((B, N), dtype=np.uint8)
    decisions = np.zeros((B, 2 * N), dtype=np.uint8)
    errors = np.zeros((B, 2 * N), dtype=bool) if pins is not None else None

    prefix = np.zeros((B, chunk), dtype=np.int64)
    for stage, (user, idx) in enumerate(order.labels):
        llr = _stage_llr(partial_sums, stage + 1, prefix)
        lo = (idx - 1) * chunk
        seg = slice(lo, lo + chunk)
        if pins is not None:
            err = np.zeros((B, chunk), dtype=bool)
            bits, cw = _sc_pass(llr, masks[user][seg], vals[user][seg],
                                pins=pins[user][:, seg], errors=err)
            errors[:, stage * chunk:(stage + 1) * chunk] = err
        else:
            bits, cw = _sc_pass(llr, masks[user][seg], vals[user][seg])
        (u_hat if user == 1 else v_hat)[:, seg] = bits
        decisions[:, stage * chunk:(stage + 1) * chunk] = bits
        prefix = (prefix << 1) | cw.astype(np.int64)

    ops = None
    if count_ops:
        ops = {
            "marginalization_terms": B * chunk * ((1 << (2 * L + 1)) - 4),
            "fg_node_ops": B * 2 * L * 2 * (chunk - 1),
            "leaf_decisions": B * 2 * N,
        }
    if single:
        return JointDecodeResult(u_hat[0], v_hat[0], decisions[0],
                                 errors[0] if errors is not None else None, ops)
    return JointDecodeResult(u_hat, v_hat, decisions, errors, ops)
