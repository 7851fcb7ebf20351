"""Single-user polar machinery.

The transform is the Kronecker power of [[1, 0], [1, 1]] applied to row
vectors in natural order (no bit-reversal): encoder and decoder use the
same indexing, and the transform is its own inverse over GF(2).

The successive-cancellation decoder works on log-likelihood ratios with
the exact sum-product check-node rule, so its decisions agree with
probability-domain oracles up to floating-point rounding.  All decoder
entry points accept batches: a leading axis enumerates independent frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import DiscreteBimc, combine_minus, combine_plus, merge_outputs

__all__ = [
    "FeasibilityError",
    "FrozenSpec",
    "LLR_CLAMP",
    "polar_encode",
    "sc_decode",
    "sc_genie_pass",
    "exact_bit_channels",
]

# Saturation level standing in for certainty; keeps f/g arithmetic free of
# inf - inf when genie pins or noiseless evidence inject infinities.
LLR_CLAMP = 1e9


class FeasibilityError(Exception):
    """Raised when an exact enumeration would exceed its resource bound."""


def _check_power_of_two(N: int) -> None:
    if N < 1 or (N & (N - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {N}")


@dataclass(frozen=True)
class FrozenSpec:
    """Frozen-position mask and the bit values pinned there.

    ``frozen_values`` has full length N; entries at information positions
    are ignored.
    """

    frozen_mask: np.ndarray
    frozen_values: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.frozen_mask, dtype=bool)
        vals = np.asarray(self.frozen_values, dtype=np.uint8)
        _check_power_of_two(mask.shape[-1])
        if mask.shape != vals.shape:
            raise ValueError("mask and values must have the same length")
        object.__setattr__(self, "frozen_mask", mask)
        object.__setattr__(self, "frozen_values", vals)

    @classmethod
    def from_info_set(cls, N: int, info_set, frozen_values=None) -> "FrozenSpec":
        """Freeze everything outside ``info_set`` (to zeros by default)."""
        mask = np.ones(N, dtype=bool)
        mask[np.asarray(list(info_set), dtype=np.int64)] = False
        vals = (np.zeros(N, dtype=np.uint8) if frozen_values is None
                else np.asarray(frozen_values, dtype=np.uint8))
        return cls(mask, vals)

    @property
    def block_length(self) -> int:
        return self.frozen_mask.shape[-1]

    @property
    def info_set(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen_mask)


# ---------------------------------------------------------------------------
# Transform
# ---------------------------------------------------------------------------

def polar_encode(u: np.ndarray) -> np.ndarray:
    """Multiply bit rows by the polar transform over GF(2).

    Works on the last axis; any leading axes are batch dimensions.  The
    transform is an involution, so this also inverts itself.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    _check_power_of_two(N)
    h = N // 2
    while h >= 1:
        view = x.reshape(x.shape[:-1] + (N // (2 * h), 2, h))
        view[..., 0, :] ^= view[..., 1, :]
        h //= 2
    return x


# ---------------------------------------------------------------------------
# Successive cancellation
# ---------------------------------------------------------------------------

def _f_llr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact sum-product check-node rule, stable for saturated inputs."""
    aa, ab = np.abs(a), np.abs(b)
    m = np.minimum(aa, ab)
    corr = np.log1p(np.exp(-(aa + ab))) - np.log1p(np.exp(-np.abs(aa - ab)))
    return np.sign(a) * np.sign(b) * m + corr


def _g_llr(a: np.ndarray, b: np.ndarray, bit: np.ndarray) -> np.ndarray:
    out = b + (1.0 - 2.0 * bit) * a
    return np.clip(out, -LLR_CLAMP, LLR_CLAMP)


def _sc_pass(llr, frozen_mask, frozen_values, pins=None, errors=None):
    """Batched SC pass over leaf LLRs.

    Returns ``(u_hat, x_hat)`` where ``x_hat`` is the re-encoded codeword
    of the decided bits.  When ``pins`` is given, every decision is
    compared against the pinned truth (mismatches recorded in ``errors``)
    and then overwritten by it, which makes the pass genie-aided.
    """
    B, N = llr.shape

    def rec(ll, lo, hi):
        size = hi - lo
        if size == 1:
            if frozen_mask[lo]:
                bit = np.full(B, frozen_values[lo], dtype=np.uint8)
            else:
                bit = (ll[:, 0] < 0.0).astype(np.uint8)
                if pins is not None:
                    truth = pins[:, lo]
                    errors[:, lo] = bit != truth
                    bit = truth.astype(np.uint8)
            return bit[:, None], bit[:, None].copy()
        h = size // 2
        a, b = ll[:, :h], ll[:, h:]
        u1, c1 = rec(_f_llr(a, b), lo, lo + h)
        u2, c2 = rec(_g_llr(a, b, c1.astype(np.float64)), lo + h, hi)
        return np.concatenate([u1, u2], axis=1), \
            np.concatenate([c1 ^ c2, c2], axis=1)

    llr = np.clip(np.nan_to_num(llr, nan=0.0), -LLR_CLAMP, LLR_CLAMP)
    return rec(llr, 0, N)


def sc_decode(leaf_llrs: np.ndarray, frozen: FrozenSpec) -> np.ndarray:
    """Successive-cancellation decode of leaf LLRs (natural order).

    Positive LLRs favor bit 0; ties decide 0.  Frozen positions echo their
    pinned values.  Accepts a single frame ``(N,)`` or a batch ``(B, N)``.
    """
    llr = np.asarray(leaf_llrs, dtype=np.float64)
    single = llr.ndim == 1
    if single:
        llr = llr[None, :]
    if llr.shape[-1] != frozen.block_length:
        raise ValueError("LLR length does not match the frozen spec")
    u, _ = _sc_pass(llr, frozen.frozen_mask, frozen.frozen_values)
    return u[0] if single else u


def sc_genie_pass(leaf_llrs: np.ndarray, frozen: FrozenSpec,
                  true_bits: np.ndarray):
    """Genie-aided SC pass: decisions corrected to the truth after each bit.

    Returns ``(errors, x_hat)``: ``errors[b, i]`` flags that the decision
    for bit i differed from the truth given an already-corrected prefix.
    Frozen positions never err.
    """
    llr = np.asarray(leaf_llrs, dtype=np.float64)
    pins = np.asarray(true_bits, dtype=np.uint8)
    single = llr.ndim == 1
    if single:
        llr, pins = llr[None, :], pins[None, :]
    errors = np.zeros(llr.shape, dtype=bool)
    _, x = _sc_pass(llr, frozen.frozen_mask, frozen.frozen_values,
                    pins=pins, errors=errors)
    return (errors[0], x[0]) if single else (errors, x)


# ---------------------------------------------------------------------------
# Exact bit-channel enumeration
# ---------------------------------------------------------------------------

def exact_bit_channels(w: DiscreteBimc, n: int, merge_tol: float = 1e-12,
                       max_alphabet: int = 1_000_000,
                       max_n: int = 6) -> list[DiscreteBimc]:
    """Enumerate all N = 2**n bit-channels of the polar transform over ``w``.

    Level by level, channel i splits into the check-side combination at
    index 2i-1 and the variable-side combination at index 2i (1-based).
    Outputs are merged losslessly after every combine; the enumeration
    aborts if an alphabet still exceeds ``max_alphabet``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > max_n:
        raise FeasibilityError(f"n={n} exceeds the enumeration cap {max_n}")
    channels = [merge_outputs(w, tol=merge_tol)]
    for _ in range(n):
        nxt = []
        for ch in channels:
            nxt.append(merge_outputs(combine_minus(ch, ch), tol=merge_tol))
            nxt.append(merge_outputs(combine_plus(ch, ch), tol=merge_tol))
        channels = nxt
        biggest = max(ch.output_size for ch in channels)
        if biggest > max_alphabet:
            raise FeasibilityError(
                f"bit-channel alphabet {biggest} exceeds {max_alphabet}")
    return channels
