"""Compound-code time sharing over two transmission blocks.

Plain time sharing alternates the two users' decoding roles across two
length-N blocks.  The second user, whose message is decoded across both
blocks anyway, can instead spread one length-2N polar code over the two
constituent channels it observes (known-interference evidence in block 1,
interference-as-noise evidence in block 2): the extra polarization level
spans the multi-channel.  Leaf positions 0..N-1 of the length-2N transform
carry block 1, positions N..2N-1 carry block 2.

The three-stage pipeline decodes the first user's block-1 code, then the
compound code across both blocks, then the first user's block-2 code.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .channels import GaussianMacSpec, llr_ddot, llr_dot
from .construction import (
    _block_rng,
    _block_sizes,
    ddot_llr_sampler,
    dot_llr_sampler,
    select_info_set,
    single_user_genie_estimates,
)
from .polar_core import polar_encode, sc_decode

__all__ = [
    "compound_bit_estimates",
    "compound_rate_table",
    "CompoundRateRow",
    "timeshare_pipeline",
    "PipelineResult",
]


def compound_llr_sampler(spec: GaussianMacSpec):
    """Leaf evidence of the length-2N compound transform during
    construction: genie interference bits for the known-interference half,
    plain noise-marginal evidence for the other."""

    def sample(rng, x):
        N = x.shape[-1] // 2
        interf = rng.integers(0, 2, x.shape, dtype=np.uint8)
        noise = rng.normal(0.0, spec.noise_std, x.shape)
        y = (2.0 * x - 1.0) + (2.0 * interf - 1.0) + noise
        llr = np.empty(x.shape)
        llr[:, :N] = llr_ddot(y[:, :N], interf[:, :N], spec)
        llr[:, N:] = llr_dot(y[:, N:], spec)
        return llr

    return sample


def compound_bit_estimates(N: int, spec: GaussianMacSpec, trials: int,
                           seed: int, stream: int = 0) -> np.ndarray:
    """Genie-aided error estimates of the length-2N compound transform."""
    return single_user_genie_estimates(2 * N, compound_llr_sampler(spec),
                                       trials, seed, stream=stream)


@dataclass(frozen=True)
class CompoundRateRow:
    N: int
    rate_2N: float
    rate_N: float
    rate_compound: float


def compound_rate_table(N_list, spec: GaussianMacSpec, budget: float,
                        trials: int, seed: int) -> list[CompoundRateRow]:
    """Compare compound rates against averages of individually built codes.

    Per row: the average of the two constituent codes' rates at length 2N,
    the same at length N, and the compound code's rate at length 2N.  All
    codes are built at the same per-code error budget.
    """
    rows = []
    for k, N in enumerate(N_list):
        rates = {}
        for j, (length, sampler) in enumerate((
                (2 * N, dot_llr_sampler(spec)),
                (2 * N, ddot_llr_sampler(spec)),
                (N, dot_llr_sampler(spec)),
                (N, ddot_llr_sampler(spec)))):
            probs = single_user_genie_estimates(length, sampler, trials, seed,
                                                stream=16 * k + j)
            rates[j] = select_info_set(probs, budget).size / length
        comp = compound_bit_estimates(N, spec, trials, seed, stream=16 * k + 8)
        rate_comp = select_info_set(comp, budget).size / (2 * N)
        rows.append(CompoundRateRow(
            N=N, rate_2N=(rates[0] + rates[1]) / 2.0,
            rate_N=(rates[2] + rates[3]) / 2.0, rate_compound=rate_comp))
    return rows


def rate_table_csv(rows, fh, header_lines=()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    writer = csv.writer(fh)
    writer.writerow(["N", "rate_2N", "rate_N", "rate_compound"])
    for r in rows:
        writer.writerow([r.N, f"{r.rate_2N:.6g}", f"{r.rate_N:.6g}",
                         f"{r.rate_compound:.6g}"])


def rate_table_csv_text(rows, header_lines=()) -> str:
    buf = io.StringIO()
    rate_table_csv(rows, buf, header_lines)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Three-stage pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineResult:
    frames: int
    frame_errors_1: int      # user 1: either of its two block codes wrong
    frame_errors_2: int      # user 2: compound code wrong
    frame_errors_total: int  # any stage wrong
    rate_c1: float
    rate_c2: float
    rate_compound: float

    @property
    def fer_1(self) -> float:
        return self.frame_errors_1 / self.frames

    @property
    def fer_2(self) -> float:
        return self.frame_errors_2 / self.frames

    @property
    def fer_total(self) -> float:
        return self.frame_errors_total / self.frames


def timeshare_pipeline(codes, spec: GaussianMacSpec, frames: int, seed: int,
                       corrupt_first: bool = False) -> PipelineResult:
    """Simulate the two-block scheme and decode in pipeline order.

    ``codes`` is ``(c1, c2, c_compound)``: user 1's block-1 code (decoded
    with user 2 as noise), user 1's block-2 code (decoded once the
    compound word is known), and user 2's length-2N compound code.  All
    are :class:`~macpolar.polar_core.FrozenSpec` instances.

    ``corrupt_first`` flips user 1's decoded block-1 codeword before it
    feeds the downstream stages (error-propagation experiments).
    """
    c1, c2, comp = codes
    N = c1.block_length
    if c2.block_length != N or comp.block_length != 2 * N:
        raise ValueError("codes must have lengths (N, N, 2N)")
    err1 = err2 = err_any = 0
    for b, size in _block_sizes(frames):
        rng = _block_rng(seed, 0, b)
        u1 = rng.integers(0, 2, (size, N), dtype=np.uint8)
        u1[:, c1.frozen_mask] = c1.frozen_values[c1.frozen_mask]
        u2 = rng.integers(0, 2, (size, N), dtype=np.uint8)
        u2[:, c2.frozen_mask] = c2.frozen_values[c2.frozen_mask]
        d = rng.integers(0, 2, (size, 2 * N), dtype=np.uint8)
        d[:, comp.frozen_mask] = comp.frozen_values[comp.frozen_mask]
        x_c1 = polar_encode(u1)
        x_c2 = polar_encode(u2)
        x_comp = polar_encode(d)
        noise = rng.normal(0.0, spec.noise_std, (size, 2 * N))
        y1 = (2.0 * x_c1 - 1.0) + (2.0 * x_comp[:, :N] - 1.0) + noise[:, :N]
        y2 = (2.0 * x_c2 - 1.0) + (2.0 * x_comp[:, N:] - 1.0) + noise[:, N:]

        # stage 1: user 1's block-1 word, second user treated as noise
        u1_hat = sc_decode(llr_dot(y1, spec), c1)
        x1_hat = polar_encode(u1_hat)
        if corrupt_first:
            x1_hat ^= 1
        # stage 2: the compound word across both blocks
        llr = np.concatenate([llr_ddot(y1, x1_hat, spec),
                              llr_dot(y2, spec)], axis=1)
        d_hat = sc_decode(llr, comp)
        xc_hat = polar_encode(d_hat)
        # stage 3: user 1's block-2 word, compound interference known
        u2_hat = sc_decode(llr_ddot(y2, xc_hat[:, N:], spec), c2)

        e1 = (u1_hat != u1).any(axis=1) | (u2_hat != u2).any(axis=1)
        e2 = (d_hat != d).any(axis=1)
        err1 += int(e1.sum())
        err2 += int(e2.sum())
        err_any += int((e1 | e2).sum())
    k1 = int((~c1.frozen_mask).sum())
    k2 = int((~c2.frozen_mask).sum())
    kc = int((~comp.frozen_mask).sum())
    return PipelineResult(frames=frames, frame_errors_1=err1,
                          frame_errors_2=err2, frame_errors_total=err_any,
                          rate_c1=k1 / N, rate_c2=k2 / N,
                          rate_compound=kc / (2 * N))
