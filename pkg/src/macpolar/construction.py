"""Monte-Carlo code construction and rate-region sweeps.

Per-slot first-error probabilities are estimated genie-aided: every trial
decodes with all earlier decisions corrected to the truth, so each slot's
mismatch count estimates the probability that the slot is the first to
err.  Frozen sets are then chosen greedily under a per-user error budget
(union bound: the sum of selected estimates bounds the frame error rate).

Trials are split into fixed 1024-frame blocks with key-derived random
substreams, so results are reproducible for a given seed regardless of
chunking or worker count.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    DiscreteMac,
    GaussianMacSpec,
    bhattacharyya,
    llr_ddot,
    llr_dot,
)
from .mac_polar import (
    BlockOrder,
    MacPolarCode,
    Schedule,
    exact_mac_bit_channels,
    joint_sc_decode,
    mac_polar_encode,
)
from .polar_core import FrozenSpec, polar_encode, sc_genie_pass

__all__ = [
    "SlotEstimate",
    "EstimateSet",
    "RegionRecord",
    "RegionReport",
    "genie_error_estimates",
    "select_frozen_sets",
    "region_sweep",
    "good_sets_exact",
    "simulate_frames",
    "sample_mac_outputs",
    "single_user_genie_estimates",
    "select_info_set",
]

SUBSTREAM_FRAMES = 1024


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    """Independent substream for one 1024-frame block of one stream."""
    return np.random.Generator(np.random.Philox(key=[seed, (stream << 32) + block]))


def _block_sizes(trials: int):
    n_blocks = (trials + SUBSTREAM_FRAMES - 1) // SUBSTREAM_FRAMES
    for b in range(n_blocks):
        yield b, min(SUBSTREAM_FRAMES, trials - b * SUBSTREAM_FRAMES)


@dataclass(frozen=True)
class SlotEstimate:
    """Estimated first-error probability of one schedule slot."""

    slot: int
    owner: int
    first_error_prob: float
    trials: int
    errors: int = 0

    @property
    def zero_count(self) -> bool:
        return self.errors == 0


@dataclass
class EstimateSet:
    """Genie estimates for every slot of one (N, order) schedule."""

    N: int
    order: BlockOrder
    slots: list[SlotEstimate]
    trials: int
    seed: int

    def error_probs(self) -> np.ndarray:
        return np.array([s.first_error_prob for s in self.slots])

    def to_csv(self, fh, header_lines=()) -> None:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["slot", "owner", "err_prob", "trials"])
        for s in self.slots:
            writer.writerow([s.slot, s.owner, f"{s.first_error_prob:.6g}",
                             s.trials])


def sample_mac_outputs(channel, x1: np.ndarray, x2: np.ndarray,
                       rng: np.random.Generator) -> np.ndarray:
    """Draw channel outputs for codeword pairs (one row per frame)."""
    if isinstance(channel, GaussianMacSpec):
        mean = (2.0 * x1 - 1.0) + (2.0 * x2 - 1.0)
        return mean + rng.normal(0.0, channel.noise_std, size=x1.shape)
    if isinstance(channel, DiscreteMac):
        cdf = np.cumsum(channel.prob, axis=2)
        u = rng.random(x1.shape)
        rows = cdf[x1.astype(np.int64), x2.astype(np.int64)]
        return (u[..., None] > rows).sum(axis=-1).astype(np.int64)
    raise TypeError(f"unsupported channel type {type(channel).__name__}")


def genie_error_estimates(N: int, order: BlockOrder, channel, trials: int,
                          seed: int, threads: int = 1,
                          stream: int = 0) -> EstimateSet:
    """Estimate every slot's first-error probability by genie-aided decoding.

    Both users draw uniform messages (nothing frozen), the joint decoder
    runs with each decision corrected to the truth, and mismatches are
    counted per slot.  Deterministic for a given seed; blocks merge by
    commutative summation so ``threads`` never changes the result.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sched = Schedule(N, order)
    code = MacPolarCode(N=N, order=order, info_set_1=np.arange(N),
                        info_set_2=np.arange(N))

    def run_block(args):
        b, size = args
        rng = _block_rng(seed, stream, b)
        u = rng.integers(0, 2, (size, N), dtype=np.uint8)
        v = rng.integers(0, 2, (size, N), dtype=np.uint8)
        y = sample_mac_outputs(channel, polar_encode(u), polar_encode(v), rng)
        res = joint_sc_decode(code, y, channel, genie_bits=(u, v))
        return res.errors.sum(axis=0).astype(np.int64)

    blocks = list(_block_sizes(trials))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = sum(pool.map(run_block, blocks))
    else:
        counts = sum(run_block(b) for b in blocks)

    slots = [SlotEstimate(slot=j, owner=int(sched.owner_of_slot[j]),
                          first_error_prob=counts[j] / trials,
                          trials=trials, errors=int(counts[j]))
             for j in range(2 * N)]
    return EstimateSet(N=N, order=order, slots=slots, trials=trials, seed=seed)


def select_frozen_sets(estimates: EstimateSet, budget_1: float,
                       budget_2: float) -> MacPolarCode:
    """Greedily pick each user's best slots under its error budget.

    Slots are taken in ascending estimated error (ties to the lower slot
    index) while the running sum stays within the budget, so the union
    bound on each user's frame error rate holds by construction.
    """
    if budget_1 < 0 or budget_2 < 0:
        raise ValueError("budgets must be nonnegative")
    sched = Schedule(estimates.N, estimates.order)
    info = {1: [], 2: []}
    for user, budget in ((1, budget_1), (2, budget_2)):
        own = [s for s in estimates.slots if s.owner == user]
        own.sort(key=lambda s: (s.first_error_prob, s.slot))
        total = 0.0
        for s in own:
            if total + s.first_error_prob > budget:
                break
            total += s.first_error_prob
            info[user].append(sched.user_index_of_slot[s.slot])
    return MacPolarCode(N=estimates.N, order=estimates.order,
                        info_set_1=np.array(info[1], dtype=np.int64),
                        info_set_2=np.array(info[2], dtype=np.int64))


def selected_error_sum(estimates: EstimateSet, code: MacPolarCode) -> tuple[float, float]:
    """Union-bound error sums of the code's information sets."""
    sched = Schedule(estimates.N, estimates.order)
    probs = estimates.error_probs()
    sums = []
    for user, info in ((1, code.info_set_1), (2, code.info_set_2)):
        slots = [sched.slot_of_user_index(user, int(p)) for p in info]
        sums.append(float(probs[slots].sum()) if slots else 0.0)
    return sums[0], sums[1]


# ---------------------------------------------------------------------------
# Region sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionRecord:
    order_id: str
    budget_1: float
    budget_2: float
    r1: float
    r2: float
    p1: float
    p2: float
    N: int
    trials: int
    seed: int


@dataclass
class RegionReport:
    """Swept (order, budget split) records backing the rate-region figures."""

    records: list[RegionRecord] = field(default_factory=list)
    sum_capacity: float | None = None

    CSV_HEADER = ["order_id", "budget1", "budget2", "R1", "R2", "P1", "P2",
                  "N", "trials", "seed"]

    def to_csv(self, fh, header_lines=()) -> None:
        for line in header_lines:
            fh.write(f"# {line}\n")
        if self.sum_capacity is not None:
            fh.write(f"# sum_capacity={self.sum_capacity:.6g}\n")
        writer = csv.writer(fh)
        writer.writerow(self.CSV_HEADER)
        for r in self.records:
            writer.writerow([r.order_id, f"{r.budget_1:.6g}", f"{r.budget_2:.6g}",
                             f"{r.r1:.6g}", f"{r.r2:.6g}", f"{r.p1:.6g}",
                             f"{r.p2:.6g}", r.N, r.trials, r.seed])

    def csv_text(self, header_lines=()) -> str:
        buf = io.StringIO()
        self.to_csv(buf, header_lines)
        return buf.getvalue()


def region_sweep(N: int, channel, orders, total_budget: float, splits: int,
                 trials: int, seed: int, threads: int = 1) -> RegionReport:
    """Sweep budget splits for every order and record the achieved pairs.

    One estimate set is computed per order (derived substream per order)
    and reused across the budget grid; the achievable region is read as
    the union over all orders.
    """
    if splits < 2:
        raise ValueError("need at least 2 budget splits")
    report = RegionReport()
    for oi, order in enumerate(orders):
        est = genie_error_estimates(N, order, channel, trials, seed,
                                    threads=threads, stream=oi)
        for t in np.linspace(0.0, 1.0, splits):
            b1 = float(t * total_budget)
            b2 = float((1.0 - t) * total_budget)
            code = select_frozen_sets(est, b1, b2)
            p1, p2 = selected_error_sum(est, code)
            report.records.append(RegionRecord(
                order_id=order.order_id, budget_1=b1, budget_2=b2,
                r1=code.rate_1, r2=code.rate_2, p1=p1, p2=p2,
                N=N, trials=trials, seed=seed))
    return report


def good_sets_exact(w: DiscreteMac, order: BlockOrder, n: int,
                    z_threshold: float):
    """Slots whose exact Bhattacharyya parameter clears the threshold,
    partitioned by owner."""
    channels = exact_mac_bit_channels(w, order, n)
    sched = Schedule(1 << n, order)
    good = np.array([bhattacharyya(c) < z_threshold for c in channels])
    g1 = np.flatnonzero(good & (sched.owner_of_slot == 1))
    g2 = np.flatnonzero(good & (sched.owner_of_slot == 2))
    return g1, g2


# ---------------------------------------------------------------------------
# End-to-end simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationResult:
    frames: int
    frame_errors_1: int
    frame_errors_2: int
    frame_errors_total: int

    @property
    def fer_1(self) -> float:
        return self.frame_errors_1 / self.frames

    @property
    def fer_2(self) -> float:
        return self.frame_errors_2 / self.frames

    @property
    def fer_total(self) -> float:
        return self.frame_errors_total / self.frames

    def confidence_95(self, count: int) -> tuple[float, float]:
        p = count / self.frames
        half = 1.96 * np.sqrt(max(p * (1.0 - p), 1e-12) / self.frames)
        return (max(0.0, p - half), min(1.0, p + half))


def simulate_frames(code: MacPolarCode, channel, frames: int, seed: int,
                    threads: int = 1, stream: int = 0) -> SimulationResult:
    """Transmit random messages through the channel and count frame errors."""

    def run_block(args):
        b, size = args
        rng = _block_rng(seed, stream, b)
        i1 = rng.integers(0, 2, (size, code.info_set_1.size), dtype=np.uint8)
        i2 = rng.integers(0, 2, (size, code.info_set_2.size), dtype=np.uint8)
        x1, x2 = mac_polar_encode(code, i1, i2)
        y = sample_mac_outputs(channel, x1, x2, rng)
        res = joint_sc_decode(code, y, channel)
        e1 = (res.u_hat[:, code.info_set_1] != i1).any(axis=1)
        e2 = (res.v_hat[:, code.info_set_2] != i2).any(axis=1)
        return np.array([e1.sum(), e2.sum(), (e1 | e2).sum()], dtype=np.int64)

    blocks = list(_block_sizes(frames))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = sum(pool.map(run_block, blocks))
    else:
        counts = sum(run_block(b) for b in blocks)
    return SimulationResult(frames=frames, frame_errors_1=int(counts[0]),
                            frame_errors_2=int(counts[1]),
                            frame_errors_total=int(counts[2]))


# ---------------------------------------------------------------------------
# Single-user construction (corner-point and compound schemes)
# ---------------------------------------------------------------------------

def single_user_genie_estimates(N: int, llr_fn, trials: int, seed: int,
                                stream: int = 0) -> np.ndarray:
    """Genie-aided per-position error estimates of a single-user transform.

    ``llr_fn(rng, x)`` must return the leaf LLRs for transmitted codeword
    bits ``x`` (one frame per row); it owns the channel simulation, e.g.
    interference-plus-noise draws.
    """
    counts = np.zeros(N, dtype=np.int64)
    frozen = FrozenSpec.from_info_set(N, range(N))
    for b, size in _block_sizes(trials):
        rng = _block_rng(seed, stream, b)
        u = rng.integers(0, 2, (size, N), dtype=np.uint8)
        x = polar_encode(u)
        llr = llr_fn(rng, x)
        errors, _ = sc_genie_pass(llr, frozen, u)
        counts += errors.sum(axis=0)
    return counts / trials


def dot_llr_sampler(spec: GaussianMacSpec):
    """Leaf evidence for a code decoded with the other user as noise."""

    def sample(rng, x):
        interferer = rng.integers(0, 2, x.shape, dtype=np.uint8)
        y = ((2.0 * x - 1.0) + (2.0 * interferer - 1.0)
             + rng.normal(0.0, spec.noise_std, x.shape))
        return llr_dot(y, spec)

    return sample


def ddot_llr_sampler(spec: GaussianMacSpec):
    """Leaf evidence for a code decoded after the other user is known."""

    def sample(rng, x):
        interferer = rng.integers(0, 2, x.shape, dtype=np.uint8)
        y = ((2.0 * interferer - 1.0) + (2.0 * x - 1.0)
             + rng.normal(0.0, spec.noise_std, x.shape))
        return llr_ddot(y, interferer, spec)

    return sample


def select_info_set(error_probs: np.ndarray, budget: float) -> np.ndarray:
    """Greedy single-user selection under an error-sum budget."""
    order = np.lexsort((np.arange(error_probs.size), error_probs))
    total = 0.0
    chosen = []
    for idx in order:
        p = error_probs[idx]
        if total + p > budget:
            break
        total += p
        chosen.append(idx)
    return np.sort(np.array(chosen, dtype=np.int64))
