"""Command-line entry point for reproducible experiments.

Subcommands: ``info`` (region vertices and block terms), ``construct``
(code + slot-estimate files), ``simulate`` (end-to-end FER), ``region``
(rate-region sweep CSV), ``compound`` (rate comparison CSV) and ``verify``
(exact lemma checks).  Every output embeds the seed and a hash of the
resolved configuration; identical configurations reproduce byte-identical
files.  Report commands also render a quick-look figure next to the CSV
unless ``--no-fig`` is given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .channels import (
    DiscreteMac,
    GaussianMacSpec,
    adder_mac,
    bec,
    bsc,
    default_gaussian_quantization,
    load_channel,
    mac_region_vertices,
)
from .compound import compound_rate_table, rate_table_csv
from .construction import (
    genie_error_estimates,
    region_sweep,
    select_frozen_sets,
    selected_error_sum,
    simulate_frames,
)
from .mac_polar import (
    BlockOrder,
    enumerate_monotone_orders,
    load_code,
    make_preset_order,
    order_rate_profile,
    save_code,
)
from .verification import (
    build_sty_example,
    verify_chain_rules,
    verify_channel_split,
    verify_sty_identities,
)

_EXIT_OK = 0
_EXIT_VERIFY_FAIL = 1
_EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _parse_channel(text: str, bins: int):
    """Channel shorthand: gaussian:sigma=<f>, adder, file:<path>,
    sty:bec=<eps>, sty:bsc=<p>."""
    if text == "adder":
        return adder_mac(), None
    if text.startswith("gaussian:"):
        params = dict(kv.split("=") for kv in text[len("gaussian:"):].split(","))
        try:
            spec = GaussianMacSpec(sigma=float(params["sigma"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad gaussian spec {text!r}: {exc}") from exc
        return spec, None
    if text.startswith("file:"):
        return load_channel(text[len("file:"):]), None
    if text.startswith("sty:"):
        kind, _, val = text[len("sty:"):].partition("=")
        try:
            wp = bec(float(val)) if kind == "bec" else (
                bsc(float(val)) if kind == "bsc" else None)
        except ValueError as exc:
            raise ConfigError(f"bad sty spec {text!r}") from exc
        if wp is None:
            raise ConfigError(f"unknown sty constituent {kind!r}")
        return build_sty_example(wp), wp
    raise ConfigError(f"unknown channel spec {text!r}")


def _as_discrete(channel, bins: int) -> DiscreteMac:
    if isinstance(channel, GaussianMacSpec):
        return default_gaussian_quantization(channel, bins=bins)
    return channel


def _parse_orders(text: str, N: int) -> list[BlockOrder]:
    """Order shorthand: ``all-monotone:<L>``, ``preset:<L>:<i>`` or an
    explicit label sequence like ``U1,V1,U2,V2``."""
    if text.startswith("all-monotone:"):
        return enumerate_monotone_orders(int(text.split(":")[1]))
    if text.startswith("preset:"):
        _, L, i = text.split(":")
        return [make_preset_order(int(L), int(i))]
    return [BlockOrder.from_string(text)]


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _meta_lines(cfg: dict, seed: int) -> list[str]:
    return [f"macpolar {__version__} seed={seed} config={_config_hash(cfg)}"]


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MACPOLAR_SEED")
    return int(env) if env else 0


def _render_region_fig(csv_path: str, fig_path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    capacity = None
    rows = []
    with open(csv_path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if "sum_capacity=" in line:
                    capacity = float(line.split("sum_capacity=")[1])
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(dict(zip(header, line.split(","))))
    fig, ax = plt.subplots(figsize=(5, 5))
    for N in sorted({int(r["N"]) for r in rows}):
        pts = np.array([[float(r["R1"]), float(r["R2"])]
                        for r in rows if int(r["N"]) == N])
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=4, label=f"N={N}")
    if capacity is not None:
        xs = np.linspace(0.0, capacity, 50)
        ax.plot(xs, capacity - xs, "k--", lw=1, label="sum capacity")
    ax.set_xlabel("R1 (bits/use)")
    ax.set_ylabel("R2 (bits/use)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


def _render_table_fig(rows, fig_path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    Ns = [r.N for r in rows]
    ax.plot(Ns, [r.rate_2N for r in rows], "o-", label="length 2N")
    ax.plot(Ns, [r.rate_compound for r in rows], "s-", label="compound")
    ax.plot(Ns, [r.rate_N for r in rows], "^-", label="length N")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("N")
    ax.set_ylabel("rate (bits/use)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_info(args) -> int:
    channel, _ = _parse_channel(args.channel, args.bins)
    W = _as_discrete(channel, args.bins)
    v = mac_region_vertices(W)
    out = {
        "a_point": list(v.a_point),
        "b_point": list(v.b_point),
        "sum_rate": v.sum_rate,
        "per_user_max": v.b_point[0],
    }
    if args.block_terms:
        profile = order_rate_profile(W, BlockOrder.from_string("U1,V1,U2,V2"))
        out["block_terms_U1V1U2V2"] = profile.terms.tolist()
        out["block_rate_pair"] = [profile.r1, profile.r2]
    cfg = {"cmd": "info", "channel": args.channel, "bins": args.bins}
    out["_meta"] = {"version": __version__, "seed": 0,
                    "config": _config_hash(cfg)}
    json.dump(out, sys.stdout, indent=2)
    print()
    return _EXIT_OK


def _cmd_construct(args) -> int:
    seed = _resolve_seed(args)
    channel, _ = _parse_channel(args.channel, args.bins)
    orders = _parse_orders(args.order, args.N)
    if len(orders) != 1:
        raise ConfigError("construct needs exactly one order")
    est = genie_error_estimates(args.N, orders[0], channel, args.trials, seed,
                                threads=args.threads)
    code = select_frozen_sets(est, args.budget1, args.budget2)
    p1, p2 = selected_error_sum(est, code)
    cfg = {"cmd": "construct", "channel": args.channel, "N": args.N,
           "order": orders[0].order_id, "budget1": args.budget1,
           "budget2": args.budget2, "trials": args.trials, "seed": seed}
    save_code(code, args.out + ".code.json")
    with open(args.out + ".estimates.csv", "w") as fh:
        est.to_csv(fh, header_lines=_meta_lines(cfg, seed))
    print(json.dumps({"R1": code.rate_1, "R2": code.rate_2, "P1": p1, "P2": p2,
                      "code": args.out + ".code.json",
                      "estimates": args.out + ".estimates.csv",
                      "_meta": {"seed": seed, "config": _config_hash(cfg)}}))
    return _EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    channel, _ = _parse_channel(args.channel, args.bins)
    code = load_code(args.code)
    res = simulate_frames(code, channel, args.frames, seed,
                          threads=args.threads)
    cfg = {"cmd": "simulate", "channel": args.channel, "code": args.code,
           "frames": args.frames, "seed": seed}
    out = {
        "frames": res.frames,
        "fer_1": res.fer_1, "fer_1_ci95": res.confidence_95(res.frame_errors_1),
        "fer_2": res.fer_2, "fer_2_ci95": res.confidence_95(res.frame_errors_2),
        "fer_total": res.fer_total,
        "fer_total_ci95": res.confidence_95(res.frame_errors_total),
        "R1": code.rate_1, "R2": code.rate_2,
        "_meta": {"seed": seed, "config": _config_hash(cfg)},
    }
    json.dump(out, sys.stdout, indent=2)
    print()
    return _EXIT_OK


def _cmd_region(args) -> int:
    seed = _resolve_seed(args)
    channel, _ = _parse_channel(args.channel, args.bins)
    N_list = [int(t) for t in str(args.N).split(",")]
    cfg = {"cmd": "region", "channel": args.channel, "N": N_list,
           "orders": args.orders, "budget": args.budget, "splits": args.splits,
           "trials": args.trials, "seed": seed}
    capacity = mac_region_vertices(_as_discrete(channel, args.bins)).sum_rate
    from .construction import RegionReport
    merged = RegionReport(sum_capacity=capacity)
    for N in N_list:
        orders = _parse_orders(args.orders, N)
        rep = region_sweep(N, channel, orders, args.budget, args.splits,
                           args.trials, seed, threads=args.threads)
        merged.records.extend(rep.records)
    with open(args.out, "w") as fh:
        merged.to_csv(fh, header_lines=_meta_lines(cfg, seed))
    if not args.no_fig:
        _render_region_fig(args.out, os.path.splitext(args.out)[0] + ".png")
    print(f"wrote {args.out} ({len(merged.records)} records)")
    return _EXIT_OK


def _cmd_compound(args) -> int:
    seed = _resolve_seed(args)
    channel, _ = _parse_channel(args.channel, args.bins)
    if not isinstance(channel, GaussianMacSpec):
        raise ConfigError("compound requires a gaussian channel spec")
    N_list = [int(t) for t in str(args.N).split(",")]
    cfg = {"cmd": "compound", "channel": args.channel, "N": N_list,
           "budget": args.budget, "trials": args.trials, "seed": seed}
    rows = compound_rate_table(N_list, channel, args.budget, args.trials, seed)
    with open(args.out, "w") as fh:
        rate_table_csv(rows, fh, header_lines=_meta_lines(cfg, seed))
    if not args.no_fig:
        _render_table_fig(rows, os.path.splitext(args.out)[0] + ".png")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return _EXIT_OK


def _cmd_verify(args) -> int:
    channel, wp = _parse_channel(args.channel, args.bins)
    W = _as_discrete(channel, args.bins)
    which = args.lemmas
    reports = []
    if which in ("all", "channel-split"):
        for order in (make_preset_order(2, 1),
                      BlockOrder.from_string("U1,V1,U2,V2")):
            reports.append(verify_channel_split(W, order, args.n_max,
                                                tol=args.tol))
    if which in ("all", "chain-rules"):
        for L in (2, 4):
            reports.append(verify_chain_rules(W, L, tol=args.tol))
    if which in ("all", "sty"):
        if wp is None:
            if which == "sty":
                raise ConfigError("sty lemmas need an sty:* channel")
        else:
            reports.append(verify_sty_identities(wp, args.n_max, tol=args.tol))
    for rep in reports:
        print(rep.line())
    return _EXIT_OK if all(r.passed for r in reports) else _EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macpolar", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, trials_default=100_000):
        sp.add_argument("--channel", required=True,
                        help="gaussian:sigma=<f> | adder | file:<path> | "
                             "sty:bec=<eps> | sty:bsc=<p>")
        sp.add_argument("--bins", type=int, default=2000,
                        help="quantization bins for gaussian channels")
        sp.add_argument("--seed", type=int, default=None,
                        help="RNG seed (fallback: MACPOLAR_SEED, then 0)")
        sp.add_argument("--trials", type=int, default=trials_default)
        sp.add_argument("--threads", type=int,
                        default=max(1, os.cpu_count() or 1))

    sp = sub.add_parser("info", help="region vertices and block terms")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--bins", type=int, default=2000)
    sp.add_argument("--block-terms", action="store_true", default=True)
    sp.add_argument("--no-block-terms", dest="block_terms",
                    action="store_false")
    sp.set_defaults(fn=_cmd_info)

    sp = sub.add_parser("construct", help="build a code from genie estimates")
    common(sp)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--order", required=True)
    sp.add_argument("--budget1", type=float, default=5e-3)
    sp.add_argument("--budget2", type=float, default=5e-3)
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.set_defaults(fn=_cmd_construct)

    sp = sub.add_parser("simulate", help="end-to-end frame error simulation")
    common(sp)
    sp.add_argument("--code", required=True, help="code JSON path")
    sp.add_argument("--frames", type=int, default=10_000)
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("region", help="rate-region sweep")
    common(sp)
    sp.add_argument("--N", required=True, help="block length or comma list")
    sp.add_argument("--orders", default="all-monotone:2")
    sp.add_argument("--budget", type=float, default=1e-2)
    sp.add_argument("--splits", type=int, default=21)
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-fig", action="store_true")
    sp.set_defaults(fn=_cmd_region)

    sp = sub.add_parser("compound", help="compound-rate comparison table")
    common(sp)
    sp.add_argument("--N", required=True, help="half length or comma list")
    sp.add_argument("--budget", type=float, default=5e-3)
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-fig", action="store_true")
    sp.set_defaults(fn=_cmd_compound)

    sp = sub.add_parser("verify", help="exact lemma checks")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--bins", type=int, default=8)
    sp.add_argument("--lemmas", default="all",
                    choices=["all", "channel-split", "chain-rules", "sty"])
    sp.add_argument("--n-max", type=int, default=3)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(fn=_cmd_verify)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG


def main() -> None:
    sys.exit(run())
