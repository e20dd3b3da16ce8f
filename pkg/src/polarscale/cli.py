"""Command-line front end.

Subcommands: construct (design a code), exact (enumeration engine),
mc (Monte Carlo), bounds (closed-form thresholds), scaling (sweep + fit),
verify (run the numeric inequality checks).  Exit codes: 0 success,
1 bad arguments or validation failure, 2 verification found violations.
"""

from __future__ import annotations

import argparse
import json
import sys

from polarscale.decoders import Decoder
from polarscale.polar import (
    PolarCodeSpec,
    evolve_profile,
    min_distance,
    save_frozen_set,
    save_profile_csv,
    select_frozen,
)


def _add_code_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True, help="log2 of the blocklength")
    p.add_argument("--eps", type=float, required=True, help="erasure probability")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rate", type=float, help="target rate K/N")
    g.add_argument("--frozen-file", help="path of explicit frozen indices")


def _resolve_spec(args) -> PolarCodeSpec:
    if args.frozen_file:
        from polarscale.polar import load_frozen_set

        return load_frozen_set(args.frozen_file, args.n)
    rate = args.rate if args.rate is not None else 0.5
    profile = evolve_profile(args.eps if args.eps > 0 else 0.5, args.n)
    return select_frozen(profile, round(rate * (1 << args.n)))


def _cmd_construct(args) -> int:
    profile = evolve_profile(args.eps, args.n)
    spec = _resolve_spec(args)
    info_z = [profile.z[i - 1] for i in spec.info]
    print(f"N={spec.N} K={spec.K} rate={spec.rate:.6g} eps={args.eps}")
    if spec.K:
        print(f"d_min={min_distance(spec)}")
        print(f"info-channel Z range: [{min(info_z):.6g}, {max(info_z):.6g}]")
        print(f"union bound on SC error: {sum(info_z):.6g}")
    if args.out_frozen:
        save_frozen_set(spec, args.out_frozen)
        print(f"frozen set -> {args.out_frozen}")
    if args.out_profile:
        save_profile_csv(profile, args.out_profile)
        print(f"profile -> {args.out_profile}")
    return 0


def _cmd_exact(args) -> int:
    from polarscale import exact

    spec = _resolve_spec(args)
    decoder = Decoder(args.decoder, args.param)
    res = exact.exact_error_probability(spec, args.eps, decoder)
    record = {
        "code": {"n": args.n, "K": spec.K, "frozen": list(spec.frozen)},
        "epsilon": args.eps,
        "decoder": f"{decoder.kind}:{decoder.param}",
        "value": res.value,
        "method": res.method,
    }
    print(json.dumps(record))
    return 0


def _cmd_mc(args) -> int:
    from polarscale import harness

    if args.config:
        config = harness.RunConfig.from_json(args.config)
    else:
        if args.n is None or args.eps is None:
            raise ValueError("mc needs --config or both --n and --eps")
        if args.rate is None and args.frozen_file is None:
            args.rate = 0.5
        config = harness.RunConfig(
            n=args.n,
            epsilon=args.eps,
            decoder=args.decoder,
            param=args.param,
            rate=args.rate,
            frozen_file=args.frozen_file,
            trials=args.trials,
            seed=args.seed,
            out=args.out,
        )
    est = harness.mc_estimate(config)
    print(
        f"pe={est.value:.6g} ({est.failures}/{est.trials}) "
        f"ci95=[{est.ci_low:.6g}, {est.ci_high:.6g}] seed={est.seed}"
    )
    return 0


def _cmd_bounds(args) -> int:
    from polarscale import bounds

    if args.z is not None:
        ts = bounds.thresholds_bmsc(args.z, args.capacity, args.pe)
        head = f"channel Z={args.z} capacity={args.capacity} pe={args.pe}"
    else:
        ts = bounds.thresholds_bec(args.eps, args.pe)
        head = f"erasure channel eps={args.eps} pe={args.pe}"
    print(head)
    print(f"  c    = {ts.c}")
    print(f"  mbar = {ts.mbar:.12g}")
    print(f"  nbar = {ts.nbar:.12g}")
    print(f"  kbar = {ts.kbar}")
    print(json.dumps({"c": ts.c, "mbar": ts.mbar, "nbar": ts.nbar, "kbar": ts.kbar}))
    return 0


def _cmd_scaling(args) -> int:
    from polarscale import harness

    ns = list(range(args.n_min, args.n_max + 1))
    fit = harness.run_scaling_sweep(
        ns,
        args.eps,
        args.target_pe,
        args.trials,
        args.seed,
        decoder=Decoder(args.decoder, args.param),
        out_csv=args.out,
    )
    for N, rate in fit.samples:
        print(f"N={N:6d} rate={rate:.6g} gap={1 - args.eps - rate:.6g}")
    print(f"mu={fit.mu:.4f} residual={fit.residual:.3g}")
    return 0


def _cmd_verify(args) -> int:
    import math

    import numpy as np

    from polarscale import bounds, exact, harness

    failures: list[str] = []

    def check(name: str, ok: bool) -> None:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    eps_grid = (0.2, 0.5, 0.8) if args.quick else tuple(i / 10 for i in range(1, 10))

    # list-doubling chain on exact MAP errors, conditional on the
    # minimum-distance premise
    ok = True
    for n in (2, 3, 4):
        for eps in eps_grid:
            tabs = exact.rate_sweep_tables(evolve_profile(eps, n))
            for K in range(1, (1 << n) + 1):
                dmin = min_distance(tabs.spec_at(K))
                for L in (1, 2, 4):
                    pe_L = tabs.map_error(K, L, eps)
                    pe_2L = tabs.map_error(K, 2 * L, eps)
                    if pe_L <= 0.0:
                        continue
                    rep = bounds.di_bound_check(pe_L, pe_2L, dmin, eps, pe_L)
                    if dmin > math.log(pe_L / 8) / math.log(eps):
                        ok &= rep.holds
    check("map list-doubling bound on exact instances", ok)

    # genie chain: whenever 1/4 > pe(k) > 0 and the budget k+1 stays below the
    # code dimension.  At k = K-1 the aided decoder covers every information
    # bit and can never fail, so the squared lower bound is unattainable there;
    # that corner disappears as the blocklength grows at fixed rate.
    ok = True
    checked = 0
    for n in (2, 3, 4):
        for eps in eps_grid:
            tabs = exact.rate_sweep_tables(evolve_profile(eps, n))
            for K in range(2, (1 << n) + 1):
                for k in range(0, K - 1):
                    pe_k = tabs.sc_error(K, k, eps)
                    pe_k1 = tabs.sc_error(K, k + 1, eps)
                    if not 0.0 < pe_k < 0.25:
                        continue
                    checked += 1
                    ok &= bounds.genie_step_check(pe_k, pe_k1, 0.0).holds
    check("genie budget-doubling bound on exact instances", ok and checked > 0)

    # positive correlation of union events
    rng = np.random.default_rng(7)
    ok = True
    spec = select_frozen(evolve_profile(0.5, 3), 5)
    pairs = 100 if args.quick else 1000
    nonzero = [
        tuple((v >> j) & 1 for j in range(spec.K)) for v in range(1, 1 << spec.K)
    ]
    for _ in range(pairs):
        u1 = [nonzero[i] for i in rng.choice(len(nonzero), rng.integers(1, 5), replace=False)]
        u2 = [nonzero[i] for i in rng.choice(len(nonzero), rng.integers(1, 5), replace=False)]
        ok &= exact.fkg_pair_check(spec, 0.45, u1, u2).holds
    check(f"union-event positive correlation ({pairs} random pairs)", ok)

    # correlation sum vs bound
    ok = True
    for n in (1, 2, 3):
        for eps in eps_grid:
            rep = exact.correlation_matrix(PolarCodeSpec(n, ()), eps)
            ok &= rep.rho_sum_with_diagonal <= rep.bound + 1e-9
    check("erasure-indicator correlation sum within bound", ok)

    # per-trial dominance on a shared Monte Carlo stream
    spec = select_frozen(evolve_profile(0.5, 8), 80)
    prof = harness.trial_decode_profiles(spec, 0.5, 20_000, 12345)
    ok = all(
        prof.failures_scl(1 << k) <= prof.failures_sc(k) for k in range(4)
    )
    maps = [prof.failures_map(L) for L in (1, 2, 4, 8)]
    ok &= all(a >= b for a, b in zip(maps, maps[1:]))
    ok &= bool(np.all(prof.final_dim <= prof.peak_dim))
    ok &= bool(np.all(prof.peak_dim <= prof.erased_info))
    check("per-trial decoder dominance under common randomness", ok)

    if failures:
        print(f"{len(failures)} verification check(s) failed")
        return 2
    print("all verification checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarscale",
        description="polar-code construction, exact/MC decoding analysis, "
        "and scaling diagnostics on the erasure channel",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="design a code and emit its artifacts")
    _add_code_args(p)
    p.add_argument("--out-frozen", help="write frozen indices here")
    p.add_argument("--out-profile", help="write the reliability profile CSV here")
    p.set_defaults(func=_cmd_construct)

    p = sub.add_parser("exact", help="exact error probability by enumeration")
    _add_code_args(p)
    p.add_argument("--decoder", choices=["sc", "genie", "scl", "map"], default="map")
    p.add_argument("--param", type=int, default=1, help="list size or genie budget")
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("mc", help="Monte Carlo error estimate")
    p.add_argument("--config", help="JSON file mirroring RunConfig")
    p.add_argument("--n", type=int, help="log2 of the blocklength")
    p.add_argument("--eps", type=float, help="erasure probability")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rate", type=float, help="target rate K/N")
    g.add_argument("--frozen-file", help="path of explicit frozen indices")
    p.add_argument("--decoder", choices=["sc", "genie", "scl", "map"], default="sc")
    p.add_argument("--param", type=int, default=0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="write a CSV row of the estimate here")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("bounds", help="threshold formulas")
    p.add_argument("--eps", type=float, help="erasure probability (erasure variant)")
    p.add_argument("--z", type=float, help="Bhattacharyya parameter (general variant)")
    p.add_argument("--capacity", type=float, help="channel capacity (general variant)")
    p.add_argument("--pe", type=float, required=True, help="target error probability")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("scaling", help="rate sweep and scaling-exponent fit")
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--target-pe", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--decoder", choices=["sc", "genie"], default="sc")
    p.add_argument("--param", type=int, default=0)
    p.add_argument("--out", help="CSV of (N, rate, gap, z) samples")
    p.set_defaults(func=_cmd_scaling)

    p = sub.add_parser("verify", help="run the numeric inequality checks")
    p.add_argument("--quick", action="store_true", help="reduced grids")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bounds":
        bec_style = args.eps is not None and args.z is None
        gen_style = args.eps is None and args.z is not None and args.capacity is not None
        if not (bec_style or gen_style):
            print("give either --eps or both --z and --capacity", file=sys.stderr)
            return 1
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
