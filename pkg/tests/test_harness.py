"""Monte Carlo harness: reproducibility contracts, agreement with the exact
engine, the random-ensemble rank experiment, and the CLI front end.

Anything statistical uses fixed seeds and generous z-multipliers so the
suite is deterministic; coverage of the intervals themselves is exercised by
an explicit 100-seed census against exact values.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from polarscale import gf2, harness
from polarscale.decoders import Decoder, decode
from polarscale.exact import exact_error_probability
from polarscale.harness import (
    EstimateWithCI,
    RunConfig,
    mc_estimate,
    random_rank_experiment,
    random_rank_joint,
    rate_search_at_pe,
    run_scaling_sweep,
    trial_decode_profiles,
    trial_erased_info_counts,
    wilson_interval,
)
from polarscale.polar import (
    evolve_profile,
    reliability_order,
    save_frozen_set,
    select_frozen,
)

Z999 = 3.2905267314919255  # two-sided 99.9%
Z99 = 2.5758293035489004


# ---------------------------------------------------------------------------
# intervals
# ---------------------------------------------------------------------------


def test_wilson_edges():
    lo, hi = wilson_interval(0, 1000)
    assert lo == 0.0 and 0 < hi < 0.01
    lo, hi = wilson_interval(1000, 1000)
    assert hi == 1.0 and 0.99 < lo < 1
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_wilson_hand_value():
    # center (p + z^2/2n)/(1 + z^2/n), half-width from the score equation
    import math

    z = harness.WILSON_Z95
    lo, hi = wilson_interval(5, 100)
    denom = 1 + z * z / 100
    center = (0.05 + z * z / 200) / denom
    half = z * math.sqrt(0.05 * 0.95 / 100 + z * z / 40000) / denom
    assert lo == pytest.approx(center - half, abs=1e-15)
    assert hi == pytest.approx(center + half, abs=1e-15)
    # wider confidence, wider interval
    lo99, hi99 = wilson_interval(5, 100, z=Z99)
    assert lo99 < lo and hi99 > hi


def test_estimate_invariants():
    est = EstimateWithCI(0.5, 10, 5, 0.2, 0.8, seed=1)
    assert est.width == pytest.approx(0.6)
    with pytest.raises(ValueError):
        EstimateWithCI(0.9, 10, 5, 0.2, 0.8, seed=1)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_runconfig_validation():
    good = dict(n=3, epsilon=0.5, rate=0.5)
    RunConfig(**good)
    for bad in [
        dict(good, n=0),
        dict(good, n=17),
        dict(good, epsilon=1.0),
        dict(good, epsilon=-0.1),
        dict(good, rate=1.5),
        dict(good, rate=None),  # neither rate nor frozen_file
        dict(good, frozen_file="x"),  # both
        dict(good, trials=0),
        dict(good, seed=1 << 64),
        dict(good, decoder="bogus"),
        dict(good, decoder="map", param=0),
    ]:
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_runconfig_json_roundtrip(tmp_path):
    cfg = RunConfig(n=4, epsilon=0.3, decoder="scl", param=4, rate=0.25,
                    trials=512, seed=9)
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    assert RunConfig.from_json(path) == cfg
    assert json.loads(cfg.to_json())["decoder"] == "scl"


def test_runconfig_code_spec(tmp_path):
    cfg = RunConfig(n=3, epsilon=0.4, rate=0.5)
    assert cfg.code_spec() == select_frozen(evolve_profile(0.4, 3), 4)
    # epsilon 0 falls back to a midpoint design
    cfg0 = RunConfig(n=3, epsilon=0.0, rate=0.5)
    assert cfg0.code_spec() == select_frozen(evolve_profile(0.5, 3), 4)
    # explicit frozen file wins over design
    spec = select_frozen(evolve_profile(0.9, 3), 2)
    fpath = tmp_path / "frozen.txt"
    save_frozen_set(spec, fpath)
    cfgf = RunConfig(n=3, epsilon=0.4, frozen_file=str(fpath))
    assert cfgf.code_spec().frozen == spec.frozen


# ---------------------------------------------------------------------------
# reproducibility contracts
# ---------------------------------------------------------------------------


def test_same_seed_bit_identical():
    cfg = RunConfig(n=5, epsilon=0.5, rate=0.4, trials=20_000, seed=77)
    a = mc_estimate(cfg)
    b = mc_estimate(cfg)
    assert a == b
    c = mc_estimate(RunConfig(n=5, epsilon=0.5, rate=0.4, trials=20_000, seed=78))
    assert c.failures != a.failures  # different stream, almost surely


def test_chunking_does_not_change_results(monkeypatch):
    # shrinking the per-chunk word budget reshuffles the work partition but
    # must not move a single trial's randomness
    cfg = RunConfig(n=4, epsilon=0.45, rate=0.5, trials=5_000, seed=3)
    cfg_map = RunConfig(n=4, epsilon=0.45, decoder="map", param=2, rate=0.5,
                        trials=5_000, seed=3)
    full = mc_estimate(cfg)
    full_map = mc_estimate(cfg_map)
    monkeypatch.setattr(harness, "_CHUNK_WORD_BUDGET", 1 << 9)
    assert mc_estimate(cfg) == full
    assert mc_estimate(cfg_map) == full_map


def test_trial_stream_is_prefix_stable():
    spec = select_frozen(evolve_profile(0.5, 3), 4)
    short = trial_erased_info_counts(spec, 0.5, 1_000, seed=42)
    long = trial_erased_info_counts(spec, 0.5, 2_500, seed=42)
    assert np.array_equal(long[:1_000], short)


def test_epsilon_zero_never_fails():
    cfg = RunConfig(n=3, epsilon=0.0, rate=0.5, trials=2_000, seed=1)
    est = mc_estimate(cfg)
    assert est.failures == 0 and est.value == 0.0 and est.ci_low == 0.0


# ---------------------------------------------------------------------------
# agreement with the exact engine
# ---------------------------------------------------------------------------


def test_profiles_match_per_pattern_decoding():
    # rebuild every pattern from the same counter stream and decode it the
    # slow way; the vectorized statistics must agree exactly
    spec = select_frozen(evolve_profile(0.4, 3), 5)
    trials, seed = 1_500, 8
    prof = trial_decode_profiles(spec, 0.4, trials, seed)
    wpt = harness._words_per_trial(8)
    raw = harness._raw_words(seed, 0, trials, wpt)
    bits = raw[:, :8] < harness._erasure_threshold(0.4)
    masks = harness._pattern_ints(bits)
    from polarscale.decoders import list_decode_profile, sc_erasure_set

    for t, mask in enumerate(masks):
        erased = sc_erasure_set(spec, mask)
        assert prof.erased_info[t] == len(erased)
        if erased:
            lp = list_decode_profile(spec, mask)
            assert prof.peak_dim[t] == lp.peak_dim
            assert prof.final_dim[t] == lp.final_dim
        else:
            assert prof.peak_dim[t] == 0 and prof.final_dim[t] == 0


@pytest.mark.parametrize(
    "decoder,param",
    [("sc", 0), ("genie", 1), ("map", 1), ("map", 2), ("scl", 2)],
)
def test_mc_tracks_exact_value(decoder, param):
    spec_args = (2, (1, 2))
    exact_val = exact_error_probability(
        select_frozen(evolve_profile(0.5, 2), 2), 0.5, Decoder(decoder, param)
    ).value
    for seed in (1, 2, 3):
        cfg = RunConfig(n=2, epsilon=0.5, decoder=decoder, param=param,
                        rate=0.5, trials=100_000, seed=seed)
        est = mc_estimate(cfg)
        lo, hi = wilson_interval(est.failures, est.trials, z=Z999)
        assert lo <= exact_val <= hi, (spec_args, decoder, param, seed, est)


def test_interval_coverage_census():
    # 100 seeds x 1e6 trials per code: the exact value must land inside the
    # run's own 99% interval in at least 99 of them
    cases = [
        (3, 4, 0.5, "sc", 0),
        (4, 8, 0.35, "sc", 0),
        (4, 10, 0.5, "genie", 1),
    ]
    for n, K, eps, kind, param in cases:
        spec = select_frozen(evolve_profile(eps, n), K)
        pexact = exact_error_probability(spec, eps, Decoder(kind, param)).value
        hits = 0
        for seed in range(1, 101):
            cfg = RunConfig(n=n, epsilon=eps, decoder=kind, param=param,
                            rate=K / (1 << n), trials=1_000_000, seed=seed)
            est = mc_estimate(cfg)
            lo, hi = wilson_interval(est.failures, est.trials, z=Z99)
            hits += lo <= pexact <= hi
        assert hits >= 99, (n, K, eps, kind, param, hits)


def test_trial_profiles_failure_counters():
    spec = select_frozen(evolve_profile(0.5, 6), 20)
    prof = trial_decode_profiles(spec, 0.5, 10_000, seed=13)
    assert prof.trials == 10_000
    for k in range(4):
        assert prof.failures_sc(k) == int(np.count_nonzero(prof.erased_info > k))
        # shared patterns: list-2^k can only beat the k-help genie
        assert prof.failures_scl(1 << k) <= prof.failures_sc(k)
        assert prof.failures_map(1 << k) <= prof.failures_scl(1 << k)
    fm = [prof.failures_map(1 << j) for j in range(6)]
    assert fm == sorted(fm, reverse=True)


def test_mc_genie_budget_doubling_consistency():
    # one shared stream, three budgets; the doubling lower bound should be
    # visible through the Monte Carlo noise at these margins
    n, eps, trials, seed = 8, 0.5, 30_000, 4
    rate = rate_search_at_pe(n, eps, Decoder("sc", 0), 0.2, trials, seed)
    spec = select_frozen(evolve_profile(eps, n), round(rate * (1 << n)))
    counts = trial_erased_info_counts(spec, eps, trials, seed)
    for k in (0, 1):
        f_k = int(np.count_nonzero(counts > k))
        f_k1 = int(np.count_nonzero(counts > k + 1))
        lo_k, _ = wilson_interval(f_k, trials, z=Z999)
        _, hi_k1 = wilson_interval(f_k1, trials, z=Z999)
        if 0.25 > f_k / trials > 0:
            assert hi_k1 >= (3.0 / 16.0) * lo_k * lo_k


# ---------------------------------------------------------------------------
# rate search and scaling sweep
# ---------------------------------------------------------------------------


def test_rate_search_trivial_target():
    assert rate_search_at_pe(4, 0.3, Decoder("sc", 0), 1.0, 500, 1) == 1.0


def test_rate_search_monotone_in_target():
    rates = [
        rate_search_at_pe(8, 0.5, Decoder("sc", 0), t, 20_000, 5)
        for t in (0.01, 0.05, 0.2, 0.9)
    ]
    assert rates == sorted(rates)
    assert all(0 < r <= 1 for r in rates)


def test_rate_search_genie_beats_plain_sc():
    args = (8, 0.5, 0.05, 20_000, 9)
    r_sc = rate_search_at_pe(args[0], args[1], Decoder("sc", 0), *args[2:])
    r_genie = rate_search_at_pe(args[0], args[1], Decoder("genie", 2), *args[2:])
    assert r_genie >= r_sc


def test_rate_search_matches_direct_counts():
    # the order-statistic shortcut must equal decoding each rate separately
    # on the same stream
    n, eps, trials, seed, k = 4, 0.4, 2_000, 6, 1
    profile = evolve_profile(eps, n)
    stat = harness._erased_rank_order_stat(
        n, eps, trials, seed, reliability_order(profile), k
    )
    for K in (3, 6, 10, 14):
        spec = select_frozen(profile, K)
        counts = trial_erased_info_counts(spec, eps, trials, seed)
        assert int(np.count_nonzero(stat < K)) == int(np.count_nonzero(counts > k))


def test_rate_search_errors():
    with pytest.raises(ValueError):
        rate_search_at_pe(4, 0.3, Decoder("map", 1), 0.05, 100, 1)
    with pytest.raises(ValueError):
        rate_search_at_pe(4, 0.3, Decoder("sc", 0), 0.0, 100, 1)
    with pytest.raises(RuntimeError):
        # even a single info channel fails too often at eps ~ 0.95
        rate_search_at_pe(2, 0.95, Decoder("sc", 0), 1e-6, 2_000, 1)


def test_scaling_sweep_smoke(tmp_path):
    out = tmp_path / "sweep.csv"
    fit = run_scaling_sweep([4, 5, 6, 7], 0.5, 0.1, 20_000, seed=11, out_csv=out)
    assert fit.mu > 0 and np.isfinite(fit.mu)
    assert fit.target_pe == 0.1
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["N", "rate", "gap", "z"]
    assert [int(r[0]) for r in rows[1:]] == [16, 32, 64, 128]
    for _, rate, gap, _z in rows[1:]:
        assert float(gap) == pytest.approx(0.5 - float(rate), abs=1e-15)


def test_scaling_sweep_validation():
    with pytest.raises(ValueError):
        run_scaling_sweep([4, 5], 0.5, 0.1, 100, 1)
    with pytest.raises(ValueError):
        run_scaling_sweep([5, 4, 6], 0.5, 0.1, 100, 1)


# ---------------------------------------------------------------------------
# random-ensemble rank experiment
# ---------------------------------------------------------------------------


def test_rank_experiment_trivial_cases():
    # rate 0: no rows, rank always 0 = NR - log2(1)
    est = random_rank_experiment(64, 0.0, 0.5, 1, 200, seed=1)
    assert est.failures == 0
    # huge list: the rank threshold drops to zero or below
    est = random_rank_experiment(64, 1 / 64, 0.5, 2, 200, seed=1)
    assert est.failures == 0


def test_rank_experiment_validation():
    with pytest.raises(ValueError):
        random_rank_experiment(64, 0.5, 0.5, 3, 100, 1)  # list not a power of 2
    with pytest.raises(ValueError):
        random_rank_experiment(100, 0.5, 0.5, 2, 100, 1)  # N not a power of 2
    with pytest.raises(ValueError):
        random_rank_joint(64, 0.5, 0.5, [2], 0, 1)


def test_rank_joint_shares_one_pass():
    res = random_rank_joint(128, 0.4, 0.5, [1, 2, 4, 8], 400, seed=5)
    fails = [res[L].failures for L in (1, 2, 4, 8)]
    assert fails == sorted(fails, reverse=True)
    # determinism across calls
    again = random_rank_experiment(128, 0.4, 0.5, 4, 400, seed=5)
    assert again == res[4]


@pytest.mark.parametrize("n_block,rate,eps", [(64, 0.3, 0.5), (128, 0.46, 0.35)])
def test_rank_kernel_against_pure_python(n_block, rate, eps):
    # replay the identical raw stream and rank each matrix with the packed
    # int eliminator; counts must agree trial by trial
    trials, seed = 150, 21
    ranks, NR = harness._trial_ranks(n_block, rate, eps, trials, seed)
    WR = (n_block + 63) // 64
    wpt = harness._words_per_trial(n_block + NR * WR)
    raw = harness._raw_words(seed, 0, trials, wpt)
    thr = int(harness._erasure_threshold(eps))
    for t in range(trials):
        E = int(np.count_nonzero(raw[t, :n_block] < thr))
        M = n_block - E
        mask = (1 << M) - 1
        rows = []
        for r in range(NR):
            v = 0
            for w in range(WR):
                v |= int(raw[t, n_block + r * WR + w]) << (64 * w)
            rows.append(v & mask)
        assert gf2.rank_of_rows(rows) == ranks[t]


# ---------------------------------------------------------------------------
# CSV output and CLI
# ---------------------------------------------------------------------------


def test_mc_writes_csv(tmp_path):
    out = tmp_path / "est.csv"
    cfg = RunConfig(n=3, epsilon=0.5, rate=0.5, trials=4_000, seed=2,
                    out=str(out))
    est = mc_estimate(cfg)
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    assert list(row) == harness.CSV_FIELDS
    assert int(row["failures"]) == est.failures
    assert float(row["pe"]) == pytest.approx(est.value, rel=1e-12)
    assert int(row["N"]) == 8


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "polarscale", *args],
        capture_output=True,
        text=True,
        timeout=120,
    )


def test_cli_construct_and_exact(tmp_path):
    frozen = tmp_path / "frozen.txt"
    profile = tmp_path / "profile.csv"
    res = run_cli(
        "construct", "--n", "3", "--eps", "0.5", "--rate", "0.5",
        "--out-frozen", str(frozen), "--out-profile", str(profile),
    )
    assert res.returncode == 0, res.stderr
    assert frozen.exists() and profile.exists()
    res = run_cli(
        "exact", "--n", "3", "--eps", "0.5", "--frozen-file", str(frozen),
        "--decoder", "map", "--param", "1",
    )
    assert res.returncode == 0, res.stderr
    record = json.loads(res.stdout)
    spec = select_frozen(evolve_profile(0.5, 3), 4)
    want = exact_error_probability(spec, 0.5, Decoder("map", 1)).value
    assert record["value"] == pytest.approx(want, rel=1e-12)


def test_cli_mc_config_roundtrip(tmp_path):
    out = tmp_path / "mc.csv"
    cfg = RunConfig(n=3, epsilon=0.5, rate=0.5, trials=3_000, seed=4,
                    out=str(out))
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(cfg.to_json())
    res = run_cli("mc", "--config", str(cfg_path))
    assert res.returncode == 0, res.stderr
    with open(out) as fh:
        row = next(csv.DictReader(fh))
    assert int(row["failures"]) == mc_estimate(cfg).failures


def test_cli_bounds_and_scaling(tmp_path):
    res = run_cli("bounds", "--eps", "0.5", "--pe", "0.1")
    assert res.returncode == 0, res.stderr
    assert "38.89" in res.stdout  # the blocklength exponent for this pair
    out = tmp_path / "sweep.csv"
    res = run_cli(
        "scaling", "--n-min", "4", "--n-max", "6", "--eps", "0.5",
        "--target-pe", "0.1", "--trials", "5000", "--seed", "3",
        "--out", str(out),
    )
    assert res.returncode == 0, res.stderr
    assert out.exists()
    assert "mu=" in res.stdout


def test_cli_error_exits():
    assert run_cli("mc", "--eps", "0.5").returncode == 1  # missing --n
    assert run_cli("construct", "--n", "3", "--eps", "1.5",
                   "--rate", "0.5").returncode == 1
    assert run_cli("exact", "--n", "9", "--eps", "0.5",
                   "--rate", "0.5").returncode == 1  # enumeration too large
