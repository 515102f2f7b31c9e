"""Command-line front end.

Subcommands:
  verify      statistical verification suites; exit 0 iff all pass
  bench       phase-separated microbenchmarks across an (L, B) grid
  curves      emit the aligned attention-weight curves as CSV
  encode      bucket-encode a behavior log into serialized tables
  serve-bse   run the sequence-encoder server
  serve-ctr   run the scorer server
  simulate    drive a synthetic request stream and report latencies

Global flags (``--seed``, ``--d``, ``--m``, ``--tau``) and per-command flags
may also come from a ``key = value`` config file via ``--config``; explicit
flags override the file.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import threading
import time

import numpy as np

from . import analysis, data, serving
from .attention import (
    BehaviorSequence,
    expected_attention,
    mean_pooling,
    sdim_attention,
    sim_hard,
    target_attention,
)
from .hashing import (
    hamming_distance,
    hash_code_matrix,
    hash_codes,
    record_projections,
    sample_hash_family,
    signature_matrix,
    signatures,
)
from .serving import wire

_MASK64 = (1 << 64) - 1


# --- configuration ----------------------------------------------------------


def _load_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values


class _Settings:
    """Flag > config-file > default resolution. Flags are parsed with a None
    sentinel so an explicit flag always wins."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default, cast=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            raw = self.config[name]
            return cast(raw) if cast else raw
        return default

    def ints(self, name: str, default: tuple[int, ...]) -> tuple[int, ...]:
        value = self.get(name, None, cast=str)
        if value is None:
            return default
        if isinstance(value, (tuple, list)):
            return tuple(int(v) for v in value)
        return tuple(int(part) for part in str(value).split(",") if part.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# --- shared helpers ---------------------------------------------------------


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def _convergence_case(seed: int, L: int, d: int) -> tuple[np.ndarray, BehaviorSequence]:
    """One interest-concentrated user plus an in-cluster query candidate."""
    config = data.InstanceConfig(
        n_users=1, L=L, B=8, d=d, cluster_count=8, intra_cluster_cos=0.7, seed=seed
    )
    instance = data.generate_instance(config)
    request = instance.requests[0]
    primary = 0
    matches = np.flatnonzero(request.categories == primary)
    pick = int(matches[0]) if matches.size else 0
    return request.candidates[pick], instance.users[request.user_id]


def _mean_alignment(
    seeds: range, rounds: int, tau: int, L: int, d: int, base_seed: int
) -> tuple[float, float]:
    """Mean cosine between sampled and closed-form interest, plus the mean
    fraction of empty hash rounds, over per-seed instances."""
    cosines = []
    empty_fractions = []
    for s in seeds:
        q, sequence = _convergence_case(base_seed + 17 * s, L, d)
        family = sample_hash_family(base_seed + 90_000 + s, rounds * tau, tau, d)
        estimate = sdim_attention(q, sequence, family)
        reference = expected_attention(q, sequence, tau)
        cosines.append(_cosine(estimate.interest, reference.interest))
        sig_q = signatures(hash_codes(q, family), family.tau)
        sig_s = signature_matrix(sequence.items, family)
        empty_fractions.append(float(((sig_s == sig_q).sum(axis=0) == 0).mean()))
    return float(np.mean(cosines)), float(np.mean(empty_fractions))


def _random_table(rng: np.random.Generator) -> serving.BucketTable:
    """A structurally valid bucket table with randomized contents."""
    tau = int(rng.integers(1, 9))
    rounds = int(rng.integers(1, 6))
    d = int(rng.integers(1, 24))
    buckets = []
    for _ in range(rounds):
        codes = rng.choice(1 << tau, size=rng.integers(0, min(6, 1 << tau) + 1), replace=False)
        round_buckets = {}
        for code in codes:
            vector = rng.standard_normal(d).astype(np.float32)
            norm = np.linalg.norm(vector)
            if norm > 0:
                vector /= norm
            round_buckets[int(code)] = serving.Bucket(vector, int(rng.integers(1, 1 << 20)))
        buckets.append(round_buckets)
    return serving.BucketTable(
        d=d,
        m=rounds * tau,
        tau=tau,
        user_id=int(rng.integers(0, 1 << 63)),
        family_seed=int(rng.integers(0, 1 << 63)),
        sequence_version=int(rng.integers(0, 1 << 31)),
        buckets=tuple(buckets),
    )


def _median_ns(func, *, warmup: int, iterations: int) -> float:
    for _ in range(warmup):
        func()
    samples = []
    for _ in range(iterations):
        started = time.perf_counter_ns()
        func()
        samples.append(time.perf_counter_ns() - started)
    return float(np.median(samples))


def _stats_ns(samples: list[int]) -> dict[str, float]:
    arr = np.asarray(samples, dtype=np.float64)
    return {
        "p50": float(np.percentile(arr, 50)),
        "p95": float(np.percentile(arr, 95)),
        "mean": float(arr.mean()),
    }


def _write_report(path: str | None, fmt: str, rows: list[dict]) -> None:
    if path is None:
        return
    if fmt == "csv":
        columns = ["suite", "name", "value", "threshold", "passed"]
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(",".join(columns) + "\n")
            for row in rows:
                handle.write(
                    ",".join(str(row.get(column, "")) for column in columns) + "\n"
                )
    else:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(rows, handle, indent=2)
            handle.write("\n")


# --- verify -----------------------------------------------------------------


def _suite_collision_law(seed: int, trials: int, rows: list[dict]) -> bool:
    grid = (-0.9, -0.5, 0.0, 0.5, 0.9, 1.0)
    passed = True
    for tau in (1, 2, 3):
        for cos, empirical, expected in analysis.empirical_collision_curve(
            grid, tau, trials, seed + 1000 * tau
        ):
            bound = 4.0 * math.sqrt(expected * (1.0 - expected) / trials)
            cell_ok = abs(empirical - expected) <= bound
            if cos == 0.0 and tau == 3:
                cell_ok = cell_ok and abs(empirical - 0.125) <= 0.01
            passed &= cell_ok
            rows.append(
                {
                    "suite": "collision-law",
                    "name": f"tau={tau},cos={cos}",
                    "value": empirical,
                    "threshold": f"{expected}+-{bound:.2g}",
                    "passed": cell_ok,
                }
            )
    return passed


def _suite_convergence(
    seed: int, seeds: int, rounds_sweep: tuple[int, ...], tau: int, d: int, rows: list[dict]
) -> bool:
    means = [
        _mean_alignment(range(seeds), rounds, tau, 256, d, seed)[0] for rounds in rounds_sweep
    ]
    non_decreasing = all(b >= a for a, b in zip(means, means[1:]))
    for rounds, mean in zip(rounds_sweep, means):
        ok = non_decreasing and (mean >= 0.95 or rounds < 16)
        rows.append(
            {
                "suite": "convergence",
                "name": f"rounds={rounds}",
                "value": mean,
                "threshold": "non-decreasing, >=0.95 at rounds>=16",
                "passed": ok,
            }
        )
    return non_decreasing and all(
        mean >= 0.95 for rounds, mean in zip(rounds_sweep, means) if rounds >= 16
    )


def _suite_m_sweep(seed: int, seeds: int, m_sweep: tuple[int, ...], tau: int, d: int, rows: list[dict]) -> bool:
    passed = True
    for m in m_sweep:
        if m % tau:
            raise ValueError(f"m={m} in sweep is not divisible by tau={tau}")
        mean, _ = _mean_alignment(range(seeds), m // tau, tau, 256, d, seed)
        ok = mean >= 0.95 if m >= 48 else True
        passed &= ok
        rows.append(
            {
                "suite": "m-sweep",
                "name": f"m={m}",
                "value": mean,
                "threshold": ">=0.95 for m>=48",
                "passed": ok,
            }
        )
    return passed


def _suite_tau_sweep(seed: int, seeds: int, tau_sweep: tuple[int, ...], d: int, rows: list[dict]) -> bool:
    # Rounds are pinned at 16 per width so the sweep isolates tau. Widths
    # above 3 are reported, not asserted: at desk scale (L=256) they leave
    # most buckets empty, which is exactly the sensitivity the empty-round
    # exclusion rule is flagged for.
    passed = True
    for tau in tau_sweep:
        mean, empty_fraction = _mean_alignment(range(seeds), 16, tau, 256, d, seed)
        ok = mean >= 0.95 if tau <= 3 else True
        passed &= ok
        rows.append(
            {
                "suite": "tau-sweep",
                "name": f"tau={tau}",
                "value": mean,
                "threshold": ">=0.95 for tau<=3" + f" (empty rounds: {empty_fraction:.3f})",
                "passed": ok,
            }
        )
    return passed


def _suite_entropy(seed: int, rows: list[dict]) -> bool:
    taus = (0.5, 1.0, 2.0, 3.0, 5.0, 10.0)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(100):
        items = rng.standard_normal((32, 16))
        items /= np.linalg.norm(items, axis=1, keepdims=True)
        q = rng.standard_normal(16)
        q /= np.linalg.norm(q)
        curve = analysis.entropy_vs_tau(q, BehaviorSequence(items), taus)
        entropies = [h for _, h in curve]
        diffs = np.diff(entropies) / np.diff(taus)
        worst = max(worst, float(diffs.max()))
    monotone_ok = worst <= 1e-9
    rows.append(
        {
            "suite": "entropy",
            "name": "finite-difference dH/dtau",
            "value": worst,
            "threshold": "<=1e-9",
            "passed": monotone_ok,
        }
    )
    q = np.zeros(16)
    q[0] = 1.0
    degenerate = BehaviorSequence(np.tile(q, (8, 1)))
    curve = analysis.entropy_vs_tau(q, degenerate, taus)
    constant_ok = all(abs(h - math.log(8)) < 1e-12 for _, h in curve)
    rows.append(
        {
            "suite": "entropy",
            "name": "degenerate all-equal instance",
            "value": curve[-1][1],
            "threshold": f"=={math.log(8):.6f}",
            "passed": constant_ok,
        }
    )
    return monotone_ok and constant_ok


def _suite_serving(seed: int, cases: int, fuzz: int, m: int, tau: int, d: int, rows: list[dict]) -> bool:
    rng = np.random.default_rng(seed)
    family = sample_hash_family(seed + 4, m, tau, d)
    worst = 0.0
    for case in range(cases):
        q, sequence = _convergence_case(seed + 31 * case, int(rng.integers(16, 128)), d)
        table_bytes = wire.serialize_bucket_table(
            serving.encode_sequence(sequence, family, user_id=case)
        )
        table = wire.deserialize_bucket_table(table_bytes)
        served, _ = serving.gather_interest(q, table, family)
        reference = sdim_attention(q, sequence, family).interest
        worst = max(worst, float(np.abs(served - reference).max()))
    equivalence_ok = worst <= 1e-6
    rows.append(
        {
            "suite": "serving",
            "name": "wire round-trip gather vs in-process",
            "value": worst,
            "threshold": "<=1e-6 linf",
            "passed": equivalence_ok,
        }
    )

    fuzz_rng = np.random.default_rng(seed + 5)
    fuzz_ok = True
    for _ in range(fuzz):
        table = _random_table(fuzz_rng)
        blob = wire.serialize_bucket_table(table)
        restored = wire.deserialize_bucket_table(blob)
        fuzz_ok &= restored == table and wire.serialize_bucket_table(restored) == blob
    rows.append(
        {
            "suite": "serving",
            "name": f"wire round-trip identity over {fuzz} fuzzed tables",
            "value": fuzz_ok,
            "threshold": "byte-identical",
            "passed": fuzz_ok,
        }
    )

    # Structural counter: one request, one sequence-hash pass, whatever B is.
    store = serving.SequenceStore()
    _, sequence = _convergence_case(seed + 99, 256, d)
    store.replace(7, sequence)
    candidates = np.stack([_convergence_case(seed + 100 + i, 4, d)[0] for i in range(8)])
    with record_projections() as log:
        with serving.bse_serve(store, family) as bse, serving.ctr_serve(bse.address) as ctr:
            serving.score_candidates(ctr.address, 7, candidates)
    sequence_passes = sum(1 for label, n in log if label == "sequence")
    counter_ok = sequence_passes == 1
    rows.append(
        {
            "suite": "serving",
            "name": "sequence-hash passes per request",
            "value": sequence_passes,
            "threshold": "==1",
            "passed": counter_ok,
        }
    )
    return equivalence_ok and fuzz_ok and counter_ok


def _suite_curve_alignment(rows: list[dict]) -> bool:
    table = analysis.emit_attention_curves(tau=3, scale=0.5, n_points=201)
    pearson = float(np.corrcoef(table.sdim_weight, table.ta_weight)[0, 1])
    ok = pearson >= 0.99
    rows.append(
        {
            "suite": "curve-alignment",
            "name": "pearson(sdim, shifted-exp)",
            "value": pearson,
            "threshold": ">=0.99",
            "passed": ok,
        }
    )
    return ok


def _measure_performance(seed: int, iterations: int = 5, warmup: int = 2) -> dict:
    """The desk-scale performance separation measurement.

    The exact-attention baseline applies the per-candidate attention
    operator to all B candidates, which is what scoring a request without
    hashing costs; a batched matrix formulation is reported alongside for
    reference. The hash-sampling request hashes the sequence once and then
    hashes + gathers all candidates.
    """
    L, B, d, m, tau = 1024, 1024, 128, 48, 3
    config = data.InstanceConfig(n_users=1, L=L, B=B, d=d, cluster_count=8, seed=seed)
    instance = data.generate_instance(config)
    sequence = instance.users[1]
    candidates = instance.requests[0].candidates
    family = sample_hash_family(seed, m, tau, d)

    def naive_request():
        for row in range(B):
            target_attention(candidates[row], sequence)

    scale = math.sqrt(d)

    def batched_request():
        logits = candidates @ sequence.items.T / scale
        logits -= logits.max(axis=1, keepdims=True)
        unnorm = np.exp(logits)
        (unnorm / unnorm.sum(axis=1, keepdims=True)) @ sequence.items

    def sdim_request():
        table = serving.encode_sequence(sequence, family)
        serving.gather_interest_batch(candidates, table, family)

    naive_ns = _median_ns(naive_request, warmup=warmup, iterations=iterations)
    batched_ns = _median_ns(batched_request, warmup=warmup, iterations=iterations)
    sdim_ns = _median_ns(sdim_request, warmup=warmup, iterations=iterations)

    # Sequence-phase flatness in B: within each full request at batch size b,
    # time the encode step alone. It takes no B-dependent input, so its true
    # cost per B is identical; batch sizes are interleaved so load drift
    # hits them evenly, and min-of-N is the stable estimator under additive
    # timing noise.
    batch_sizes = (64, 256, 1024)
    encode_samples = {b: [] for b in batch_sizes}
    for _ in range(warmup + 3 * iterations):
        for b in batch_sizes:
            started = time.perf_counter_ns()
            inner = serving.encode_sequence(sequence, family)
            encode_samples[b].append(time.perf_counter_ns() - started)
            serving.gather_interest_batch(candidates[:b], inner, family)
    sequence_phase = {
        b: float(np.min(samples[warmup:])) for b, samples in encode_samples.items()
    }
    flatness = max(sequence_phase.values()) / min(sequence_phase.values())
    return {
        "config": {"L": L, "B": B, "d": d, "m": m, "tau": tau},
        "naive_request_ns": naive_ns,
        "batched_request_ns": batched_ns,
        "sdim_request_ns": sdim_ns,
        "speedup_vs_naive": naive_ns / sdim_ns,
        "speedup_vs_batched": batched_ns / sdim_ns,
        "sequence_phase_ns_by_B": sequence_phase,
        "sequence_phase_flatness": flatness,
    }


def cmd_verify(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    seed = settings.get("seed", 7, int)
    d = settings.get("d", 64, int)
    tau = settings.get("tau", 3, int)
    seeds = settings.get("seeds", 20, int)
    trials = settings.get("trials", 100_000, int)
    cases = settings.get("cases", 100, int)
    fuzz = settings.get("fuzz", 200, int)
    rounds_sweep = settings.ints("rounds_sweep", (4, 8, 16, 32, 64))
    m_sweep = settings.ints("m_sweep", (24, 36, 48, 60, 72, 90, 120))
    tau_sweep = settings.ints("tau_sweep", (1, 2, 3, 5, 10))

    rows: list[dict] = []
    suites = [
        ("collision-law", lambda: _suite_collision_law(seed, trials, rows)),
        ("convergence", lambda: _suite_convergence(seed, seeds, rounds_sweep, tau, d, rows)),
        ("m-sweep", lambda: _suite_m_sweep(seed, seeds, m_sweep, tau, d, rows)),
        ("tau-sweep", lambda: _suite_tau_sweep(seed, seeds, tau_sweep, d, rows)),
        ("entropy", lambda: _suite_entropy(seed, rows)),
        ("serving", lambda: _suite_serving(seed, cases, fuzz, settings.get("m", 48, int), tau, d, rows)),
        ("curve-alignment", lambda: _suite_curve_alignment(rows)),
    ]
    failures = []
    for name, runner in suites:
        passed = runner()
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        if not passed:
            failures.append(name)

    if _parse_bool(settings.get("perf", False)):
        perf = _measure_performance(seed)
        perf_ok = perf["speedup_vs_naive"] >= 5.0 and perf["sequence_phase_flatness"] <= 1.2
        rows.append(
            {
                "suite": "performance",
                "name": "speedup vs naive / sequence-phase flatness",
                "value": f"{perf['speedup_vs_naive']:.1f}x / {perf['sequence_phase_flatness']:.3f}",
                "threshold": ">=5x and <=1.2",
                "passed": perf_ok,
            }
        )
        print(
            f"{'PASS' if perf_ok else 'FAIL'} performance "
            f"(speedup {perf['speedup_vs_naive']:.1f}x vs naive, "
            f"{perf['speedup_vs_batched']:.1f}x vs batched; "
            f"sequence phase flatness {perf['sequence_phase_flatness']:.3f})"
        )
        if not perf_ok:
            failures.append("performance")

    _write_report(settings.get("out", None, str), settings.get("format", "json", str), rows)
    if failures:
        print(f"failing properties: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


# --- bench -------------------------------------------------------------------


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    seed = settings.get("seed", 7, int)
    d = settings.get("d", 128, int)
    m = settings.get("m", 48, int)
    tau = settings.get("tau", 3, int)
    k = settings.get("k", 64, int)
    grid_l = settings.ints("grid_l", (256, 1024))
    grid_b = settings.ints("grid_b", (64, 1024))
    iterations = settings.get("iterations", 5, int)
    warmup = settings.get("warmup", 2, int)
    family = sample_hash_family(seed, m, tau, d)
    scale = math.sqrt(d)

    def timed(func) -> dict[str, float]:
        for _ in range(warmup):
            func()
        samples = []
        for _ in range(iterations):
            started = time.perf_counter_ns()
            func()
            samples.append(time.perf_counter_ns() - started)
        return _stats_ns(samples)

    cells = []
    for L in grid_l:
        for B in grid_b:
            config = data.InstanceConfig(n_users=1, L=L, B=B, d=d, cluster_count=8, seed=seed)
            instance = data.generate_instance(config)
            sequence = instance.users[1]
            request = instance.requests[0]
            candidates = request.candidates
            categories = request.categories
            table = serving.encode_sequence(sequence, family)
            seq_codes = hash_code_matrix(sequence.items, family)
            methods = {
                "target-attention": {
                    "sequence": timed(lambda: None),
                    "per-candidate": timed(
                        lambda: [target_attention(candidates[i], sequence) for i in range(B)]
                    ),
                },
                "target-attention-batched": {
                    "sequence": timed(lambda: None),
                    "per-candidate": timed(
                        lambda: _batched_target(candidates, sequence.items, scale)
                    ),
                },
                "sdim": {
                    "sequence": timed(lambda: serving.encode_sequence(sequence, family)),
                    "per-candidate": timed(
                        lambda: serving.gather_interest_batch(candidates, table, family)
                    ),
                },
                "eta": {
                    "sequence": timed(lambda: hash_code_matrix(sequence.items, family)),
                    "per-candidate": timed(
                        lambda: [
                            _eta_candidate(candidates[i], sequence.items, seq_codes, family, k, scale)
                            for i in range(B)
                        ]
                    ),
                },
                "sim-hard": {
                    "sequence": timed(lambda: None),
                    "per-candidate": timed(
                        lambda: [
                            sim_hard(candidates[i], int(categories[i]), sequence)
                            for i in range(B)
                        ]
                    ),
                },
                "mean-pooling": {
                    "sequence": timed(lambda: mean_pooling(sequence)),
                    "per-candidate": timed(lambda: None),
                },
            }
            target_request = (
                methods["target-attention"]["sequence"]["mean"]
                + methods["target-attention"]["per-candidate"]["mean"]
            )
            speedups = {}
            for name, phases in methods.items():
                request_ns = phases["sequence"]["mean"] + phases["per-candidate"]["mean"]
                speedups[name] = target_request / request_ns if request_ns else float("inf")
            cells.append({"L": L, "B": B, "methods": methods, "speedup_vs_target": speedups})

    report = {
        "environment": {
            "platform": platform.platform(),
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "params": {"d": d, "m": m, "tau": tau, "k": k, "seed": seed,
                   "iterations": iterations, "warmup": warmup},
        "grid": cells,
    }
    out = settings.get("out", None, str)
    text = json.dumps(report, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    else:
        print(text)
    return 0


def _batched_target(candidates: np.ndarray, items: np.ndarray, scale: float) -> np.ndarray:
    logits = candidates @ items.T / scale
    logits -= logits.max(axis=1, keepdims=True)
    unnorm = np.exp(logits)
    return (unnorm / unnorm.sum(axis=1, keepdims=True)) @ items


def _eta_candidate(q, items, seq_codes, family, k, scale):
    """Hamming top-k scoring against precomputed sequence codes, so the
    per-candidate phase excludes the once-per-request sequence hashing."""
    distances = hamming_distance(seq_codes, hash_codes(q, family, label="query"))
    selected = np.sort(np.argsort(distances, kind="stable")[: min(k, items.shape[0])])
    subset = items[selected]
    logits = subset @ q / scale
    logits -= logits.max()
    unnorm = np.exp(logits)
    return (unnorm / unnorm.sum()) @ subset


# --- curves / encode ----------------------------------------------------------


def cmd_curves(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    table = analysis.emit_attention_curves(
        tau=settings.get("tau", 3, int),
        scale=settings.get("scale", 0.5, float),
        n_points=settings.get("points", 201, int),
    )
    out = settings.get("out", None, str)
    if out:
        table.write_csv(out)
    else:
        table.write_csv(sys.stdout)
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    seed = settings.get("seed", 7, int)
    d = settings.get("d", 64, int)
    m = settings.get("m", 48, int)
    tau = settings.get("tau", 3, int)
    blend = settings.get("blend", 0.7, float)
    max_len = settings.get("max_len", 256, int)
    log = data.load_behavior_log(args.input, max_len)
    family = sample_hash_family(seed, m, tau, d)
    total_bytes = 0
    with open(args.out, "wb") as handle:
        for user_id in sorted(log.users):
            sequence = data.sequence_from_events(log.users[user_id], d, seed, blend)
            table = serving.encode_sequence(sequence, family, user_id, sequence_version=1)
            payload = wire.serialize_bucket_table(table)
            handle.write(wire.pack_frame(wire.MSG_BUCKET_TABLE, payload))
            total_bytes += len(payload)
    skipped = f" ({log.malformed_rows} malformed rows skipped)" if log.malformed_rows else ""
    print(f"encoded {len(log.users)} users to {args.out}, {total_bytes} table bytes{skipped}")
    return 0


# --- servers / simulate --------------------------------------------------------


def _build_store(settings: _Settings, input_path: str | None) -> serving.SequenceStore:
    seed = settings.get("seed", 7, int)
    d = settings.get("d", 64, int)
    store = serving.SequenceStore()
    if input_path:
        log = data.load_behavior_log(input_path, settings.get("max_len", 256, int))
        blend = settings.get("blend", 0.7, float)
        for user_id, events in log.users.items():
            store.replace(user_id, data.sequence_from_events(events, d, seed, blend))
    else:
        config = data.InstanceConfig(
            n_users=settings.get("users", 100, int),
            L=settings.get("l", 256, int),
            B=1,
            d=d,
            cluster_count=8,
            seed=seed,
        )
        for user_id, sequence in data.generate_instance(config).users.items():
            store.replace(user_id, sequence)
    return store


def _serve_until_interrupt(server, label: str) -> int:
    host, port = server.address
    print(f"{label} listening on {host}:{port}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def cmd_serve_bse(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    family = sample_hash_family(
        settings.get("seed", 7, int),
        settings.get("m", 48, int),
        settings.get("tau", 3, int),
        settings.get("d", 64, int),
    )
    store = _build_store(settings, settings.get("input", None, str))
    server = serving.bse_serve(
        store, family, (settings.get("host", "127.0.0.1", str), settings.get("port", 0, int))
    )
    return _serve_until_interrupt(server, "sequence encoder")


def cmd_serve_ctr(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    bse = settings.get("bse", None, str)
    if bse is None:
        print("--bse HOST:PORT is required", file=sys.stderr)
        return 2
    host, _, port = bse.rpartition(":")
    if not host or not port.isdigit():
        print(f"--bse expects HOST:PORT, got {bse!r}", file=sys.stderr)
        return 2
    server = serving.ctr_serve(
        (host, int(port)),
        (settings.get("host", "127.0.0.1", str), settings.get("port", 0, int)),
    )
    return _serve_until_interrupt(server, "scorer")


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = _Settings(args)
    seed = settings.get("seed", 7, int)
    n_users = settings.get("users", 100, int)
    n_requests = settings.get("requests", 1000, int)
    config = data.InstanceConfig(
        n_users=n_users,
        L=settings.get("l", 256, int),
        B=settings.get("b", 64, int),
        d=settings.get("d", 64, int),
        cluster_count=8,
        seed=seed,
    )
    instance = data.generate_instance(config)
    store = serving.SequenceStore()
    for user_id, sequence in instance.users.items():
        store.replace(user_id, sequence)
    family = sample_hash_family(
        seed, settings.get("m", 48, int), settings.get("tau", 3, int), config.d
    )

    def stream():
        for i in range(n_requests):
            request = instance.requests[i % len(instance.requests)]
            yield request.user_id, request.candidates

    report = serving.simulate(store, stream(), family)
    text = json.dumps(report, indent=2)
    out = settings.get("out", None, str)
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    print(text)
    return 0


# --- parser --------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="base RNG seed (default 7)")
    parser.add_argument("--d", type=int, help="embedding dimension")
    parser.add_argument("--m", type=int, help="number of hash functions")
    parser.add_argument("--tau", type=int, help="signature width in bits")
    parser.add_argument("--config", help="key = value settings file; flags override")
    parser.add_argument("--out", help="write the command's report/output to this path")
    parser.add_argument("--format", choices=("csv", "json"), help="report format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdim",
        description="Hash-sampling attention library testbed: verification, benchmarks, and the two-server simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the statistical verification suites")
    _add_common(p)
    p.add_argument("--seeds", type=int, help="instances per sweep cell (default 20)")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials per collision cell (default 100000)")
    p.add_argument("--cases", type=int, help="serving-equivalence cases (default 100)")
    p.add_argument("--fuzz", type=int, help="wire round-trip fuzz tables (default 200)")
    p.add_argument("--rounds-sweep", dest="rounds_sweep", type=_int_list, help="comma list (default 4,8,16,32,64)")
    p.add_argument("--m-sweep", dest="m_sweep", type=_int_list, help="comma list (default 24,36,48,60,72,90,120)")
    p.add_argument("--tau-sweep", dest="tau_sweep", type=_int_list, help="comma list (default 1,2,3,5,10)")
    p.add_argument("--perf", action="store_const", const=True, help="also assert the performance separation (machine-dependent)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="phase-separated microbenchmarks")
    _add_common(p)
    p.add_argument("--grid-l", dest="grid_l", type=_int_list, help="sequence lengths (default 256,1024)")
    p.add_argument("--grid-b", dest="grid_b", type=_int_list, help="candidate counts (default 64,1024)")
    p.add_argument("--k", type=int, help="top-k for the Hamming retrieval baseline (default 64)")
    p.add_argument("--iterations", type=int, help="measured iterations per cell (default 5)")
    p.add_argument("--warmup", type=int, help="warm-up iterations per cell (default 2)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("curves", help="emit aligned attention-weight curves as CSV")
    _add_common(p)
    p.add_argument("--scale", type=float, help="softmax temperature (default 0.5)")
    p.add_argument("--points", type=int, help="grid points on [-1,1] (default 201)")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("encode", help="bucket-encode a behavior log into serialized tables")
    _add_common(p)
    p.add_argument("--input", required=True, help="CSV behavior log")
    p.add_argument("--max-len", dest="max_len", type=int, help="keep most recent N behaviors (default 256)")
    p.add_argument("--blend", type=float, help="category-anchor share of embeddings (default 0.7)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("serve-bse", help="run the sequence-encoder server")
    _add_common(p)
    p.add_argument("--host", help="bind host (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="bind port (default ephemeral)")
    p.add_argument("--input", help="CSV behavior log to load (default synthetic users)")
    p.add_argument("--users", type=int, help="synthetic user count (default 100)")
    p.add_argument("--l", type=int, help="synthetic sequence length (default 256)")
    p.add_argument("--max-len", dest="max_len", type=int, help="truncation for --input (default 256)")
    p.add_argument("--blend", type=float, help="embedding blend for --input (default 0.7)")
    p.set_defaults(func=cmd_serve_bse)

    p = sub.add_parser("serve-ctr", help="run the scorer server")
    _add_common(p)
    p.add_argument("--host", help="bind host (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="bind port (default ephemeral)")
    p.add_argument("--bse", help="sequence-encoder address HOST:PORT")
    p.set_defaults(func=cmd_serve_ctr)

    p = sub.add_parser("simulate", help="drive a synthetic request stream; report latency percentiles")
    _add_common(p)
    p.add_argument("--users", type=int, help="synthetic user count (default 100)")
    p.add_argument("--requests", type=int, help="request count (default 1000)")
    p.add_argument("--b", type=int, help="candidates per request (default 64)")
    p.add_argument("--l", type=int, help="sequence length (default 256)")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
