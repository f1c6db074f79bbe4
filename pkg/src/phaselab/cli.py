"""Command-line entry point.

Every command writes a JSON manifest (config, code version, seeds) before
its outputs.  Exit codes: 0 success, 1 runtime failure, 2 invalid input.
PHASELAB_THREADS caps the worker pool used for per-instance fan-out.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import (
    __version__,
    analytics,
    circuits,
    entropy,
    extractor,
    popdyn,
    rng,
    samples as samples_mod,
    schmidt,
    spoofing,
    stabilizer,
    statevec,
    xeb,
)
from .circuits import CircuitSpec, NoiseModel, SpecError

RECIPES = (
    "weaklink-transition",
    "dynamical-crossing",
    "clifford-lambda",
    "spoof-budget",
    "randomness-pipeline",
)


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------- plumbing

def threads() -> int:
    raw = os.environ.get("PHASELAB_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ValidationError(f"PHASELAB_THREADS={raw!r} is not an integer") from None
    if k < 1:
        raise ValidationError("PHASELAB_THREADS must be >= 1")
    return k


def fan_out(fn, items):
    """Order-preserving map over a process pool of PHASELAB_THREADS workers."""
    items = list(items)
    k = min(threads(), len(items))
    if k <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


def code_hash() -> str:
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        return dataclasses.asdict(v)
    raise TypeError(f"not serializable: {type(v).__name__}")


def dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable, allow_nan=True)
        fh.write("\n")


def write_manifest(path, command: str, config: dict, seeds: dict, outputs) -> None:
    dump_json(path, {
        "command": command,
        "config": config,
        "seeds": seeds,
        "outputs": [str(o) for o in outputs],
        "version": __version__,
        "code": code_hash(),
        "threads": threads(),
    })


def manifest_path(out) -> Path:
    p = Path(out)
    return p.with_name(p.name + ".manifest.json")


def write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def parse_range(text: str, name: str) -> np.ndarray:
    """'a:b:step' (inclusive of b within rounding) or a comma list."""
    if "=" in text:
        key, text = text.split("=", 1)
        if key != name:
            raise ValidationError(f"--scan expects {name}=..., got {key}=")
    try:
        if ":" in text:
            a, b, s = (float(x) for x in text.split(":"))
            if s <= 0 or b < a:
                raise ValueError
            k = int(math.floor((b - a) / s + 1e-9))
            return np.round(a + s * np.arange(k + 1), 12)
        return np.array([float(x) for x in text.split(",") if x])
    except ValueError:
        raise ValidationError(f"bad range {text!r} (use a:b:step or a comma list)") from None


def parse_ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise ValidationError(f"bad integer list {text!r}") from None


def load_spec(path) -> CircuitSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: spec must be a JSON object")
    try:
        return CircuitSpec.from_dict(doc)
    except SpecError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def chain_or_grid_spec(a, depth: int) -> CircuitSpec:
    if a.topology == "chain":
        return CircuitSpec(
            n=a.n, depth_cycles=depth, gate_ensemble=a.ensemble, seed=a.seed,
            weak_link=circuits.WeakLink(a.n // 2, a.T) if a.T else None,
        )
    n = a.rows * a.cols
    if a.n not in (None, n):
        raise ValidationError(f"--n {a.n} differs from rows*cols = {n}")
    return CircuitSpec(
        n=n, depth_cycles=depth, topology="grid2d", rows=a.rows, cols=a.cols,
        pattern=tuple(a.pattern), gate_ensemble=a.ensemble, seed=a.seed,
    )


# ---------------------------------------------------------------- commands

def cmd_gen(a) -> int:
    spec = load_spec(a.spec)
    if a.seed is not None:
        spec = dataclasses.replace(spec, seed=a.seed)
    write_manifest(manifest_path(a.out), "gen", {"spec": spec.to_dict()}, {"root": spec.seed}, [a.out])
    circ = circuits.build_circuit(spec)
    Path(a.out).write_text(circ.to_json() + "\n")
    return 0


def _sim_instance(job):
    spec, noise_d, d_max = job
    return statevec.xeb_depth_trace(spec, NoiseModel(**noise_d), d_max)


def cmd_sim(a) -> int:
    if (a.spec is None) == (a.circuit is None):
        raise ValidationError("give exactly one of --spec or --circuit")
    noise = NoiseModel(p2=a.p2, p1=a.p1)
    if a.trace is not None:
        spec = load_spec(a.spec) if a.spec else None
        if spec is None:
            raise ValidationError("--trace needs --spec (instances are regenerated per seed)")
        seeds = [rng.subseed(spec.seed, "instance", i) for i in range(a.instances)]
        cfg = {"spec": spec.to_dict(), "noise": dataclasses.asdict(noise), "trace": a.trace,
               "instances": a.instances}
        write_manifest(manifest_path(a.out), "sim", cfg, {"root": spec.seed, "instances": seeds}, [a.out])
        jobs = [(dataclasses.replace(spec, seed=s), dataclasses.asdict(noise), a.trace) for s in seeds]
        traces = np.array(fan_out(_sim_instance, jobs))
        mean = traces.mean(axis=0)
        se = traces.std(axis=0, ddof=1) / math.sqrt(len(seeds)) if len(seeds) > 1 else np.full_like(mean, np.nan)
        write_csv(a.out, ["d", "xeb", "stderr"], [(d, mean[d], se[d]) for d in range(a.trace + 1)])
        return 0
    circ = (circuits.Circuit.from_json(Path(a.circuit).read_text()) if a.circuit
            else circuits.build_circuit(load_spec(a.spec)))
    cfg = {"source": str(a.circuit or a.spec), "noise": dataclasses.asdict(noise), "samples": a.samples,
           "mode": a.mode}
    outs = [a.out] + ([a.probs_out] if a.probs_out else []) + ([a.summary] if a.summary else [])
    write_manifest(manifest_path(a.out), "sim", cfg, {"sample": a.seed}, outs)
    ideal = statevec.run_ideal(circ)
    if a.mode == "ideal":
        dev = ideal
    elif a.mode == "depolarizing":
        dev = statevec.run_depolarizing(circ, noise)
    else:
        dev = statevec.run_trajectory(circ, noise, a.seed)
    ss = statevec.sample_bitstrings(dev, a.samples, a.seed).with_probs(ideal.probabilities())
    samples_mod.write_hex(a.out, ss)
    if a.probs_out:
        samples_mod.write_probs_csv(a.probs_out, ss.probs)
    if a.summary:
        summ = {"xeb_exact": statevec.xeb(ideal.probabilities(), dev.probabilities()),
                "xeb_samples": xeb.linear_xeb(ss).value}
        if a.mode == "depolarizing":
            summ["fidelity"] = statevec.fidelity(ideal, dev)
        dump_json(a.summary, summ)
    return 0


def cmd_popdyn(a) -> int:
    depths = parse_ints(a.depths) if a.depths else None
    d_max = max(depths) if depths else a.d_max
    if d_max is None:
        raise ValidationError("give --depths or --d-max")
    spec = chain_or_grid_spec(a, d_max)
    cfg = {"spec": spec.to_dict(), "scan": a.scan, "depths": depths, "d_max": d_max, "mode": a.mode,
           "decay": a.decay, "p2": a.p2, "epsilon": a.epsilon}
    outs = [a.out] + ([a.summary] if a.summary else [])
    if a.scan:
        eps_n = parse_range(a.scan, "eps")
        if not depths or len(depths) < 2:
            raise ValidationError("--scan needs at least two --depths")
        write_manifest(manifest_path(a.out), "popdyn", cfg, {"root": spec.seed}, outs)
        res = popdyn.order_parameter_scan(spec, eps_n, depths, a.decay)
        write_csv(a.out, ["epsilon_n", "d", "xeb", "theta"], res.rows())
        if a.summary:
            dump_json(a.summary, {"crossings": res.crossings, "crossing": res.crossing, "spread": res.spread,
                                  "eps_c_n_T_over_ln16": (res.crossing * spec.weak_link.period_T / math.log(16)
                                                          if spec.weak_link else None)})
        return 0
    write_manifest(manifest_path(a.out), "popdyn", cfg, {"root": spec.seed}, outs)
    trace = popdyn.evolve(spec, NoiseModel(p2=a.p2, epsilon=a.epsilon), d_max, mode=a.mode, decay=a.decay)
    write_csv(a.out, ["d", "xeb"], [(d, trace[d]) for d in range(d_max + 1)])
    return 0


def cmd_phase(a) -> int:
    fs = parse_range(a.scan, "f")
    alphas = parse_range(a.alphas, "alpha")
    if np.any(alphas <= 0):
        raise ValidationError("alpha values must be positive")
    cfg = {"dim": a.dim, "n": a.n, "scan": a.scan, "alphas": a.alphas, "boundary": a.boundary,
           "popdyn": a.popdyn}
    outs = [a.out] + ([a.fc_out] if a.fc_out else [])
    write_manifest(manifest_path(a.out), "phase", cfg, {"root": a.seed}, outs)
    rows = []
    for al in alphas:
        d = max(1.0, analytics.depth_from_alpha(a.n, float(al), a.dim))
        for f in fs:
            pt = analytics.PhasePoint(n=a.n, d=d, epsilon=float(f) / a.n, dimension=a.dim, boundary=a.boundary)
            region, _ = analytics.phase_classify(pt)
            rows.append((float(f), float(al), analytics.model_xeb(pt), region))
    write_csv(a.out, ["f", "alpha", "xeb", "region"], rows)
    if a.fc_out:
        crit = alphas[alphas > 1]
        fc = analytics.critical_line(crit, a.dim, a.boundary) if crit.size else np.array([])
        header, table = ["alpha", "f_c"], [(float(x), float(y)) for x, y in zip(crit, np.atleast_1d(fc))]
        if a.popdyn:
            if a.dim != 1:
                raise ValidationError("--popdyn crossing table is available for --dim 1 only")
            spec = CircuitSpec(n=a.n, depth_cycles=1, seed=a.seed)
            cl = popdyn.critical_line_scan(spec, crit, np.arange(0.0, 1.5001, 0.005))
            header = ["alpha", "f_c", "d", "f_c_popdyn"]
            table = [(t[0], t[1], int(r[1]), r[2]) for t, r in zip(table, cl)]
        write_csv(a.fc_out, header, table)
    return 0


def cmd_xeb(a) -> int:
    ss = samples_mod.read_hex(a.samples, a.n)
    probs = samples_mod.read_probs_csv(a.probs)
    if probs.size != len(ss):
        raise ValidationError(f"{a.probs}: {probs.size} probabilities for {len(ss)} samples")
    ss = samples_mod.SampleSet(ss.n, ss.bitstrings, probs)
    cfg = {"samples": a.samples, "probs": a.probs, "estimator": a.estimator, "t": a.t, "dedupe": a.dedupe}
    write_manifest(manifest_path(a.out), "xeb", cfg, {}, [a.out])
    if a.dedupe:
        ss = xeb.dedupe(ss)
    out = {"n": ss.n, "count": len(ss), "estimator": a.estimator}
    if a.estimator == "linear":
        out["value"], out["stderr"] = xeb.linear_xeb(ss)
    elif a.estimator == "log":
        out["value"], out["stderr"] = xeb.log_xeb(ss)
    else:
        F, var1, var = xeb.truncated_xeb(ss, xeb.TxebParams(a.t))
        out.update(value=F, variance_per_sample=var1, stderr=math.sqrt(var), t=a.t)
    if a.porter_thomas:
        out["porter_thomas"] = xeb.porter_thomas_checks(ss)
    out["multiplicities"] = xeb.multiplicity_counts(ss.bitstrings)
    dump_json(a.out, out)
    return 0


def cmd_spoof(a) -> int:
    sc = spoofing.SpoofScenario.from_qubits(
        a.dl, a.dr, k_L=a.kl, k_R=a.kr, nu=a.nu, lambda_decay=math.exp(a.ln_lambda), d=a.d,
        N_superposition=a.N,
    )
    cfg = {"dl": a.dl, "dr": a.dr, "k": a.k, "kl": a.kl, "kr": a.kr, "ln_lambda": a.ln_lambda, "d": a.d,
           "nu": a.nu, "N": a.N}
    write_manifest(manifest_path(a.out), "spoof", cfg, {}, [a.out])
    if a.k is not None:
        kl, kr = spoofing.optimal_split(sc.D_L, sc.D_R, a.k)
        sc = dataclasses.replace(sc, k_L=max(1.0, kl), k_R=max(1.0, a.k / max(1.0, kl)))
    lb = spoofing.spoof_linear_bound(sc)
    out = {
        "linear_bound": lb.value, "prefactor": lb.prefactor, "k_L": sc.k_L, "k_R": sc.k_R,
        "log_bound": spoofing.spoof_log_bound(sc),
        "cut_contribution": spoofing.cut_contribution(a.nu, a.d),
        "order_statistic_left": spoofing.order_statistic_mean(sc.D_L, sc.k_L),
        "order_statistic_right": spoofing.order_statistic_mean(sc.D_R, sc.k_R),
    }
    dump_json(a.out, out)
    return 0


def cmd_entropy(a) -> int:
    D = 2.0**a.n if a.D is None else a.D
    p = entropy.EntropyParams(F=a.F, k=a.k, D=D, c1=a.c1, c2=a.c2, s=a.s, unit="bits")
    write_manifest(manifest_path(a.out), "entropy", dataclasses.asdict(p), {}, [a.out])
    dump_json(a.out, entropy.report(p))
    return 0


def _read_seed(a, nbits: int) -> tuple[np.ndarray, dict]:
    if a.seed == "os":
        data = os.urandom(-(-nbits // 8))
        info = {"source": "os", "sha256": hashlib.sha256(data).hexdigest()}
        if a.seed_out:
            Path(a.seed_out).write_bytes(data)
            info["saved"] = str(a.seed_out)
    else:
        data = Path(a.seed).read_bytes()
        info = {"source": str(a.seed), "sha256": hashlib.sha256(data).hexdigest()}
    return extractor.seed_bits_from_bytes(data, nbits), info


def cmd_extract(a) -> int:
    raw = Path(a.inp).read_bytes()
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if a.input_bits is not None:
        if a.input_bits > bits.size:
            raise ValidationError(f"{a.inp} holds {bits.size} bits, fewer than --input-bits {a.input_bits}")
        bits = bits[: a.input_bits]
    if a.k_bits > bits.size:
        raise ValidationError(f"claimed min-entropy {a.k_bits} exceeds the input length {bits.size}")
    cfg = {"in": a.inp, "k_bits": a.k_bits, "m": a.m, "eps": a.eps, "extractor": a.extractor,
           "margin": a.margin, "input_bits": int(bits.size)}
    audit_path = a.audit or str(a.out) + ".audit.json"
    write_manifest(manifest_path(a.out), "extract", cfg, {"seed": a.seed}, [a.out, audit_path])
    if a.extractor == "hmac":
        m = a.m
        if m is None:
            raise ValidationError("--m is required for the hmac extractor")
        nbytes = -(-m // extractor.HMAC_OUT_BITS) * extractor.HMAC_KEY_BYTES
        seed_bits, seed_info = _read_seed(a, nbytes * 8)
        out = extractor.hmac_extract(np.packbits(bits).tobytes(), np.packbits(seed_bits).tobytes(), m)
        audit = {"extractor": "hmac-sha512", "heuristic": True, "m": m, "seed": seed_info}
    else:
        m_max = extractor.max_output_bits(bits.size, a.k_bits, a.eps, a.margin)
        if m_max < 1:
            raise ValidationError(f"min-entropy {a.k_bits} leaves no extractable output at eps={a.eps}")
        m = m_max if a.m is None else a.m
        if m > m_max:
            raise ValidationError(f"--m {m} exceeds the entropy budget: at most {m_max} bits")
        tp = extractor.trevisan_params(bits.size, m, a.eps)
        seed_bits, seed_info = _read_seed(a, tp.d)
        out = extractor.trevisan_extract(bits, tp, seed_bits)
        audit = {"extractor": "trevisan-rs-hadamard", "params": tp.to_dict(), "m_max": m_max,
                 "k_bits": a.k_bits, "margin": a.margin, "seed": seed_info}
    Path(a.out).write_bytes(np.packbits(out).tobytes())
    audit["output_bits"] = int(out.size)
    audit["output_sha256"] = hashlib.sha256(np.packbits(out).tobytes()).hexdigest()
    audit["battery"] = extractor.battery(out) if out.size >= 100 else None
    dump_json(audit_path, audit)
    return 0


def _schmidt_instance(job):
    spec, cut, chis = job
    psi = statevec.run_ideal(circuits.build_circuit(spec)).amplitudes
    spec_ = schmidt.schmidt_decompose(psi, cut)
    rows = []
    for chi in chis:
        F, x = schmidt.truncated_state_xeb(psi, chi, cut=cut)
        rows.append((spec.n, spec.depth_cycles, chi, spec_.purity,
                     schmidt.fidelity_bound(spec_, chi).numeric, F, x))
    return rows


def staircase_cut(rows: int, cols: int) -> list:
    """Half of the grid taken in anti-diagonal order, so every layer crosses the cut."""
    cells = sorted(((r + c, r), r * cols + c) for r in range(rows) for c in range(cols))
    return sorted(q for _, q in cells[: (rows * cols) // 2])


def cmd_schmidt(a) -> int:
    if a.target_F is not None:
        lam = a.aspect
        write_manifest(manifest_path(a.out), "schmidt", {"target_F": a.target_F, "purity": a.purity,
                                                          "aspect": lam}, {}, [a.out])
        purity = a.purity if a.purity is not None else 2.0 / math.sqrt(2.0 ** a.n)
        chi_an, chi_nm = schmidt.chi_requirement(a.target_F, purity, lam)
        dump_json(a.out, {"chi_an": chi_an, "chi_nm": chi_nm, "ratio": chi_nm / chi_an, "purity": purity})
        return 0
    spec = chain_or_grid_spec(a, a.depth)
    cut = staircase_cut(a.rows, a.cols) if spec.topology == "grid2d" else spec.n // 2
    chis = parse_ints(a.chi)
    seeds = [rng.subseed(a.seed, "instance", i) for i in range(a.instances)]
    cfg = {"spec": spec.to_dict(), "cut": cut, "chi": chis, "instances": a.instances}
    write_manifest(manifest_path(a.out), "schmidt", cfg, {"root": a.seed, "instances": seeds}, [a.out])
    jobs = [(dataclasses.replace(spec, seed=s), cut, chis) for s in seeds]
    rows = [r for block in fan_out(_schmidt_instance, jobs) for r in block]
    write_csv(a.out, ["n", "d", "chi", "purity", "bound", "true_F", "xeb"], rows)
    return 0


# ---------------------------------------------------------------- recipes

def recipe_weaklink(out: Path, quick: bool, seed: int) -> dict:
    res = {}
    for T in (6, 8):
        spec = popdyn.weak_link_spec(12, T, 6 * T, seed=seed)
        depths = [T * m for m in range(2, 7)]
        scan = popdyn.order_parameter_scan(spec, np.arange(0.0, 1.0001, 0.01 if not quick else 0.02), depths)
        write_csv(out / f"weaklink_T{T}.csv", ["epsilon_n", "d", "xeb", "theta"], scan.rows())
        ratio = scan.crossing * T / math.log(16)
        res[f"T{T}"] = {"crossing": scan.crossing, "spread": scan.spread, "ratio_to_ln16": ratio,
                        "pass": abs(ratio - 1) <= 0.15}
    return res


def recipe_dynamical(out: Path, quick: bool, seed: int) -> dict:
    eps = 0.01
    d_max = 12
    curves = {}
    for n in (8, 12, 16):
        spec = CircuitSpec(n=n, depth_cycles=d_max, seed=seed)
        curves[n] = popdyn.evolve(spec, NoiseModel(epsilon=eps), d_max)
    rows = [(n, d, curves[n][d]) for n in curves for d in range(d_max + 1)]
    write_csv(out / "dynamical_crossing.csv", ["n", "d", "xeb"], rows)
    ds = np.arange(d_max + 1, dtype=float)
    cross = {}
    for a_, b_ in ((8, 12), (12, 16), (8, 16)):
        xs = [x for x in popdyn.curve_crossings(ds, np.log(curves[a_]), np.log(curves[b_])) if x > 0]
        cross[f"{a_}-{b_}"] = xs[0] if xs else None
    vals = [v for v in cross.values() if v is not None]
    return {"epsilon": eps, "crossings": cross,
            "pass": len(vals) == 3 and max(vals) - min(vals) <= 2.0}


def recipe_clifford(out: Path, quick: bool, seed: int) -> dict:
    M = 1 << (14 if quick else 20)
    results, summ = [], {}
    for r, c in ((4, 4), (4, 6), (6, 6)):
        spec = CircuitSpec(n=r * c, depth_cycles=10, topology="grid2d", rows=r, cols=c,
                           pattern=tuple("ABCDCDAB"), gate_ensemble="clifford_zxz", seed=seed)
        res = stabilizer.clifford_xeb_decay(spec, 10, M, seed=seed)
        results.append(res)
        summ[str(r * c)] = {"ln_lambda": res.ln_lambda, "stderr": res.ln_lambda_err,
                            "fit_depths": list(res.fit_depths), "pass": -2.3 <= res.ln_lambda <= -1.6}
    stabilizer.write_decay_csv(out / "clifford_decay.csv", results)
    summ["samples"] = M
    return summ


def recipe_spoof(out: Path, quick: bool, seed: int) -> dict:
    rows = []
    for n_half in (10, 20, 35):
        for k in (1.0, 1e3, 1e6):
            k_half = math.sqrt(k)
            sc = spoofing.SpoofScenario.from_qubits(n_half, n_half, k_L=k_half, k_R=k_half, d=24)
            lb = spoofing.spoof_linear_bound(sc)
            rows.append((n_half, k, lb.prefactor, lb.value, spoofing.order_statistic_mean(sc.D_L, k_half)))
    write_csv(out / "spoof_budget.csv", ["n_half", "k", "prefactor", "bound", "order_stat_half"], rows)
    return {"D": 2**20, "k": 1000, "order_statistic": spoofing.order_statistic_mean(2**20, 1000, "exact"),
            "ln_D_over_k": math.log(2**20 / 1000)}


def recipe_randomness(out: Path, quick: bool, seed: int) -> dict:
    n, k = 12, (400 if quick else 4000)
    spec = CircuitSpec(n=n, depth_cycles=16, seed=seed)
    psi = statevec.run_ideal(circuits.build_circuit(spec))
    ss = statevec.sample_bitstrings(psi, k, rng.subseed(seed, "device"))
    samples_mod.write_hex(out / "samples.hex", ss)
    rep = entropy.report(entropy.EntropyParams(F=1.0, k=k, D=2.0**n))
    dump_json(out / "entropy.json", rep)
    params = extractor.ExtractorParams(input_len_bits=n * k, claimed_min_entropy=rep["smooth_bits"],
                                       epsilon_total=1e-6)
    k_use = min(rep["smooth_bits"], params.claimed_min_entropy)
    m_max = extractor.max_output_bits(n * k, k_use, 1e-6, params.margin)
    tp = extractor.trevisan_params(n * k, m_max, 1e-6)
    seed_bits = rng.stream(seed, "extractor-seed").integers(0, 2, size=tp.d).astype(np.uint8)
    bits, audit = extractor.pipeline(ss, rep, params, seed_bits)
    Path(out / "random.bin").write_bytes(np.packbits(bits).tobytes())
    dump_json(out / "audit.json", audit)
    bat = extractor.battery(bits)
    return {"entropy_bits": rep["smooth_bits"], "epsilon_smoothing": rep["epsilon"], "output_bits": int(bits.size),
            "battery": bat, "pass": all(p >= 0.01 for p in bat.values())}


RECIPE_FUNCS = {
    "weaklink-transition": recipe_weaklink,
    "dynamical-crossing": recipe_dynamical,
    "clifford-lambda": recipe_clifford,
    "spoof-budget": recipe_spoof,
    "randomness-pipeline": recipe_randomness,
}


def cmd_recipe(a) -> int:
    if a.name == "list":
        print("\n".join(RECIPES))
        return 0
    if a.name not in RECIPE_FUNCS:
        raise ValidationError(f"unknown recipe {a.name!r}; available: {', '.join(RECIPES)}")
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.json", "recipe", {"name": a.name, "quick": a.quick}, {"root": a.seed},
                   [out / "summary.json"])
    summary = RECIPE_FUNCS[a.name](out, a.quick, a.seed)
    dump_json(out / "summary.json", summary)
    return 0


# ---------------------------------------------------------------- parser

def _add_layout(p, n_required: bool = False):
    p.add_argument("--topology", choices=("chain", "grid"), default="chain")
    p.add_argument("--n", type=int, required=n_required)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--pattern", default="ABCDCDAB")
    p.add_argument("--ensemble", default="haar_1q", choices=circuits.ENSEMBLES)
    p.add_argument("--T", type=int, default=None, help="weak-link period (chain only)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phaselab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"phaselab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="circuit JSON from a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sim", help="state-vector / density-matrix simulation and sampling")
    p.add_argument("--spec")
    p.add_argument("--circuit")
    p.add_argument("--mode", choices=("ideal", "depolarizing", "trajectory"), default="ideal")
    p.add_argument("--p1", type=float, default=0.0)
    p.add_argument("--p2", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="hex samples, or CSV with --trace")
    p.add_argument("--probs-out")
    p.add_argument("--summary")
    p.add_argument("--trace", type=int, help="ensemble XEB trace up to this depth")
    p.add_argument("--instances", type=int, default=10)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("popdyn", help="population-dynamics XEB traces and order-parameter scans")
    _add_layout(p)
    p.add_argument("--scan", help="eps=a:b:step over epsilon*n")
    p.add_argument("--depths")
    p.add_argument("--d-max", type=int)
    p.add_argument("--p2", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--mode", choices=("normal", "spoof_omit_cut"), default="normal")
    p.add_argument("--decay", choices=("exp", "linear"), default="exp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=cmd_popdyn)

    p = sub.add_parser("phase", help="analytic phase diagram and critical line")
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--scan", default="f=0:1.4:0.02")
    p.add_argument("--alphas", default="1.5:3:0.25")
    p.add_argument("--boundary", choices=tuple(analytics.BOUNDARY_R), default="none")
    p.add_argument("--popdyn", action="store_true", help="add popdyn crossing estimates to the f_c table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--fc-out")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("xeb", help="XEB estimators on a sample file")
    p.add_argument("--samples", required=True)
    p.add_argument("--probs", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--estimator", choices=("linear", "log", "txeb"), default="linear")
    p.add_argument("--t", type=float, default=4.0)
    p.add_argument("--dedupe", action="store_true")
    p.add_argument("--porter-thomas", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_xeb)

    p = sub.add_parser("spoof", help="spoofing XEB bounds")
    p.add_argument("--dl", type=int, required=True, help="left qubits")
    p.add_argument("--dr", type=int, required=True, help="right qubits")
    p.add_argument("--k", type=float, help="total selected strings, split optimally")
    p.add_argument("--kl", type=float, default=1.0)
    p.add_argument("--kr", type=float, default=1.0)
    p.add_argument("--lambda", dest="ln_lambda", type=float, default=-1.95, help="ln(lambda)")
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--nu", type=int, default=0)
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spoof)

    p = sub.add_parser("entropy", help="min-entropy report")
    p.add_argument("--F", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--c1", type=float, default=5.0)
    p.add_argument("--c2", type=float, default=5.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("extract", help="seeded randomness extraction")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--input-bits", type=int)
    p.add_argument("--k-bits", type=float, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--margin", type=int, default=0)
    p.add_argument("--seed", required=True, help="seed file, or 'os' to draw from the OS")
    p.add_argument("--seed-out")
    p.add_argument("--extractor", choices=("trevisan", "hmac"), default="trevisan")
    p.add_argument("--out", required=True)
    p.add_argument("--audit")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("schmidt", help="Schmidt spectra, truncated-state XEB and chi bounds")
    _add_layout(p)
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--chi", default="1,16")
    p.add_argument("--target-F", type=float)
    p.add_argument("--purity", type=float)
    p.add_argument("--aspect", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schmidt)

    p = sub.add_parser("recipe", help="bundled multi-step runs ('list' to enumerate)")
    p.add_argument("name")
    p.add_argument("--out-dir", default="recipe_out")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_recipe)
    return ap


VALIDATION_ERRORS = (ValidationError, SpecError, extractor.ExtractorError, json.JSONDecodeError)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in ("popdyn", "schmidt") and args.topology == "chain" and args.n is None \
            and getattr(args, "target_F", None) is None:
        print("phaselab: error: --n is required for --topology chain", file=sys.stderr)
        return 2
    try:
        threads()
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"phaselab: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        # parameter checks inside the library raise ValueError before any heavy work
        print(f"phaselab: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"phaselab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"phaselab: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
