"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
numbers, then asserts. Criterion 6 is known to fail with the default
parameters; see the README for the measured margins.
"""

import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from sealmark import authcrypto, bench, ecc
from sealmark.bench import ExperimentConfig
from sealmark.features import FeatureMatrix, perturbation_vector, quantize_features, recover_features
from sealmark.imagecore import encode_pgm
from sealmark.protocol import SystemParams, authenticate, embed
from sealmark.wavelet import hwt_forward, hwt_inverse, qim_embed_values, qim_extract, qim_extract_values

from .test_wavelet import dense_pyramid


@pytest.fixture
def report(capsys):
    def _report(n, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return _report


@pytest.fixture(scope="module")
def keys():
    return authcrypto.keygen(authcrypto.RSA_SCHEME, seed=7)


@pytest.fixture(scope="module")
def marked_corpus(corpus, keys):
    params = SystemParams(gamma=10.0, delta=2.0)
    start = time.perf_counter()
    results = {name: embed(img, keys.secret, params) for name, img in corpus.items()}
    return results, time.perf_counter() - start


def test_1_embedding_quality(marked_corpus, report):
    results, elapsed = marked_corpus
    psnrs = {k: r.report["psnr"] for k, r in results.items()}
    ssims = {k: r.report["ssim"] for k, r in results.items()}
    ok = len(results) == 10 and min(psnrs.values()) >= 40 and min(ssims.values()) >= 0.98 and elapsed < 10
    detail = (
        f"{len(results)} images, min PSNR {min(psnrs.values()):.2f} dB, "
        f"min SSIM {min(ssims.values()):.4f}, {elapsed:.2f} s total"
    )
    assert report(1, ok, detail), detail


def test_2_haar_reconstruction_and_dense_oracle(report):
    rng = np.random.default_rng(2)
    recon = 0.0
    for _ in range(100):
        x = rng.uniform(0, 255, (64, 64))
        recon = max(recon, float(np.abs(hwt_inverse(hwt_forward(x, 3)) - x).max()))
    dense = 0.0
    for _ in range(100):
        x = rng.uniform(-255, 255, (8, 8))
        dense = max(dense, float(np.abs(hwt_forward(x, 3).coeffs - dense_pyramid(x, 3)).max()))
    ok = recon <= 1e-9 and dense <= 1e-9
    detail = f"reconstruction max error {recon:.2e}, dense-oracle max error {dense:.2e}"
    assert report(2, ok, detail), detail


def test_3_qim_round_trip(report):
    rng = np.random.default_rng(3)
    errors = {}
    for gamma in (8.0, 10.0, 20.0, 40.0):
        values = rng.uniform(-2000, 2000, 100_000)
        bits = rng.integers(0, 2, values.size)
        marked = qim_embed_values(values, bits, gamma)
        noise = rng.uniform(-gamma / 4, gamma / 4, values.size)
        noise = np.where(np.abs(noise) == gamma / 4, 0.0, noise)  # open interval
        errors[gamma] = int(np.count_nonzero(qim_extract_values(marked + noise, gamma) != bits))
    ok = not any(errors.values())
    detail = "bit errors per gamma " + ", ".join(f"{g:g}:{e}" for g, e in errors.items()) + " over 1e5 coefficients"
    assert report(3, ok, detail), detail


def test_4_three_bit_recovery_exhaustive(report):
    start = time.perf_counter()
    total = exact = inner_total = inner_exact = 0
    for delta in (0.5, 1.0, 2.0, 4.0):
        step = delta / 40
        d = np.arange(801) * step  # [0, 20 delta]
        eps = np.arange(-160, 161) * step  # [-4 delta, 4 delta]
        D, E = np.meshgrid(d, eps, indexing="ij")
        bad = D + E
        q0 = np.floor(D / delta)
        valid = (bad >= 0) & (np.abs(np.floor(bad / delta) - q0) <= 1)
        orig = FeatureMatrix(D[valid][None, :], 1, 1)
        rec = recover_features(FeatureMatrix(bad[valid][None, :], 1, 1), perturbation_vector(orig, delta), delta)
        hit = rec.features.levels == quantize_features(orig, delta).levels
        total += hit.size
        exact += int(hit.sum())
        inner = np.abs(E[valid]) < delta / 2
        inner_total += int(inner.sum())
        inner_exact += int(hit[inner].sum())
    elapsed = time.perf_counter() - start
    ok = exact == total and inner_exact >= 0.99 * inner_total and elapsed < 60
    detail = (
        f"{exact}/{total} single-level cases exact, {inner_exact}/{inner_total} with |eps|<delta/2, "
        f"{elapsed:.1f} s"
    )
    assert report(4, ok, detail), detail


def test_5_ldpc_monte_carlo(report):
    code = ecc.ldpc_build(1)
    rng = np.random.default_rng(5)
    msg = rng.integers(0, 2, code.k).astype(np.uint8)
    cw = ecc.ldpc_encode(code, msg)
    clean = ecc.ldpc_decode(code, ecc.hard_llr(cw))
    identity = clean.success and np.array_equal(clean.msg, msg)
    flips = round(0.03 * code.n)
    failures = worst = 0
    for _ in range(200):
        msg = rng.integers(0, 2, code.k).astype(np.uint8)
        cw = ecc.ldpc_encode(code, msg)
        noisy = cw.copy()
        noisy[rng.choice(code.n, flips, replace=False)] ^= 1
        res = ecc.ldpc_decode(code, ecc.hard_llr(noisy))
        failures += int(not res.success or not np.array_equal(res.msg, msg))
        worst = max(worst, res.iterations)
    ok = identity and failures == 0
    detail = f"clean identity {identity}, {failures}/200 failures at {flips} flips, max {worst} iterations"
    assert report(5, ok, detail), detail


def test_6_jpeg_tolerance(marked_corpus, keys, report):
    results, _ = marked_corpus
    params = SystemParams(gamma=10.0, delta=2.0)
    rates = {}
    for q in (100, 95, 90, 85, 80):
        ok_count = sum(
            authenticate(bench.jpeg_roundtrip(r.watermarked, q).image, keys.public, params).authentic
            for r in results.values()
        )
        rates[q] = ok_count / len(results)
    ok = all(v >= 0.95 for v in rates.values())
    detail = "authentic fraction by JPEG quality " + ", ".join(f"Q{q}:{v:.2f}" for q, v in rates.items())
    assert report(6, ok, detail), detail


def test_6_monotone_trend_substitutes(corpus_paths, marked_corpus, report):
    cfg = ExperimentConfig(
        corpus=[str(p) for p in corpus_paths],
        experiments=["tpr"],
        deltas=[2.0],
        qualities=[100, 95, 90, 85, 80, 70, 50],
        scheme=authcrypto.STUB_SCHEME,
    )
    results, _ = bench.run_all(cfg)
    tpr = [r.value for r in sorted(results["tpr"], key=lambda r: -r.quality) if r.metric == "TPR"]
    monotone = all(a >= b for a, b in zip(tpr, tpr[1:]))

    code = ecc.ldpc_build(1)
    cells = violations = 0
    for res in marked_corpus[0].values():
        for q in (95, 90, 85, 80, 70):
            bits = qim_extract(hwt_forward(bench.jpeg_roundtrip(res.watermarked, q).image, 3), 10.0)
            dec = ecc.ldpc_decode(code, ecc.hard_llr(bits))
            if dec.success:
                cells += 1
                pre = np.mean(bits != res.codeword)
                post = np.mean(dec.msg != res.payload.bits)
                violations += int(post > pre)
    ok = monotone and violations == 0
    detail = f"TPR by falling quality {[round(t, 2) for t in tpr]}, post>pre BER in {violations}/{cells} decoded cells"
    assert report("6-trends", ok, detail), detail


def test_7_tamper_detection(corpus_paths, report):
    common = dict(corpus=[str(p) for p in corpus_paths], experiments=["tnr"], trials=200, seed=7)
    main = bench.run_tnr_experiment(ExperimentConfig(deltas=[2.0], a0s=[16, 512], **common))
    order = bench.run_tnr_experiment(ExperimentConfig(deltas=[1.0, 4.0], a0s=[8], **common))
    tnr16 = next(r.value for r in main if r.a0 == 16)
    tnr_full = next(r.value for r in main if r.a0 == 512)
    small = next(r.value for r in order if r.delta == 1.0)
    large = next(r.value for r in order if r.delta == 4.0)
    ok = tnr16 >= 0.95 and tnr_full == 1.0 and small >= large
    detail = f"TNR a0=16 {tnr16:.3f}, a0=512 {tnr_full:.3f}, a0=8 delta=1 {small:.3f} vs delta=4 {large:.3f}"
    assert report(7, ok, detail), detail


def _pipeline_run(workdir, fixture, corpus_path):
    env = {**os.environ, "PYTHONHASHSEED": "random"}

    def cli(*args):
        out = subprocess.run(
            [sys.executable, "-m", "sealmark", *map(str, args)], cwd=workdir, env=env, capture_output=True, text=True
        )
        return out.returncode, out.stdout

    cli("keygen", "--out", "k", "--seed", 8)
    _, emb = cli("embed", fixture, "m.png", "--key", "k.sec")
    _, ver = cli("verify", "m.png", "--pubkey", "k.pub")
    (workdir / "cfg.json").write_text(
        json.dumps({"corpus": [str(corpus_path)], "experiments": ["tnr", "tpr"], "deltas": [2.0],
                    "qualities": [90, 70], "a0s": [8], "trials": 4, "seed": 3})
    )
    cli("bench", "cfg.json", "--out", "csv")
    emb = json.loads(emb)
    emb.pop("seconds")
    blobs = {
        "image": (workdir / "m.png").read_bytes(),
        "secret": (workdir / "k.sec").read_bytes(),
        "embed": json.dumps(emb, sort_keys=True),
        "verify": ver,
        **{p.name: p.read_bytes() for p in sorted((workdir / "csv").iterdir())},
    }
    return {k: hashlib.sha256(v if isinstance(v, bytes) else v.encode()).hexdigest() for k, v in blobs.items()}


def test_8_determinism(tmp_path, corpus_paths, report):
    fixture = tmp_path / "fixture.pgm"
    fixture.write_bytes(corpus_paths[0].read_bytes())
    runs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        d.mkdir()
        runs.append(_pipeline_run(d, fixture, corpus_paths[1]))
    same = [k for k in runs[0] if runs[0][k] == runs[1].get(k)]
    ok = len(runs[0]) == 6 and len(same) == len(runs[0]) == len(runs[1])
    detail = f"{len(same)}/{len(runs[0])} artefacts byte-identical across two processes ({', '.join(sorted(runs[0]))})"
    assert report(8, ok, detail), detail


def test_9_golden_payload(fixture_image, golden, keys, report):
    res = embed(fixture_image, keys.secret, SystemParams())
    checks = {
        "payload": res.payload.hex() == golden["payload_hex"] and res.payload.bits.size == 4096,
        "codeword": np.packbits(res.codeword).tobytes().hex() == golden["codeword_hex"] and res.codeword.size == 8192,
        "image": hashlib.sha256(encode_pgm(res.watermarked)).hexdigest() == golden["watermarked_sha256"],
    }
    ok = all(checks.values())
    detail = "matches stored " + ", ".join(f"{k}={v}" for k, v in checks.items())
    assert report(9, ok, detail), detail
