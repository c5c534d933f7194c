"""``sealmark`` command line: keygen, embed, verify, bench.

Exit codes: 0 success or authentic, 1 not authentic, 2 usage error,
3 runtime error. Every non-usage outcome prints one JSON line on stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import authcrypto, bench
from .errors import ConfigError, CorruptFile, IoError, SealmarkError, UnsupportedFormat
from .imagecore import load_image, save_image
from .protocol import SystemParams, authenticate, embed, with_overrides

EXIT_OK = 0
EXIT_NOT_AUTHENTIC = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

LOSSLESS_SUFFIXES = (".pgm", ".pnm", ".png")

log = logging.getLogger("sealmark")


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else "-inf" if obj < 0 else "nan"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _jsonable(obj.item())
    return obj


def emit(payload: dict) -> None:
    print(json.dumps(_jsonable(payload), sort_keys=True, allow_nan=False), flush=True)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("system parameters (override --params)")
    g.add_argument("--params", help="parameter sidecar file written by 'embed --save-params'")
    g.add_argument("--gamma", type=float, help="QIM quantization interval")
    g.add_argument("--delta", type=float, help="feature quantization step")
    g.add_argument("--gaussian-n", type=int, help="Gaussian window size (odd)")
    g.add_argument("--gaussian-sigma", type=float, help="Gaussian standard deviation")
    g.add_argument("--block", type=int, help="feature block size, same in both axes")
    g.add_argument("--ldpc-seed", type=int, help="seed of the LDPC parity-check construction")
    g.add_argument("--llr", choices=("hard", "soft"), help="decoder input model")


def _params_from(args, scheme: str | None = None) -> SystemParams:
    base = SystemParams.load(args.params) if args.params else SystemParams()
    return with_overrides(
        base,
        gamma=args.gamma,
        delta=args.delta,
        gaussian_n=args.gaussian_n,
        gaussian_sigma=args.gaussian_sigma,
        block_s=args.block,
        block_t=args.block,
        ldpc_seed=args.ldpc_seed,
        llr=args.llr,
        scheme=scheme,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sealmark", description="Semi-fragile image authentication watermark.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    kg = sub.add_parser("keygen", help="write a secret/public key pair")
    kg.add_argument("--out", required=True, help="path prefix; writes PREFIX.sec and PREFIX.pub")
    kg.add_argument("--scheme", default=authcrypto.DEFAULT_SCHEME, choices=(authcrypto.RSA_SCHEME, authcrypto.STUB_SCHEME))
    kg.add_argument("--seed", type=int, help="derive the key deterministically from this seed")

    em = sub.add_parser("embed", help="watermark an image")
    em.add_argument("input")
    em.add_argument("output", help="lossless output (.pgm or .png)")
    em.add_argument("--key", required=True, help="secret key file")
    em.add_argument("--save-params", help="also write the parameter sidecar here")
    em.add_argument("--psnr-floor", type=float, help="fail when PSNR drops below this many dB")
    _add_param_flags(em)

    ve = sub.add_parser("verify", help="authenticate a watermarked image")
    ve.add_argument("input")
    ve.add_argument("--pubkey", required=True, help="public key file")
    _add_param_flags(ve)

    be = sub.add_parser("bench", help="run robustness experiments from a JSON config")
    be.add_argument("config")
    be.add_argument("--out", required=True, help="directory for the CSV files")
    return parser


def cmd_keygen(args) -> int:
    pair = authcrypto.keygen(args.scheme, seed=args.seed)
    # self-test before anything touches disk
    probe = authcrypto.FeatureDigest(bytes(range(32)))
    if not authcrypto.verify(probe, authcrypto.sign(probe, pair.secret, pair.scheme), pair.public, pair.scheme):
        raise SealmarkError("generated key pair failed its sign/verify self-test")
    sec, pub = Path(f"{args.out}.sec"), Path(f"{args.out}.pub")
    authcrypto.write_keypair(pair, sec, pub)
    emit({"command": "keygen", "scheme": pair.scheme, "secret": str(sec), "public": str(pub)})
    return EXIT_OK


def cmd_embed(args) -> int:
    if Path(args.output).suffix.lower() not in LOSSLESS_SUFFIXES:
        raise UsageError(f"output must be lossless ({', '.join(LOSSLESS_SUFFIXES)}), got {args.output}")
    scheme, secret = authcrypto.read_key(args.key, "S")
    params = _params_from(args, scheme)
    img = load_image(args.input)
    start = time.perf_counter()
    result = embed(img, secret, params, psnr_floor=args.psnr_floor)
    elapsed = time.perf_counter() - start
    save_image(result.watermarked, args.output)
    if args.save_params:
        params.save(args.save_params)
    emit({"command": "embed", "output": str(args.output), "seconds": round(elapsed, 4), **result.report})
    return EXIT_OK


def cmd_verify(args) -> int:
    scheme, public = authcrypto.read_key(args.pubkey, "P")
    params = _params_from(args, scheme)
    try:
        img = load_image(args.input)
    except (UnsupportedFormat, CorruptFile) as exc:
        raise IoError(str(exc)) from exc
    verdict = authenticate(img, public, params)
    emit({"command": "verify", "authentic": verdict.authentic, "diagnostics": verdict.diagnostics})
    return EXIT_OK if verdict.authentic else EXIT_NOT_AUTHENTIC


def cmd_bench(args) -> int:
    cfg = bench.ExperimentConfig.load(args.config)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    results, timing = bench.run_all(cfg)
    files = {}
    for name, records in results.items():
        path = out / f"{name}.csv"
        bench.write_csv(records, path)
        files[name] = {"path": str(path), "records": len(records)}
    emit({"command": "bench", "files": files, **timing})
    return EXIT_OK


COMMANDS = {"keygen": cmd_keygen, "embed": cmd_embed, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"sealmark: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SealmarkError as exc:
        emit({"command": args.command, "error": type(exc).__name__, "message": str(exc)})
        if args.command == "verify" and not isinstance(exc, IoError):
            return EXIT_NOT_AUTHENTIC
        return EXIT_RUNTIME
    except Exception as exc:  # anything unexpected is still a failure, never a pass
        log.exception("unexpected failure")
        emit({"command": args.command, "error": type(exc).__name__, "message": str(exc)})
        return EXIT_NOT_AUTHENTIC if args.command == "verify" else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
