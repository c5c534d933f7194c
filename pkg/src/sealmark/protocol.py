"""Sign-side embedding and verify-side authentication.

Embedding::

    pad -> features D -> levels -> SHA-256 -> signature
                      -> perturbation triples p
    payload = p || signature  -> LDPC codeword -> QIM into HL3/LH3 -> inverse HWT

Authentication reverses it: extract bits, decode, split the payload, recompute
features from the received image, undo single-level drift with p, hash and
check the signature. Every failure becomes ``authentic=False``.

The watermarked output keeps the padded power-of-two geometry; cropping it
would discard carrier coefficients.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import authcrypto, ecc
from .errors import (
    ConfigError,
    DimensionMismatch,
    EmbedQualityBelowFloor,
    EmbedSelfCheckFailed,
    LengthMismatch,
    SealmarkError,
)
from .features import (
    FeatureMatrix,
    PerturbationVector,
    QuantizedFeatures,
    feature_matrix,
    gaussian_kernel,
    perturbation_vector,
    quantize_features,
    recover_features,
)
from .imagecore import GrayImage, pad_to_square_pow2
from .metrics import psnr, ssim
from .wavelet import capacity, finalize_carriers, hwt_forward, hwt_inverse, qim_embed, qim_extract, qim_residuals

log = logging.getLogger(__name__)

PARAMS_MAGIC = "sealmark-params"
PARAMS_VERSION = 1
# decoder-side choices; free to differ between signer and verifier, so never signed
VERIFIER_ONLY = ("llr",)


@dataclass(frozen=True)
class SystemParams:
    gaussian_n: int = 3
    gaussian_sigma: float = 0.5
    block_s: int = 16
    block_t: int = 16
    delta: float = 2.0
    gamma: float = 10.0
    ldpc_seed: int = 1
    ldpc_n: int = 8192
    ldpc_k: int = 4096
    scheme: str = authcrypto.DEFAULT_SCHEME
    hash: str = "sha256"
    size: int = 512
    llr: str = "hard"

    @property
    def n_features(self) -> int:
        return (self.size // self.block_s) * (self.size // self.block_t)

    def validate(self) -> "SystemParams":
        if self.size % self.block_s or self.size % self.block_t:
            raise ConfigError(f"blocks {self.block_s}x{self.block_t} do not tile a {self.size} image")
        if 3 * self.n_features + authcrypto.SIGNATURE_BITS != self.ldpc_k:
            raise ConfigError(
                f"payload of {3 * self.n_features + authcrypto.SIGNATURE_BITS} bits "
                f"does not match LDPC dimension {self.ldpc_k}"
            )
        if capacity(self.size) != self.ldpc_n:
            raise ConfigError(f"{self.size} image carries {capacity(self.size)} bits, code length is {self.ldpc_n}")
        if self.hash != "sha256":
            raise ConfigError(f"unsupported hash {self.hash!r}")
        if self.llr not in ("hard", "soft"):
            raise ConfigError(f"llr must be 'hard' or 'soft', got {self.llr!r}")
        if not self.delta > 0 or not self.gamma > 0:
            raise ConfigError("delta and gamma must be positive")
        return self

    def to_text(self, signed_only: bool = False) -> str:
        """Versioned ``key=value`` text with keys sorted.

        With ``signed_only`` the verifier-side keys are left out; that form is
        prepended to the feature hash.
        """
        items = asdict(self)
        if signed_only:
            for key in VERIFIER_ONLY:
                items.pop(key)
        items["ldpc_version"] = ecc.CONSTRUCTION_VERSION
        lines = [f"{PARAMS_MAGIC} v{PARAMS_VERSION}"]
        for key in sorted(items):
            value = items[key]
            lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
        return "\n".join(lines) + "\n"

    def header_bytes(self) -> bytes:
        return self.to_text(signed_only=True).encode("ascii")

    @classmethod
    def from_text(cls, text: str) -> "SystemParams":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines or lines[0] != f"{PARAMS_MAGIC} v{PARAMS_VERSION}":
            raise ConfigError("missing or unsupported parameter file header")
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for ln in lines[1:]:
            key, sep, raw = ln.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"malformed parameter line {ln!r}")
            if key == "ldpc_version":
                if int(raw) != ecc.CONSTRUCTION_VERSION:
                    raise ConfigError(f"LDPC construction v{raw} is not supported")
                continue
            if key not in types:
                raise ConfigError(f"unknown parameter {key!r}")
            kind = types[key]
            try:
                values[key] = int(raw) if kind == "int" else float(raw) if kind == "float" else raw.strip()
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**values).validate()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii", newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> "SystemParams":
        try:
            return cls.from_text(Path(path).read_text(encoding="ascii"))
        except OSError as exc:
            raise ConfigError(f"cannot read parameter file {path}: {exc}") from exc

    def code(self) -> ecc.LdpcCode:
        return ecc.ldpc_build(self.ldpc_seed, self.ldpc_n, self.ldpc_k)

    def features(self, img: GrayImage) -> FeatureMatrix:
        kernel = gaussian_kernel(self.gaussian_n, self.gaussian_sigma)
        return feature_matrix(img, kernel, self.block_s, self.block_t)


@dataclass(frozen=True)
class Payload:
    p_bits: np.ndarray
    sig_bits: np.ndarray

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.p_bits, self.sig_bits]).astype(np.uint8)

    def hex(self) -> str:
        return np.packbits(self.bits).tobytes().hex()


@dataclass(frozen=True)
class AuthVerdict:
    authentic: bool
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EmbedResult:
    watermarked: GrayImage
    report: dict
    payload: Payload
    codeword: np.ndarray
    digest: authcrypto.FeatureDigest


def build_payload(p: PerturbationVector, s: authcrypto.SignatureBlock) -> Payload:
    return Payload(p.flatten(), s.bits())


def parse_payload(bits, n_features: int | None = None) -> tuple[PerturbationVector, authcrypto.SignatureBlock]:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    sig_len = authcrypto.SIGNATURE_BITS
    p_len = bits.size - sig_len
    if p_len <= 0 or p_len % 3 or (n_features is not None and p_len != 3 * n_features):
        raise LengthMismatch(f"payload of {bits.size} bits does not split into triples plus a signature")
    return PerturbationVector.from_flat(bits[:p_len]), authcrypto.SignatureBlock.from_bits(bits[p_len:])


def _prepare(img: GrayImage, params: SystemParams) -> GrayImage:
    padded = pad_to_square_pow2(img)
    if padded.width != params.size:
        raise DimensionMismatch(f"image pads to {padded.width}x{padded.height}, parameters expect {params.size}")
    return padded


def _channel_llr(pyr, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    bits = qim_extract(pyr, params.gamma)
    if params.llr == "soft":
        return bits, ecc.soft_llr(qim_residuals(pyr, params.gamma), params.gamma)
    return bits, ecc.hard_llr(bits)


@dataclass(frozen=True)
class _Extraction:
    decode: ecc.DecodeResult
    raw_bits: np.ndarray
    received: QuantizedFeatures | None = None
    recovered: QuantizedFeatures | None = None
    p: PerturbationVector | None = None
    signature: authcrypto.SignatureBlock | None = None
    p3_violations: int = 0
    residue_mismatches: int = 0


def _extract(padded: GrayImage, params: SystemParams) -> _Extraction:
    code = params.code()
    pyr = hwt_forward(padded, 3)
    raw_bits, llr = _channel_llr(pyr, params)
    result = ecc.ldpc_decode(code, llr)
    if not result.success:
        return _Extraction(result, raw_bits)
    p, sig = parse_payload(result.msg, params.n_features)
    D = params.features(padded)
    received = quantize_features(D, params.delta)
    rec = recover_features(D, p, params.delta)
    mismatch = int(np.count_nonzero(((rec.features.levels - 1) % 4) != p.residues))
    return _Extraction(result, raw_bits, received, rec.features, p, sig, rec.p3_violations, mismatch)


def embed(
    img: GrayImage,
    secret: bytes,
    params: SystemParams | None = None,
    *,
    psnr_floor: float | None = None,
    self_check: bool = True,
) -> EmbedResult:
    params = (params or SystemParams()).validate()
    padded = _prepare(img, params)
    header = params.header_bytes()

    D = params.features(padded)
    levels = quantize_features(D, params.delta)
    digest = authcrypto.hash_features(levels, header)
    signature = authcrypto.sign(digest, secret, params.scheme)
    payload = build_payload(perturbation_vector(D, params.delta), signature)

    codeword = ecc.ldpc_encode(params.code(), payload.bits)
    pyr = qim_embed(hwt_forward(padded, 3), codeword, params.gamma)
    marked = finalize_carriers(hwt_inverse(pyr), pyr)

    quality = {"psnr": psnr(padded, marked), "ssim": ssim(padded, marked)}
    if psnr_floor is not None and quality["psnr"] < psnr_floor:
        raise EmbedQualityBelowFloor(f"PSNR {quality['psnr']:.2f} dB is below the {psnr_floor} dB floor")

    if self_check:
        ex = _extract(marked, params)
        if not ex.decode.success or not np.array_equal(ex.decode.codeword, codeword):
            raise EmbedSelfCheckFailed("payload does not survive pixel rounding; try a larger gamma")
        if authcrypto.hash_features(ex.recovered, header) != digest:
            raise EmbedSelfCheckFailed("features of the marked image are not recoverable; try a larger delta")

    report = {
        **quality,
        "gamma": params.gamma,
        "delta": params.delta,
        "size": params.size,
        "payload_sha256": hashlib.sha256(payload.bits.tobytes()).hexdigest(),
        "feature_digest": digest.hex(),
        "ldpc": params.code().fingerprint,
    }
    return EmbedResult(marked, report, payload, codeword, digest)


def authenticate(img: GrayImage, public: bytes, params: SystemParams | None = None) -> AuthVerdict:
    params = (params or SystemParams()).validate()
    diag: dict = {
        "ldpc_success": False,
        "ldpc_iterations": None,
        "pre_decode_ber": None,
        "feature_distance": None,
        "p3_violations": None,
        "residue_mismatches": None,
        "signature_valid": False,
        "reason": None,
    }
    try:
        padded = _prepare(img, params)
        ex = _extract(padded, params)
        diag["ldpc_success"] = ex.decode.success
        diag["ldpc_iterations"] = ex.decode.iterations
        diag["pre_decode_ber"] = float(np.mean(ex.raw_bits != ex.decode.codeword))
        if not ex.decode.success:
            diag["reason"] = "ldpc-decode-failed"
            return AuthVerdict(False, diag)
        digest = authcrypto.hash_features(ex.recovered, params.header_bytes())
        valid = authcrypto.verify(digest, ex.signature, public, params.scheme)
        diag["signature_valid"] = valid
        diag["p3_violations"] = ex.p3_violations
        diag["residue_mismatches"] = ex.residue_mismatches
        # a surviving mod-4 disagreement means some level moved by two or more
        diag["feature_distance"] = 0 if valid else (2 if ex.residue_mismatches else None)
        if not valid:
            diag["reason"] = "signature-mismatch"
        return AuthVerdict(valid, diag)
    except SealmarkError as exc:
        diag["reason"] = f"{type(exc).__name__}: {exc}"
        return AuthVerdict(False, diag)


def with_overrides(params: SystemParams, **overrides) -> SystemParams:
    """Copy of ``params`` with non-None overrides applied and validated."""
    return replace(params, **{k: v for k, v in overrides.items() if v is not None}).validate()
