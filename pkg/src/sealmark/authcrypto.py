"""Feature hashing and 1024-bit signatures.

Two signature schemes share one interface:

* ``rsa1024-pkcs1v15-sha256`` -- RSA-1024 PKCS#1 v1.5 over the SHA-256 feature
  digest, via ``cryptography``. Deterministic, but 1024-bit RSA is weak by
  current standards; it is kept because the payload layout has room for
  exactly 1024 signature bits.
* ``stub-hmac-sha512`` -- keyed HMAC expanded to 1024 bits. Symmetric (the
  "public" key is the secret), so only suitable for reproducible fixtures.

Key file container (all integers big-endian)::

    b"SMKEY" | version u8 (=1) | kind u8 (b"S" or b"P") |
    scheme-id length u8 | scheme id (ASCII) | body length u32 | body

RSA bodies are PKCS#8 DER (secret) or SubjectPublicKeyInfo DER (public).
"""

from __future__ import annotations

import hashlib
import hmac
import random
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadKey, IoError, LevelOverflow, MalformedSignature
from .features import QuantizedFeatures

SIGNATURE_BITS = 1024
DIGEST_BYTES = 32
RSA_SCHEME = "rsa1024-pkcs1v15-sha256"
STUB_SCHEME = "stub-hmac-sha512"
DEFAULT_SCHEME = RSA_SCHEME

_MAGIC = b"SMKEY"
_VERSION = 1


@dataclass(frozen=True)
class FeatureDigest:
    value: bytes

    def __post_init__(self):
        if len(self.value) != DIGEST_BYTES:
            raise ValueError(f"digest must be {DIGEST_BYTES} bytes, got {len(self.value)}")

    def hex(self) -> str:
        return self.value.hex()


@dataclass(frozen=True)
class SignatureBlock:
    value: bytes

    def __post_init__(self):
        if len(self.value) * 8 != SIGNATURE_BITS:
            raise MalformedSignature(f"signature must be {SIGNATURE_BITS} bits, got {len(self.value) * 8}")

    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.value, dtype=np.uint8))

    @classmethod
    def from_bits(cls, bits) -> "SignatureBlock":
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
        if bits.size != SIGNATURE_BITS:
            raise MalformedSignature(f"expected {SIGNATURE_BITS} signature bits, got {bits.size}")
        return cls(np.packbits(bits).tobytes())


@dataclass(frozen=True)
class KeyPair:
    scheme: str
    secret: bytes
    public: bytes


def serialize_features(q: QuantizedFeatures, header: bytes = b"") -> bytes:
    """``header``, then the step as a big-endian double, then each level as u16 BE."""
    levels = np.asarray(q.levels, dtype=np.int64).reshape(-1)
    if levels.size and (levels.min() < 0 or levels.max() > 0xFFFF):
        raise LevelOverflow("feature levels must fit in 16 bits")
    return header + struct.pack(">d", float(q.delta)) + levels.astype(">u2").tobytes()


def hash_features(q: QuantizedFeatures, header: bytes = b"") -> FeatureDigest:
    return FeatureDigest(hashlib.sha256(serialize_features(q, header)).digest())


# ---------------------------------------------------------------------------
# schemes


def _rsa_private(secret: bytes):
    from cryptography.hazmat.primitives.asymmetric import rsa
    from cryptography.hazmat.primitives.serialization import load_der_private_key

    try:
        key = load_der_private_key(secret, password=None)
    except (ValueError, TypeError) as exc:
        raise BadKey(f"cannot parse RSA secret key: {exc}") from exc
    if not isinstance(key, rsa.RSAPrivateKey) or key.key_size != SIGNATURE_BITS:
        raise BadKey("secret key is not a 1024-bit RSA key")
    return key


def _rsa_public(public: bytes):
    from cryptography.hazmat.primitives.asymmetric import rsa
    from cryptography.hazmat.primitives.serialization import load_der_public_key

    try:
        key = load_der_public_key(public)
    except (ValueError, TypeError) as exc:
        raise BadKey(f"cannot parse RSA public key: {exc}") from exc
    if not isinstance(key, rsa.RSAPublicKey) or key.key_size != SIGNATURE_BITS:
        raise BadKey("public key is not a 1024-bit RSA key")
    return key


def _seeded_rsa_private(seed: int):
    """RSA-1024 key whose primes come from a seeded generator (reproducible fixtures)."""
    from cryptography.hazmat.primitives.asymmetric import rsa
    from sympy import nextprime

    rng = random.Random(f"sealmark-rsa-{seed}")
    e = 65537
    primes = []
    while len(primes) < 2:
        cand = rng.getrandbits(512) | (0b11 << 510) | 1
        p = int(nextprime(cand))
        if p.bit_length() == 512 and (p - 1) % e and p not in primes:
            primes.append(p)
    p, q = primes
    d = pow(e, -1, (p - 1) * (q - 1))
    numbers = rsa.RSAPrivateNumbers(
        p=p,
        q=q,
        d=d,
        dmp1=rsa.rsa_crt_dmp1(d, p),
        dmq1=rsa.rsa_crt_dmq1(d, q),
        iqmp=rsa.rsa_crt_iqmp(p, q),
        public_numbers=rsa.RSAPublicNumbers(e, p * q),
    )
    return numbers.private_key()


def keygen(scheme: str = DEFAULT_SCHEME, seed: int | None = None) -> KeyPair:
    if scheme == RSA_SCHEME:
        from cryptography.hazmat.primitives import serialization
        from cryptography.hazmat.primitives.asymmetric import rsa

        if seed is None:
            key = rsa.generate_private_key(public_exponent=65537, key_size=SIGNATURE_BITS)
        else:
            key = _seeded_rsa_private(seed)
        secret = key.private_bytes(
            serialization.Encoding.DER,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        public = key.public_key().public_bytes(
            serialization.Encoding.DER,
            serialization.PublicFormat.SubjectPublicKeyInfo,
        )
        return KeyPair(scheme, secret, public)
    if scheme == STUB_SCHEME:
        if seed is None:
            import secrets

            material = secrets.token_bytes(32)
        else:
            material = hashlib.sha256(f"sealmark-stub-{seed}".encode()).digest()
        return KeyPair(scheme, material, material)
    raise BadKey(f"unknown signature scheme {scheme!r}")


def _stub_mac(key: bytes, digest: bytes) -> bytes:
    return b"".join(hmac.new(key, digest + bytes([i]), hashlib.sha512).digest() for i in range(2))


def sign(d: FeatureDigest, secret: bytes, scheme: str = DEFAULT_SCHEME) -> SignatureBlock:
    if scheme == RSA_SCHEME:
        from cryptography.hazmat.primitives import hashes
        from cryptography.hazmat.primitives.asymmetric import padding, utils

        key = _rsa_private(secret)
        sig = key.sign(d.value, padding.PKCS1v15(), utils.Prehashed(hashes.SHA256()))
        return SignatureBlock(sig)
    if scheme == STUB_SCHEME:
        if len(secret) != 32:
            raise BadKey("stub keys are 32 bytes")
        return SignatureBlock(_stub_mac(secret, d.value))
    raise BadKey(f"unknown signature scheme {scheme!r}")


def verify(d: FeatureDigest, s: SignatureBlock, public: bytes, scheme: str = DEFAULT_SCHEME) -> bool:
    if scheme == RSA_SCHEME:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives import hashes
        from cryptography.hazmat.primitives.asymmetric import padding, utils

        key = _rsa_public(public)
        try:
            key.verify(s.value, d.value, padding.PKCS1v15(), utils.Prehashed(hashes.SHA256()))
        except InvalidSignature:
            return False
        return True
    if scheme == STUB_SCHEME:
        if len(public) != 32:
            raise BadKey("stub keys are 32 bytes")
        return hmac.compare_digest(_stub_mac(public, d.value), s.value)
    raise BadKey(f"unknown signature scheme {scheme!r}")


# ---------------------------------------------------------------------------
# key files


def encode_key(kind: str, scheme: str, body: bytes) -> bytes:
    if kind not in ("S", "P"):
        raise ValueError("kind must be 'S' or 'P'")
    sid = scheme.encode("ascii")
    return _MAGIC + bytes([_VERSION]) + kind.encode() + bytes([len(sid)]) + sid + struct.pack(">I", len(body)) + body


def decode_key(blob: bytes) -> tuple[str, str, bytes]:
    """Return ``(kind, scheme, body)`` from a key container."""
    try:
        if blob[:5] != _MAGIC or blob[5] != _VERSION:
            raise BadKey("not a sealmark key file")
        kind = chr(blob[6])
        slen = blob[7]
        scheme = blob[8 : 8 + slen].decode("ascii")
        (blen,) = struct.unpack(">I", blob[8 + slen : 12 + slen])
        body = blob[12 + slen :]
    except (IndexError, struct.error, UnicodeDecodeError) as exc:
        raise BadKey("truncated key file") from exc
    if kind not in ("S", "P") or len(body) != blen:
        raise BadKey("malformed key file")
    return kind, scheme, body


def write_keypair(pair: KeyPair, secret_path: str | Path, public_path: str | Path) -> None:
    try:
        Path(secret_path).write_bytes(encode_key("S", pair.scheme, pair.secret))
        Path(public_path).write_bytes(encode_key("P", pair.scheme, pair.public))
    except OSError as exc:
        raise IoError(f"cannot write key files: {exc}") from exc


def read_key(path: str | Path, kind: str) -> tuple[str, bytes]:
    """Load a key file and check its kind; returns ``(scheme, body)``."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read key file {path}: {exc.strerror or exc}") from exc
    found, scheme, body = decode_key(blob)
    if found != kind:
        want = "secret" if kind == "S" else "public"
        raise BadKey(f"{path} does not hold a {want} key")
    return scheme, body
