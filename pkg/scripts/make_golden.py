"""Regenerate the stored payload/codeword for the golden fixture.

    python scripts/make_golden.py

Only rerun after a deliberate change to the payload layout, the feature
pipeline or the LDPC construction; the golden test exists to catch accidental ones.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from sealmark import authcrypto
from sealmark.imagecore import encode_pgm, load_image
from sealmark.protocol import SystemParams, embed

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden"
KEY_SEED = 7


def main() -> None:
    img = load_image(GOLDEN / "fixture.pgm")
    params = SystemParams()
    keys = authcrypto.keygen(authcrypto.RSA_SCHEME, seed=KEY_SEED)
    res = embed(img, keys.secret, params)
    record = {
        "key_seed": KEY_SEED,
        "scheme": keys.scheme,
        "public_key_sha256": hashlib.sha256(keys.public).hexdigest(),
        "params": params.to_text(),
        "feature_digest": res.digest.hex(),
        "payload_bits": int(res.payload.bits.size),
        "payload_hex": res.payload.hex(),
        "codeword_bits": int(res.codeword.size),
        "codeword_hex": np.packbits(res.codeword).tobytes().hex(),
        "watermarked_sha256": hashlib.sha256(encode_pgm(res.watermarked)).hexdigest(),
    }
    out = GOLDEN / "fixture_payload.json"
    out.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
