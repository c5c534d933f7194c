import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sealmark import authcrypto
from sealmark.imagecore import GrayImage, load_image
from sealmark.protocol import SystemParams

ROOT = Path(__file__).resolve().parents[1]
CORPUS_DIR = ROOT / "data" / "corpus"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus_paths() -> list[Path]:
    paths = sorted(CORPUS_DIR.glob("*.pgm"))
    if len(paths) < 10:
        pytest.fail(f"fixture corpus missing under {CORPUS_DIR}; run scripts/make_corpus.py")
    return paths


@pytest.fixture(scope="session")
def corpus(corpus_paths) -> dict[str, GrayImage]:
    return {p.stem: load_image(p) for p in corpus_paths}


@pytest.fixture(scope="session")
def fixture_image() -> GrayImage:
    return load_image(GOLDEN_DIR / "fixture.pgm")


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads((GOLDEN_DIR / "fixture_payload.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def rsa_keys() -> authcrypto.KeyPair:
    return authcrypto.keygen(authcrypto.RSA_SCHEME, seed=7)


@pytest.fixture(scope="session")
def stub_keys() -> authcrypto.KeyPair:
    return authcrypto.keygen(authcrypto.STUB_SCHEME, seed=1)


@pytest.fixture(scope="session")
def stub_params() -> SystemParams:
    return SystemParams(scheme=authcrypto.STUB_SCHEME)


@pytest.fixture(scope="session")
def marked_fixture(fixture_image, stub_keys, stub_params):
    from sealmark.protocol import embed

    return embed(fixture_image, stub_keys.secret, stub_params)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
