"""Desk-scale robustness and quality experiments.

Each runner returns a list of :class:`ExperimentRecord`; :func:`write_csv`
stores them with the fixed header below. Per-image rows carry the image stem,
aggregate rows use ``ALL``.

=============  ==============================================  ===========
experiment     cell                                            metrics
=============  ==============================================  ===========
quality        (image, delta, gamma)                           PSNR, SSIM
ber-uncoded    (image, gamma, quality)                         BER
ber-ldpc       (image, gamma, quality)                         BER
tpr            (delta, quality)                                TPR, space_savings
tnr            (delta, a0)                                     TNR
=============  ==============================================  ===========
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import authcrypto, ecc
from .errors import CodecUnavailable, ConfigError, EmptyCorpus, RegionTooLarge
from .imagecore import GrayImage, jpeg_codec, load_image
from .metrics import psnr, ssim
from .protocol import SystemParams, authenticate, embed, with_overrides
from .wavelet import hwt_forward, qim_extract, qim_residuals

log = logging.getLogger(__name__)

CSV_HEADER = ("experiment", "image", "delta", "gamma", "quality", "a0", "metric", "value", "trials")
EXPERIMENTS = ("quality", "ber", "tpr", "tnr")

__all__ = [
    "ExperimentConfig",
    "ExperimentRecord",
    "jpeg_roundtrip",
    "psnr",
    "run_ber_sweep",
    "run_quality_sweep",
    "run_tnr_experiment",
    "run_tpr_experiment",
    "ssim",
    "tamper",
    "write_csv",
]


@dataclass(frozen=True)
class JpegResult:
    image: GrayImage
    raw_bytes: int
    compressed_bytes: int

    @property
    def space_savings(self) -> float:
        """Compressed-to-raw size ratio."""
        return self.compressed_bytes / self.raw_bytes


@dataclass(frozen=True)
class TamperResult:
    image: GrayImage
    region: tuple[int, int, int]  # (x, y, side)


def jpeg_roundtrip(img: GrayImage, quality: int, codec=None) -> JpegResult:
    if not 1 <= int(quality) <= 100:
        raise ValueError(f"JPEG quality must be in [1, 100], got {quality}")
    codec = codec or jpeg_codec()
    data = codec.encode(img, int(quality))
    out = codec.decode_bytes(data)
    if out.shape != img.shape:
        raise CodecUnavailable(f"codec {codec.name} changed the geometry {img.shape} -> {out.shape}")
    return JpegResult(out, img.width * img.height, len(data))


def tamper(img: GrayImage, a0: int, seed) -> TamperResult:
    """Overwrite one uniformly placed ``a0`` x ``a0`` square with uniform noise."""
    if a0 < 1 or a0 > min(img.width, img.height):
        raise RegionTooLarge(f"{a0}x{a0} region does not fit a {img.width}x{img.height} image")
    rng = np.random.default_rng(seed)
    y = int(rng.integers(0, img.height - a0 + 1))
    x = int(rng.integers(0, img.width - a0 + 1))
    px = img.pixels.copy()
    px[y : y + a0, x : x + a0] = rng.integers(0, 256, size=(a0, a0), dtype=np.uint8)
    return TamperResult(GrayImage(px), (x, y, a0))


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    image: str
    metric: str
    value: float
    trials: int
    delta: float | None = None
    gamma: float | None = None
    quality: int | None = None
    a0: int | None = None

    def row(self) -> list[str]:
        def fmt(v):
            return "" if v is None else repr(v) if isinstance(v, float) else str(v)

        return [fmt(getattr(self, name)) for name in CSV_HEADER]


@dataclass
class ExperimentConfig:
    corpus: list[str]
    experiments: list[str] = field(default_factory=lambda: list(EXPERIMENTS))
    deltas: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0])
    gammas: list[float] = field(default_factory=lambda: [4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 30.0, 40.0])
    qualities: list[int] = field(default_factory=lambda: [100, 95, 90, 85, 80, 70, 60, 50])
    a0s: list[int] = field(default_factory=lambda: [2, 4, 8, 16, 32])
    trials: int = 50
    seed: int = 0
    # operating point held fixed while the other axis is swept
    delta: float = 2.0
    gamma: float = 10.0
    key_seed: int = 0
    scheme: str = authcrypto.RSA_SCHEME
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        # an empty corpus is reported by the runners as EmptyCorpus
        for name in ("experiments", "deltas", "gammas", "qualities", "a0s"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must be a non-empty list")
        unknown = set(self.experiments) - set(EXPERIMENTS)
        if unknown:
            raise ConfigError(f"unknown experiments {sorted(unknown)}; choose from {EXPERIMENTS}")

    @classmethod
    def from_dict(cls, raw: dict, base: Path | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "corpus" not in raw:
            raise ConfigError("config needs a 'corpus' list")
        raw = dict(raw)
        corpus = raw["corpus"]
        if isinstance(corpus, str):
            corpus = [corpus]
        if not isinstance(corpus, list):
            raise ConfigError("corpus must be a list of paths or globs")
        raw["corpus"] = _expand_corpus(corpus, base)
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw, path.parent)

    def system_params(self, **overrides) -> SystemParams:
        try:
            base = SystemParams(scheme=self.scheme, **self.params)
        except TypeError as exc:
            raise ConfigError(f"bad params block: {exc}") from exc
        return with_overrides(base, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)


def _expand_corpus(entries: list[str], base: Path | None) -> list[str]:
    out = []
    for entry in entries:
        p = Path(entry)
        if not p.is_absolute() and base is not None:
            p = base / p
        if any(ch in str(p) for ch in "*?["):
            out.extend(sorted(str(m) for m in p.parent.glob(p.name)))
        else:
            out.append(str(p))
    return out


class _Corpus:
    """Loads images once and caches embeddings per parameter set."""

    def __init__(self, cfg: ExperimentConfig):
        if not cfg.corpus:
            raise EmptyCorpus("no corpus images configured")
        self.cfg = cfg
        self.images = [(Path(p).stem, load_image(p)) for p in cfg.corpus]
        if not self.images:
            raise EmptyCorpus("corpus glob matched no images")
        self.keys = authcrypto.keygen(cfg.scheme, seed=cfg.key_seed)
        self._marked: dict = {}
        self.embed_seconds: list[float] = []

    def marked(self, idx: int, params: SystemParams):
        key = (idx, params)
        if key not in self._marked:
            start = time.perf_counter()
            self._marked[key] = embed(self.images[idx][1], self.keys.secret, params, self_check=False)
            self.embed_seconds.append(time.perf_counter() - start)
        return self._marked[key]


def _mean(values) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


def run_quality_sweep(cfg: ExperimentConfig, corpus: _Corpus | None = None) -> list[ExperimentRecord]:
    corpus = corpus or _Corpus(cfg)
    records = []
    for delta in cfg.deltas:
        for gamma in cfg.gammas:
            params = cfg.system_params(delta=float(delta), gamma=float(gamma))
            ps, ss = [], []
            for idx, (name, _) in enumerate(corpus.images):
                rep = corpus.marked(idx, params).report
                ps.append(rep["psnr"])
                ss.append(rep["ssim"])
                records.append(ExperimentRecord("quality", name, "PSNR", rep["psnr"], 1, delta=float(delta), gamma=float(gamma)))
                records.append(ExperimentRecord("quality", name, "SSIM", rep["ssim"], 1, delta=float(delta), gamma=float(gamma)))
            n = len(corpus.images)
            records.append(ExperimentRecord("quality", "ALL", "PSNR", _mean(ps), n, delta=float(delta), gamma=float(gamma)))
            records.append(ExperimentRecord("quality", "ALL", "SSIM", _mean(ss), n, delta=float(delta), gamma=float(gamma)))
    return records


def run_ber_sweep(cfg: ExperimentConfig, corpus: _Corpus | None = None) -> list[ExperimentRecord]:
    """Channel BER before decoding (what an uncoded mark would see) and message BER after LDPC."""
    corpus = corpus or _Corpus(cfg)
    codec = jpeg_codec()
    records = []
    for gamma in cfg.gammas:
        params = cfg.system_params(delta=float(cfg.delta), gamma=float(gamma))
        code = params.code()
        for q in cfg.qualities:
            raw_all, dec_all = [], []
            for idx, (name, _) in enumerate(corpus.images):
                res = corpus.marked(idx, params)
                received = jpeg_roundtrip(res.watermarked, q, codec).image
                pyr = hwt_forward(received, 3)
                bits = qim_extract(pyr, params.gamma)
                raw = float(np.mean(bits != res.codeword))
                if params.llr == "soft":
                    llr = ecc.soft_llr(qim_residuals(pyr, params.gamma), params.gamma)
                else:
                    llr = ecc.hard_llr(bits)
                dec = ecc.ldpc_decode(code, llr)
                post = float(np.mean(dec.msg != res.payload.bits))
                raw_all.append(raw)
                dec_all.append(post)
                cell = dict(gamma=float(gamma), quality=int(q), delta=float(cfg.delta))
                records.append(ExperimentRecord("ber-uncoded", name, "BER", raw, 1, **cell))
                records.append(ExperimentRecord("ber-ldpc", name, "BER", post, 1, **cell))
            n = len(corpus.images)
            cell = dict(gamma=float(gamma), quality=int(q), delta=float(cfg.delta))
            records.append(ExperimentRecord("ber-uncoded", "ALL", "BER", _mean(raw_all), n, **cell))
            records.append(ExperimentRecord("ber-ldpc", "ALL", "BER", _mean(dec_all), n, **cell))
    return records


def run_tpr_experiment(cfg: ExperimentConfig, corpus: _Corpus | None = None) -> list[ExperimentRecord]:
    """Fraction of compressed, untampered marked images that still verify."""
    corpus = corpus or _Corpus(cfg)
    codec = jpeg_codec()
    records = []
    for delta in cfg.deltas:
        params = cfg.system_params(delta=float(delta), gamma=float(cfg.gamma))
        for q in cfg.qualities:
            accepted, savings = 0, []
            for idx, _ in enumerate(corpus.images):
                res = corpus.marked(idx, params)
                jr = jpeg_roundtrip(res.watermarked, q, codec)
                savings.append(jr.space_savings)
                accepted += authenticate(jr.image, corpus.keys.public, params).authentic
            n = len(corpus.images)
            cell = dict(delta=float(delta), gamma=float(cfg.gamma), quality=int(q))
            records.append(ExperimentRecord("tpr", "ALL", "TPR", accepted / n, n, **cell))
            records.append(ExperimentRecord("tpr", "ALL", "space_savings", _mean(savings), n, **cell))
    return records


def trial_seed(seed: int, *cell: int) -> np.random.SeedSequence:
    """Independent RNG stream for one trial, keyed by (seed, cell indices, trial)."""
    return np.random.SeedSequence([int(seed), *[int(c) for c in cell]])


def run_tnr_experiment(cfg: ExperimentConfig, corpus: _Corpus | None = None) -> list[ExperimentRecord]:
    """Fraction of randomly tampered marked images that are rejected."""
    corpus = corpus or _Corpus(cfg)
    records = []
    n_img = len(corpus.images)
    for di, delta in enumerate(cfg.deltas):
        params = cfg.system_params(delta=float(delta), gamma=float(cfg.gamma))
        for ai, a0 in enumerate(cfg.a0s):
            rejected = 0
            for t in range(cfg.trials):
                idx = t % n_img
                marked = corpus.marked(idx, params).watermarked
                tampered = tamper(marked, int(a0), trial_seed(cfg.seed, di, ai, t)).image
                rejected += not authenticate(tampered, corpus.keys.public, params).authentic
            cell = dict(delta=float(delta), gamma=float(cfg.gamma), a0=int(a0))
            records.append(ExperimentRecord("tnr", "ALL", "TNR", rejected / cfg.trials, cfg.trials, **cell))
    return records


RUNNERS = {
    "quality": run_quality_sweep,
    "ber": run_ber_sweep,
    "tpr": run_tpr_experiment,
    "tnr": run_tnr_experiment,
}


def run_all(cfg: ExperimentConfig) -> tuple[dict[str, list[ExperimentRecord]], dict]:
    corpus = _Corpus(cfg)
    results = {}
    for name in cfg.experiments:
        start = time.perf_counter()
        results[name] = RUNNERS[name](cfg, corpus)
        log.info("%s: %d records in %.1f s", name, len(results[name]), time.perf_counter() - start)
    timing = {
        "embeds": len(corpus.embed_seconds),
        "embed_seconds_mean": _mean(corpus.embed_seconds),
    }
    return results, timing


def records_to_csv(records: list[ExperimentRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def write_csv(records: list[ExperimentRecord], path: str | Path) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8", newline="")
