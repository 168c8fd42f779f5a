"""Dataset generation, normalization, and the binary record format.

A dataset file is a fixed header followed by record-major samples:

    header: magic "TSPC", version u32, n_s u32, count u64, snr_db f64,
            norm_min f64, norm_max f64, sha256(gen config) 32 bytes
    record: input (2, n_s) f32, label (2, n_s) f32, occupancy bit-packed

All integers/floats little-endian. Values are min-max normalized to
[0, 1] with a single (min, max) taken over the real/imag values of the
training split and applied unchanged to validation/test (which may
therefore fall slightly outside [0, 1]; nothing is clipped). A JSON
sidecar mirrors the header plus the full generation config.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DataFormatError
from .representation import denormalize as _denorm
from .representation import to_channels
from .siggen import GenConfig, generate_sample

MAGIC = b"TSPC"
VERSION = 1
_HEADER = struct.Struct("<4sIIQddd32s")


@dataclass
class DatasetHeader:
    version: int
    n_s: int
    count: int
    snr_db: float
    norm_min: float
    norm_max: float
    gen_config_digest: str   # hex

    @property
    def norm(self) -> tuple[float, float]:
        return (self.norm_min, self.norm_max)


@dataclass
class Record:
    input: np.ndarray       # (2, n_s) f32, normalized noisy spectrum
    label: np.ndarray       # (2, n_s) f32, normalized clean spectrum
    occupancy: np.ndarray   # (n_s,) bool


def config_digest(cfg: GenConfig) -> bytes:
    """sha256 over the canonical JSON of the generation config."""
    payload = json.dumps(dataclasses.asdict(cfg), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).digest()


def _record_size(n_s: int) -> int:
    return 2 * 2 * n_s * 4 + (n_s + 7) // 8


def _draw_split(cfg: GenConfig, count: int, seed_seq: np.random.SeedSequence):
    inputs = np.empty((count, 2, cfg.n_s), dtype=np.float32)
    labels = np.empty((count, 2, cfg.n_s), dtype=np.float32)
    occupancy = np.empty((count, cfg.n_s), dtype=bool)
    for i, child in enumerate(seed_seq.spawn(count)):
        sample = generate_sample(cfg, np.random.default_rng(child))
        inputs[i] = to_channels(sample.noisy_spectrum)
        labels[i] = to_channels(sample.clean_spectrum)
        occupancy[i] = sample.occupancy.bits
    return inputs, labels, occupancy


def _write_file(path, cfg: GenConfig, header: DatasetHeader,
                inputs: np.ndarray, labels: np.ndarray, occupancy: np.ndarray):
    digest = bytes.fromhex(header.gen_config_digest)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, header.version, header.n_s, header.count,
                              header.snr_db, header.norm_min, header.norm_max, digest))
        for i in range(header.count):
            fh.write(np.ascontiguousarray(inputs[i], dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(labels[i], dtype="<f4").tobytes())
            fh.write(np.packbits(occupancy[i], bitorder="little").tobytes())
    sidecar = dict(magic=MAGIC.decode(), version=header.version, n_s=header.n_s,
                   count=header.count, snr_db=header.snr_db,
                   norm_min=header.norm_min, norm_max=header.norm_max,
                   gen_config_digest=header.gen_config_digest,
                   gen_config=dataclasses.asdict(cfg))
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def generate_dataset(cfg: GenConfig, counts: tuple[int, int, int], seed: int,
                     out_paths: tuple) -> list[DatasetHeader]:
    """Generate train/val/test files with shared training-split normalization.

    Sampling splits a master seed into one stream per sample, so the
    output is byte-identical for identical (cfg, counts, seed) and
    independent of generation order.
    """
    if len(counts) != 3 or len(out_paths) != 3:
        raise ConfigurationError("counts and out_paths must name train, val, test")
    if any(c < 1 for c in counts):
        raise ConfigurationError(f"split counts must be >= 1, got {counts}")

    master = np.random.SeedSequence(seed)
    split_seeds = master.spawn(3)
    splits = [_draw_split(cfg, count, ss) for count, ss in zip(counts, split_seeds)]

    train_inputs, train_labels, _ = splits[0]
    lo = float(min(train_inputs.min(), train_labels.min()))
    hi = float(max(train_inputs.max(), train_labels.max()))
    if not lo < hi:
        raise ConfigurationError(f"degenerate normalization range [{lo}, {hi}]")

    digest_hex = config_digest(cfg).hex()
    headers = []
    for (inputs, labels, occupancy), count, path in zip(splits, counts, out_paths):
        norm_inputs = ((inputs.astype(np.float64) - lo) / (hi - lo)).astype(np.float32)
        norm_labels = ((labels.astype(np.float64) - lo) / (hi - lo)).astype(np.float32)
        header = DatasetHeader(version=VERSION, n_s=cfg.n_s, count=count,
                               snr_db=cfg.snr_db, norm_min=lo, norm_max=hi,
                               gen_config_digest=digest_hex)
        _write_file(path, cfg, header, norm_inputs, norm_labels, occupancy)
        headers.append(header)
    return headers


def _read_header(fh, path) -> DatasetHeader:
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise DataFormatError(
            f"{path}: truncated header, {len(raw)} of {_HEADER.size} bytes at offset 0"
        )
    magic, version, n_s, count, snr_db, lo, hi, digest = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version} (expected {VERSION})")
    return DatasetHeader(version=version, n_s=n_s, count=count, snr_db=snr_db,
                         norm_min=lo, norm_max=hi, gen_config_digest=digest.hex())


def load_dataset(path):
    """Open a dataset file; returns (header, record iterator).

    The iterator streams one `Record` at a time. File length is validated
    up front so truncation is reported as expected-vs-actual record counts
    rather than a mid-iteration surprise.
    """
    fh = open(path, "rb")
    try:
        header = _read_header(fh, path)
    except Exception:
        fh.close()
        raise
    fh.seek(0, 2)
    body = fh.tell() - _HEADER.size
    rec_size = _record_size(header.n_s)
    if body != header.count * rec_size:
        actual = body // rec_size
        fh.close()
        raise DataFormatError(
            f"{path}: expected {header.count} records, found {actual} "
            f"(body is {body} bytes, record size {rec_size})"
        )
    fh.seek(_HEADER.size)

    def records():
        plane = 2 * header.n_s
        occ_bytes = (header.n_s + 7) // 8
        with fh:
            for _ in range(header.count):
                arr = np.frombuffer(fh.read(2 * plane * 4), dtype="<f4")
                occ = np.unpackbits(
                    np.frombuffer(fh.read(occ_bytes), dtype=np.uint8),
                    bitorder="little", count=header.n_s).astype(bool)
                yield Record(input=arr[:plane].reshape(2, header.n_s).copy(),
                             label=arr[plane:].reshape(2, header.n_s).copy(),
                             occupancy=occ)

    return header, records()


def load_arrays(path):
    """Materialize a dataset file as (header, inputs, labels, occupancy) arrays."""
    header, records = load_dataset(path)
    inputs = np.empty((header.count, 2, header.n_s), dtype=np.float32)
    labels = np.empty((header.count, 2, header.n_s), dtype=np.float32)
    occupancy = np.empty((header.count, header.n_s), dtype=bool)
    for i, rec in enumerate(records):
        inputs[i] = rec.input
        labels[i] = rec.label
        occupancy[i] = rec.occupancy
    return header, inputs, labels, occupancy


def denormalize(values: np.ndarray, header: DatasetHeader) -> np.ndarray:
    """Map stored [0, 1]-scale values back to physical scale."""
    return _denorm(values, header.norm_min, header.norm_max)
