"""File formats: VOL1 volumes, CSV tables, strict JSON run configs, checkpoints.

VOL1 layout (all integers little-endian)::

    b"VOL1" | dtype code u8 | ndim u8 | ndim x u64 extents | row-major payload

dtype codes: 1 = float32, 2 = uint8, 3 = float64.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gabor import PARAM_NAMES, KernelBank
from .harness.data import AugmentConfig, Dataset
from .harness.optim import LR_PRESETS
from .harness.simulation import SimConfig
from .losses import LossConfig
from .segnet import NetworkConfig, SegNet

MAGIC = b"VOL1"
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("u1"), 3: np.dtype("<f8")}
_CODE_OF = {np.dtype("float32"): 1, np.dtype("uint8"): 2, np.dtype("float64"): 3}
CHECKPOINT_FORMAT = "gaborseg-checkpoint"
CHECKPOINT_VERSION = 1
BANK_FORMAT = "gaborseg-gabor-bank"


class FormatError(ValueError):
    """A file exists but its contents are not in the expected format."""


# VOL1 -----------------------------------------------------------------------

def vol1_header(shape, code):
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown VOL1 dtype code {code}")
    if len(shape) > 255:
        raise ValueError("VOL1 supports at most 255 dimensions")
    return MAGIC + struct.pack("<BB", code, len(shape)) + struct.pack(f"<{len(shape)}Q", *shape)


def encode_vol1(array, code=None) -> bytes:
    arr = np.asarray(getattr(array, "data", array))
    if code is None:
        if arr.dtype not in _CODE_OF:
            raise ValueError(f"no VOL1 dtype for {arr.dtype}; pass code=1, 2 or 3")
        code = _CODE_OF[arr.dtype]
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown VOL1 dtype code {code}")
    dt = DTYPE_CODES[code]
    if code == 2 and arr.size and (arr.min() < 0 or arr.max() > 255 or
                                   not np.array_equal(arr, np.round(arr))):
        raise ValueError("u8 VOL1 payload needs integer values in [0, 255]")
    payload = np.ascontiguousarray(arr, dtype=dt).tobytes()
    return vol1_header(arr.shape, code) + payload


def decode_vol1(buf: bytes) -> np.ndarray:
    if len(buf) < 6 or buf[:4] != MAGIC:
        raise FormatError("not a VOL1 file")
    code, ndim = struct.unpack_from("<BB", buf, 4)
    if code not in DTYPE_CODES:
        raise FormatError(f"unknown VOL1 dtype code {code}")
    head = 6 + 8 * ndim
    if len(buf) < head:
        raise FormatError("truncated VOL1 header")
    shape = struct.unpack_from(f"<{ndim}Q", buf, 6)
    dt = DTYPE_CODES[code]
    expected = math.prod(shape) * dt.itemsize
    if len(buf) - head != expected:
        raise FormatError(f"payload length mismatch: header implies {expected} bytes, "
                          f"found {len(buf) - head}")
    arr = np.frombuffer(buf, dtype=dt, offset=head, count=math.prod(shape)).reshape(shape)
    return arr.astype(dt.newbyteorder("="), copy=True)


def write_vol1(path, array, code=None):
    data = encode_vol1(array, code)
    with open(path, "wb") as fh:
        fh.write(data)


def read_vol1(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_vol1(fh.read())


# CSV --------------------------------------------------------------------------

def format_real(x) -> str:
    """9 significant digits without an exponent inside [1e-3, 1e6)."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    if 1e-3 <= abs(x) < 1e6:
        return np.format_float_positional(x, precision=9, unique=False, fractional=False,
                                          trim="-")
    return np.format_float_scientific(x, precision=8, unique=False, trim="-", exp_digits=1)


def write_csv(rows, schema, path=None):
    """Header line then one line per row, ``\\n`` newlines, UTF-8."""
    schema = tuple(schema)
    lines = []
    for i, row in enumerate(rows):
        row = tuple(row)
        if len(row) != len(schema):
            raise ValueError(f"row {i} has {len(row)} fields, schema {schema} has {len(schema)}")
        lines.append([v if isinstance(v, str) else format_real(v) for v in row])
    if path is None or path == "-":
        _write_rows(sys.stdout, schema, lines)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_rows(fh, schema, lines)


def _write_rows(fh, schema, lines):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(schema)
    w.writerows(lines)


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    return rows[0], rows[1:]


# JSON -------------------------------------------------------------------------

def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(obj, path=None):
    text = dumps_json(obj)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from None


def _reject_constant(name):
    raise FormatError(f"non-standard JSON constant {name}")


def _check_type(value, default, where):
    """Reject values whose JSON type cannot stand in for the field default."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, tuple):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ValueError(f"{where}: expected {type(default).__name__}, got {json.dumps(value)}")


def from_dict(cls, data, where):
    """Build dataclass ``cls`` from ``data``, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected an object, got {json.dumps(data)}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ValueError(f"{where}: unknown key(s) {unknown}; allowed {sorted(names)}")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        if f.default is not dataclasses.MISSING:
            _check_type(value, f.default, f"{where}.{key}")
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{where}: {e}") from None


def to_dict(obj):
    d = dataclasses.asdict(obj)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass(frozen=True)
class Seeds:
    model: int
    data: int
    train: int

    def __post_init__(self):
        for name in ("model", "data", "train"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"seed {name!r} must be a non-negative integer")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch: int = 2
    split: tuple = (12, 2, 6)
    augment: bool = True

    def __post_init__(self):
        object.__setattr__(self, "split", tuple(self.split))
        if self.epochs < 0 or self.batch < 1:
            raise ValueError("epochs must be >= 0 and batch >= 1")
        if len(self.split) != 3 or min(self.split) < 0 or self.split[0] < 1:
            raise ValueError("split must be [n_train >= 1, n_val >= 0, n_test >= 0]")


@dataclass
class RunConfig:
    seeds: Seeds
    network: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    lr_preset: str = "1e-3"

    def __post_init__(self):
        if self.lr_preset not in LR_PRESETS:
            raise ValueError(f"lr_preset must be one of {sorted(LR_PRESETS)}, "
                             f"got {self.lr_preset!r}")

    @property
    def lr(self):
        return LR_PRESETS[self.lr_preset]

    def to_dict(self):
        return {
            "seeds": to_dict(self.seeds),
            "network": self.network.to_dict(),
            "loss": to_dict(self.loss),
            "augment": to_dict(self.augment),
            "sim": to_dict(self.sim),
            "training": to_dict(self.training),
            "lr_preset": self.lr_preset,
        }


_SECTIONS = {"network": NetworkConfig, "loss": LossConfig, "augment": AugmentConfig,
             "sim": SimConfig, "training": TrainConfig}


def parse_run_config(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ValueError("run config must be a JSON object")
    allowed = {"seeds", "lr_preset"} | set(_SECTIONS)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"config: unknown key(s) {unknown}; allowed {sorted(allowed)}")
    if "seeds" not in data:
        raise ValueError("config: 'seeds' is required (model, data, train)")
    seeds = data["seeds"]
    if not isinstance(seeds, dict) or set(seeds) != {"model", "data", "train"}:
        raise ValueError("config.seeds must give exactly the keys model, data, train")
    kwargs = {"seeds": from_dict(Seeds, seeds, "config.seeds")}
    for key, cls in _SECTIONS.items():
        if key in data:
            kwargs[key] = from_dict(cls, data[key], f"config.{key}")
    if "lr_preset" in data:
        if not isinstance(data["lr_preset"], str):
            raise ValueError("config.lr_preset must be a string such as \"1e-3\"")
        kwargs["lr_preset"] = data["lr_preset"]
    return RunConfig(**kwargs)


def load_run_config(path) -> RunConfig:
    return parse_run_config(read_json(path))


# Gabor banks --------------------------------------------------------------------

def bank_to_json(bank: KernelBank):
    return {
        "format": BANK_FORMAT, "version": 1,
        "c_out": bank.c_out, "c_in": bank.c_in, "k": bank.k,
        "param_names": list(PARAM_NAMES),
        "records": [[float(v) for v in row] for row in bank.records()],
    }


def bank_from_json(doc) -> KernelBank:
    if not isinstance(doc, dict) or doc.get("format") != BANK_FORMAT:
        raise FormatError("not a Gabor bank document")
    expected = {"format", "version", "c_out", "c_in", "k", "param_names", "records"}
    if set(doc) != expected:
        raise FormatError(f"Gabor bank keys must be exactly {sorted(expected)}")
    if doc["version"] != 1:
        raise FormatError(f"unsupported Gabor bank version {doc['version']}")
    if list(doc["param_names"]) != list(PARAM_NAMES):
        raise FormatError(f"param_names must be {list(PARAM_NAMES)}")
    c_out, c_in, k = doc["c_out"], doc["c_in"], doc["k"]
    recs = doc["records"]
    if len(recs) != c_out * c_in or any(len(r) != len(PARAM_NAMES) for r in recs):
        raise FormatError(f"expected {c_out * c_in} records of {len(PARAM_NAMES)} values")
    return KernelBank.from_records(recs, c_out, c_in, k)


# checkpoints --------------------------------------------------------------------

def _weights_path(path):
    return Path(path).with_suffix(".vol1")


def save_checkpoint(model: SegNet, path, extra=None):
    """``path`` (JSON: config and parameter index) plus a sibling ``.vol1``
    holding all parameters flattened into one float64 vector."""
    path = Path(path)
    index, chunks, offset = [], [], 0
    for name, arr in model.state_dict().items():
        index.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.reshape(-1))
        offset += arr.size
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    weights = _weights_path(path)
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION,
           "network": model.cfg.to_dict(), "weights": weights.name,
           "n_values": int(flat.size), "params": index}
    if extra:
        doc["extra"] = extra
    write_vol1(weights, flat)
    write_json(doc, path)


def load_checkpoint(path) -> SegNet:
    path = Path(path)
    doc = read_json(path)
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"{path}: not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    cfg = from_dict(NetworkConfig, doc["network"], "checkpoint.network")
    flat = read_vol1(path.parent / doc["weights"])
    if flat.ndim != 1 or flat.size != doc["n_values"]:
        raise FormatError(f"{path}: weight vector has {flat.size} values, "
                          f"index expects {doc['n_values']}")
    state = {}
    for p in doc["params"]:
        n = math.prod(p["shape"])
        state[p["name"]] = flat[p["offset"]:p["offset"] + n].reshape(p["shape"])
    model = SegNet(cfg, seed=0)
    model.load_state_dict(state)
    return model


# datasets -----------------------------------------------------------------------

def save_dataset(data: Dataset, directory, meta=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_vol1(d / "images.vol1", data.images)
    write_vol1(d / "labels.vol1", data.labels)
    write_json(dict(meta or {}, n_labels=data.n_labels, n_volumes=len(data)), d / "meta.json")


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"dataset directory {os.fspath(d)!r} does not exist")
    meta = read_json(d / "meta.json")
    images = read_vol1(d / "images.vol1").astype(np.float64)
    labels = read_vol1(d / "labels.vol1")
    if labels.dtype != np.uint8:
        raise FormatError("labels.vol1 must hold u8 labels")
    try:
        return Dataset(images, labels, int(meta["n_labels"]))
    except (KeyError, ValueError) as e:
        raise FormatError(f"{os.fspath(d)}: inconsistent dataset ({e})") from None
