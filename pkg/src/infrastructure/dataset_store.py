"""
探测数据集、标签表与参数检查点的持久化。

容器格式（SliceSet 与检查点共用）：

    MAGIC (8 字节) | 头部长度 (uint64, 小端) | 头部 JSON (UTF-8, 键排序) | 载荷

SliceSet 载荷依次为：X (k·r·r 个 float64, 行优先) | M (k·r·r 个 0/1 字节) |
ℓ, Δ, q (各 k 个 float64)。检查点载荷为按头部 tensors 列表顺序拼接的 float64 张量。
所有数值均按小端序写出；头部记录载荷的 SHA-256，读取时校验。
"""

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np

from .logger import get_logger
from ..domain.labels.performance import LabelTable
from ..domain.model.network import GeoPASNetwork, ModelSpec
from ..domain.probing.slicer import Provenance, Slice, SliceSet
from ..utils.exceptions import SerializationError

logger = get_logger(__name__)

SLICESET_MAGIC = b"GPSLICE\n"
CHECKPOINT_MAGIC = b"GPCKPT1\n"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
SLICESET_SUFFIX = ".slices"
_F64 = np.dtype("<f8")
_U8 = np.dtype("u1")

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# 容器
# ---------------------------------------------------------------------------

def _canonical(header: Dict[str, Any]) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _pack(magic: bytes, header: Dict[str, Any], payload: bytes) -> bytes:
    header = dict(header, payload_sha256=hashlib.sha256(payload).hexdigest())
    blob = _canonical(header)
    return magic + struct.pack("<Q", len(blob)) + blob + payload


def _unpack(magic: bytes, data: bytes, source: str) -> Tuple[Dict[str, Any], bytes]:
    if not data.startswith(magic):
        raise SerializationError(f"{source}: not a {magic.strip().decode()} container")
    offset = len(magic)
    if len(data) < offset + 8:
        raise SerializationError(f"{source}: truncated header")
    (length,) = struct.unpack("<Q", data[offset:offset + 8])
    offset += 8
    try:
        header = json.loads(data[offset:offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SerializationError(f"{source}: corrupted header ({e})")
    payload = data[offset + length:]
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise SerializationError(f"{source}: format version {version!r}, expected {FORMAT_VERSION}")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise SerializationError(f"{source}: payload checksum mismatch")
    return header, payload


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise SerializationError(f"cannot read {path}: {e}")


def _write_bytes(path: PathLike, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


# ---------------------------------------------------------------------------
# SliceSet
# ---------------------------------------------------------------------------

def encode_slice_set(slice_set: SliceSet) -> bytes:
    """把 SliceSet 编码为字节容器。"""
    k, r = slice_set.k, slice_set.resolution
    values = np.stack([s.values for s in slice_set.slices]).astype(_F64, copy=False)
    masks = np.stack([s.mask for s in slice_set.slices]).astype(_U8, copy=False)
    side = np.array([[s.scale for s in slice_set.slices],
                     [s.value_range for s in slice_set.slices],
                     [s.iqr for s in slice_set.slices]], dtype=_F64)
    payload = (np.ascontiguousarray(values).tobytes() + np.ascontiguousarray(masks).tobytes()
               + np.ascontiguousarray(side).tobytes())
    prov = slice_set.provenance
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "sliceset",
        "dimension": int(slice_set.dimension),
        "k": int(k),
        "r": int(r),
        "provenance": None if prov is None else list(prov.as_tuple()),
        "evaluations": int(slice_set.evaluations),
        "seed": None if slice_set.seed is None else int(slice_set.seed),
    }
    return _pack(SLICESET_MAGIC, header, payload)


def decode_slice_set(data: bytes, source: str = "<bytes>") -> SliceSet:
    header, payload = _unpack(SLICESET_MAGIC, data, source)
    try:
        k, r = int(header["k"]), int(header["r"])
        cells = k * r * r
        expected = cells * _F64.itemsize + cells * _U8.itemsize + 3 * k * _F64.itemsize
        if len(payload) != expected:
            raise SerializationError(f"{source}: payload has {len(payload)} bytes, expected {expected}")
        offset = 0
        values = np.frombuffer(payload, dtype=_F64, count=cells, offset=offset).reshape(k, r, r)
        offset += cells * _F64.itemsize
        masks = np.frombuffer(payload, dtype=_U8, count=cells, offset=offset).reshape(k, r, r)
        offset += cells
        side = np.frombuffer(payload, dtype=_F64, count=3 * k, offset=offset).reshape(3, k)
        slices = [Slice(values=values[j].astype(np.float64), mask=masks[j].copy(),
                        scale=float(side[0, j]), value_range=float(side[1, j]), iqr=float(side[2, j]))
                  for j in range(k)]
        prov = header.get("provenance")
        return SliceSet(slices=slices, dimension=int(header["dimension"]),
                        provenance=None if prov is None else Provenance(*(int(v) for v in prov)),
                        evaluations=int(header.get("evaluations", 0)), seed=header.get("seed"))
    except (KeyError, TypeError, ValueError) as e:
        raise SerializationError(f"{source}: malformed SliceSet header ({e})")


def save_slice_set(slice_set: SliceSet, path: PathLike) -> str:
    """写出 SliceSet 并返回文件的 SHA-256。"""
    data = encode_slice_set(slice_set)
    _write_bytes(path, data)
    return hashlib.sha256(data).hexdigest()


def load_slice_set(path: PathLike) -> SliceSet:
    return decode_slice_set(_read_bytes(path), source=str(path))


def slice_set_filename(function_id: int, dimension: int, instance_id: int, repetition: int) -> str:
    return f"f{function_id:02d}_d{dimension:02d}_i{instance_id:02d}_r{repetition:02d}{SLICESET_SUFFIX}"


# ---------------------------------------------------------------------------
# 清单
# ---------------------------------------------------------------------------

def write_json(data: Any, path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: PathLike) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise SerializationError(f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise SerializationError(f"{path}: invalid JSON ({e})")


def build_manifest(config_hash: str, entries: Iterable[Dict[str, Any]], k: int, r: int,
                   settings: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """数据集清单：计数、种子、评估次数与每个文件的校验和。"""
    entries = sorted(entries, key=lambda e: e["file"])
    return {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "k": int(k),
        "r": int(r),
        "count": len(entries),
        "total_evaluations": int(sum(e["evaluations"] for e in entries)),
        "settings": settings or {},
        "files": entries,
    }


def write_manifest(manifest: Dict[str, Any], directory: PathLike) -> Path:
    path = Path(directory) / MANIFEST_NAME
    write_json(manifest, path)
    return path


def read_manifest(directory: PathLike) -> Dict[str, Any]:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise SerializationError(f"no dataset manifest in {directory}")
    manifest = read_json(path)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise SerializationError(f"{path}: format version {manifest.get('format_version')!r}, "
                                 f"expected {FORMAT_VERSION}")
    return manifest


def load_dataset(directory: PathLike, manifest: Optional[Dict[str, Any]] = None
                 ) -> Dict[Tuple[int, int, int, int], SliceSet]:
    """按清单读取全部 SliceSet，以 (f, d, i, rep) 为键。"""
    manifest = manifest or read_manifest(directory)
    dataset = {}
    for entry in manifest["files"]:
        slice_set = load_slice_set(Path(directory) / entry["file"])
        key = tuple(int(v) for v in entry["datapoint"])
        if slice_set.provenance is not None and slice_set.provenance.as_tuple() != key:
            raise SerializationError(f"{entry['file']}: provenance {slice_set.provenance.as_tuple()} "
                                     f"does not match manifest entry {key}")
        dataset[key] = slice_set
    logger.info(f"Loaded {len(dataset)} SliceSets from {directory}")
    return dataset


# ---------------------------------------------------------------------------
# 标签表
# ---------------------------------------------------------------------------

def save_label_table(table: LabelTable, path: PathLike):
    write_json({"format_version": FORMAT_VERSION, "labels": table.to_dict()}, path)


def load_label_table(path: PathLike) -> LabelTable:
    data = read_json(path)
    if data.get("format_version") != FORMAT_VERSION:
        raise SerializationError(f"{path}: format version {data.get('format_version')!r}, "
                                 f"expected {FORMAT_VERSION}")
    try:
        return LabelTable.from_dict(data["labels"])
    except (KeyError, TypeError, ValueError) as e:
        raise SerializationError(f"{path}: malformed label table ({e})")


# ---------------------------------------------------------------------------
# 检查点
# ---------------------------------------------------------------------------

def _to_json(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return {"__ndarray__": value.tolist(), "dtype": value.dtype.str}
    if isinstance(value, dict):
        return {k: _to_json(v) for k, v in value.items()}
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def _from_json(value: Any) -> Any:
    if isinstance(value, dict):
        if "__ndarray__" in value:
            return np.array(value["__ndarray__"], dtype=np.dtype(value["dtype"]))
        return {k: _from_json(v) for k, v in value.items()}
    return value


def encode_checkpoint(params: Mapping[str, np.ndarray], spec: Optional[ModelSpec] = None,
                      rng_state: Optional[Dict[str, Any]] = None,
                      metadata: Optional[Dict[str, Any]] = None) -> bytes:
    names = sorted(params)
    tensors = [{"name": n, "shape": list(params[n].shape)} for n in names]
    payload = b"".join(np.ascontiguousarray(params[n], dtype=_F64).tobytes() for n in names)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "tensors": tensors,
        "spec": None if spec is None else {
            "num_algorithms": spec.num_algorithms, "resolution": spec.resolution, "k": spec.k,
            "dropout_rate": spec.dropout_rate, "disable_side": spec.disable_side,
            "disable_dimension": spec.disable_dimension, "disable_catastrophe": spec.disable_catastrophe,
        },
        "rng_state": _to_json(rng_state),
        "metadata": metadata or {},
    }
    return _pack(CHECKPOINT_MAGIC, header, payload)


def decode_checkpoint(data: bytes, source: str = "<bytes>"
                      ) -> Tuple[Dict[str, np.ndarray], Optional[ModelSpec], Optional[Dict[str, Any]], Dict]:
    """返回 (params, spec, rng_state, metadata)。"""
    header, payload = _unpack(CHECKPOINT_MAGIC, data, source)
    params: Dict[str, np.ndarray] = {}
    offset = 0
    try:
        for t in header["tensors"]:
            shape = tuple(int(s) for s in t["shape"])
            count = int(np.prod(shape)) if shape else 1
            if offset + count * _F64.itemsize > len(payload):
                raise SerializationError(f"{source}: payload too short for tensor '{t['name']}'")
            params[t["name"]] = np.frombuffer(payload, dtype=_F64, count=count,
                                              offset=offset).reshape(shape).astype(np.float64)
            offset += count * _F64.itemsize
        if offset != len(payload):
            raise SerializationError(f"{source}: {len(payload) - offset} trailing payload bytes")
        spec = None if header.get("spec") is None else ModelSpec(**header["spec"])
    except (KeyError, TypeError, ValueError) as e:
        raise SerializationError(f"{source}: malformed checkpoint header ({e})")
    return params, spec, _from_json(header.get("rng_state")), header.get("metadata", {})


def save_checkpoint(network: GeoPASNetwork, path: PathLike, rng: Optional[np.random.Generator] = None,
                    metadata: Optional[Dict[str, Any]] = None):
    state = None if rng is None else rng.bit_generator.state
    _write_bytes(path, encode_checkpoint(network.params, network.spec, state, metadata))
    logger.debug(f"Checkpoint written: {path}")


def load_checkpoint(path: PathLike) -> Tuple[GeoPASNetwork, Optional[np.random.Generator], Dict]:
    """恢复网络；若保存了 RNG 状态则同时恢复生成器。"""
    params, spec, rng_state, metadata = decode_checkpoint(_read_bytes(path), source=str(path))
    if spec is None:
        raise SerializationError(f"{path}: checkpoint has no model spec")
    rng = None
    if rng_state is not None:
        try:
            bit_generator = getattr(np.random, rng_state["bit_generator"])()
            bit_generator.state = rng_state
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise SerializationError(f"{path}: cannot restore RNG state ({e})")
        rng = np.random.Generator(bit_generator)
    return GeoPASNetwork(spec, params), rng, metadata
