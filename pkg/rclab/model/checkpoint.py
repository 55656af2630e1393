"""
rclab/model/checkpoint.py

    versioned binary checkpoint container

    layout::

        b"RCLAB-CKPT\\n"
        8 byte little-endian unsigned header length
        header: UTF-8 JSON with sorted keys (hyperparameters, vocab, parameter names and
                shapes, optimizer step, free-form run state)
        payload: little-endian float64 parameters in canonical order, followed by the
                 AdamW first and second moments when present

    Serialization is deterministic, so save -> load -> save reproduces the same bytes.
"""


from typing import Optional, Dict, Any
from dataclasses import dataclass, asdict, field
import os
import errno
import json
import struct

import numpy as np

from rclab.params import ModelHyper
from rclab.model.vocab import Vocab
from rclab.model.tinylm import ModelParams
from rclab.model.optim import OptState
from rclab.util import sha256_bytes


_MAGIC = b"RCLAB-CKPT\n"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParams
    vocab: Vocab
    opt_state: Optional[OptState] = None
    # run state (stage index, steps, seeds, best eval ...), must be JSON serializable
    state: Dict[str, Any] = field(default_factory=dict)


def _pack_tree(tree: Dict[str, np.ndarray]) -> bytes :
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in tree.values())


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes :
    """ serialize a checkpoint """
    params = ckpt.params
    header = {
        "format": "rclab.checkpoint",
        "version": FORMAT_VERSION,
        "hyper": asdict(params.hyper),
        "vocab": ckpt.vocab.tokens,
        "params": [[name, list(shape)] for name, shape in params.shapes().items()],
        "opt_step": None if ckpt.opt_state is None else ckpt.opt_state.step,
        "state": ckpt.state,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    payload = _pack_tree(params.weights)
    if ckpt.opt_state is not None:
        payload += _pack_tree(ckpt.opt_state.m) + _pack_tree(ckpt.opt_state.v)
    return _MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + payload


def checkpoint_from_bytes(data: bytes) -> Checkpoint :
    """ deserialize a checkpoint, raises ValueError on malformed input """
    if not data.startswith(_MAGIC):
        raise ValueError("checkpoint_from_bytes: not an rclab checkpoint (bad magic)")
    off = len(_MAGIC)
    if len(data) < off + 8:
        raise ValueError("checkpoint_from_bytes: truncated header length")
    (hlen,) = struct.unpack("<Q", data[off:off + 8])
    off += 8
    try:
        header = json.loads(data[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError("checkpoint_from_bytes: header is not valid JSON") from e
    off += hlen
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"checkpoint_from_bytes: unsupported version {header.get('version')}")
    shapes = [(name, tuple(shape)) for name, shape in header["params"]]
    n = sum(int(np.prod(s)) for _, s in shapes)
    has_moments = header["opt_step"] is not None
    expected = n * 8 * (3 if has_moments else 1)
    if len(data) - off != expected:
        raise ValueError(f"checkpoint_from_bytes: payload has {len(data) - off} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=off).astype(np.float64)

    def unpack(block):
        tree, i = {}, block * n
        for name, shape in shapes:
            size = int(np.prod(shape))
            tree[name] = flat[i:i + size].reshape(shape).copy()
            i += size
        return tree

    params = ModelParams(ModelHyper(**header["hyper"]), unpack(0))
    opt_state = OptState(int(header["opt_step"]), unpack(1), unpack(2)) if has_moments else None
    return Checkpoint(params, Vocab(header["vocab"]), opt_state, header["state"])


def save_checkpoint(path: str, ckpt: Checkpoint) -> str :
    """ write a checkpoint, returns the sha256 of the written bytes """
    data = checkpoint_to_bytes(ckpt)
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
    return sha256_bytes(data)


def load_checkpoint(path: str) -> Checkpoint :
    """ read a checkpoint written by save_checkpoint """
    if not os.path.isfile(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), path)
    with open(path, "rb") as f:
        return checkpoint_from_bytes(f.read())
