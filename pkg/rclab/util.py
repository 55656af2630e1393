"""
rclab/util.py

    module with general utilities: debug message dispatch, seed derivation, hashing
    and NDJSON helpers shared by the rest of the package
"""


import os
import errno
import json
import hashlib
from typing import Optional, Callable, Any, Dict, List, Iterable, Iterator

from rclab.typing import NdjsonFilePath


INCLUDE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "_include")


#------------------------------------------------------------------------------
# debug handler


def debug_handler(debug_flag: Optional[str], debug_cb: Optional[Callable], msg: str,
                  pid: Optional[int] = None,
                  **fields: Any
                  ) -> None :
    """
    deal with different debugging states automatically

    debug_flag:

    - ``None``: do nothing
    - ``'text'``: prints text debugging messages only
    - ``'text_pid'``: prints text debugging messages, with PID prepended on the DEBUG label
    - ``'textcb'``: produces text debugging messages but instead of printing it calls the
      debug_cb callback with the message as an argument
    - ``'textcb_pid'``: produces text debugging messages but instead of printing it calls
      the debug_cb callback with the message as an argument, with PID prepended on the DEBUG label

    Any extra keyword ``fields`` are appended to the message as ``key=value`` pairs (sorted by
    key) so that progress lines from training runs can be grepped and parsed.

    Parameters
    ----------
    debug_flag
        specifies how to dispatch the message, `None` to do nothing
    debug_cb
        callback function that takes the debugging message as an argument, can be None if
        debug_flag is not set to 'textcb' or 'textcb_pid'
    msg
        debugging message (automatically prepended with "DEBUG: ")
    pid : optional
        PID for individual process, defaults to the calling process in the "_pid" modes
    **fields
        structured values to append to the message
    """
    if debug_flag is None:
        return
    if debug_flag not in ("text", "text_pid", "textcb", "textcb_pid"):
        raise ValueError(f"debug_handler: unrecognized debug_flag {debug_flag!r}")
    if "pid" in debug_flag and pid is None:
        pid = os.getpid()
    lbl = f"<pid: {pid}> " if "pid" in debug_flag else ""
    line = lbl + "DEBUG: " + msg
    if fields:
        line += " | " + " ".join(f"{k}={_fmt_field(v)}" for k, v in sorted(fields.items()))
    if debug_flag.startswith("textcb"):
        if debug_cb is None:
            ve = 'debug_handler: debug_flag was set to "textcb" or "textcb_pid" but no debug_cb was provided'
            raise ValueError(ve)
        debug_cb(line)
    else:
        print(line, flush=True)


def _fmt_field(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


#------------------------------------------------------------------------------
# multiprocessing


def apply_args_and_kwargs(fn: Callable, args: List[Any], kwargs: Dict[Any, Any]
                          ) -> Any:
    """ small helper that enables multiprocessing.Pool.starmap with kwargs """
    return fn(*args, **kwargs)


#------------------------------------------------------------------------------
# seeds and hashing


def derive_seed(*parts: Any) -> int :
    """
    derive a 63-bit integer seed from an arbitrary tuple of (JSON serializable) parts

    The derivation hashes a canonical JSON rendering of the parts, so it is stable across
    processes and platforms (unlike ``hash()``), and never consults the clock.
    """
    blob = json.dumps(list(parts), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


def sha256_bytes(data: bytes) -> str :
    """ hex sha256 digest of a bytes object """
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str) -> str :
    """ hex sha256 digest of a file's contents """
    if not os.path.isfile(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), path)
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


#------------------------------------------------------------------------------
# NDJSON


def dumps_canonical(obj: Any) -> str :
    """ single-line JSON with sorted keys, used for every NDJSON record written by rclab """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_ndjson(path: NdjsonFilePath, records: Iterable[Dict[str, Any]]) -> int :
    """ (over)write records to an NDJSON file, returns the number of records written """
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(dumps_canonical(rec) + "\n")
            n += 1
    return n


def append_ndjson(path: NdjsonFilePath, record: Dict[str, Any]) -> None :
    """ append a single record to an NDJSON file (created if needed) """
    with open(path, "a", encoding="utf-8", newline="\n") as f:
        f.write(dumps_canonical(record) + "\n")


def iter_ndjson(path: NdjsonFilePath) -> Iterator[Dict[str, Any]] :
    """ yields records from an NDJSON file one at a time, blank lines are skipped """
    if not os.path.isfile(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), path)
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"iter_ndjson: {path} line {lineno} is not valid JSON") from e


def read_ndjson(path: NdjsonFilePath) -> List[Dict[str, Any]] :
    """ read all records from an NDJSON file """
    return list(iter_ndjson(path))
