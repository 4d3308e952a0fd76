"""Framed binary wavefunction checkpoints.

Layout: a small JSON header file ``<stem>.qwp`` plus chunk files
``<stem>_<n>.qwp`` holding consecutive payload frames.  Every file starts
with the magic ``QWP1``.  All numbers are little-endian IEEE-754 doubles,
tensors row-major, so a save/load round trip is bitwise lossless for
complex-double data.

Frame layout inside a chunk::

    uint64 step index | float64 time | nu * (shape) complex128 tensors

A chunk is rolled over once appending the next frame would push it past
``CHUNK_LIMIT`` bytes.  The header is rewritten on every flush, so partial
runs stay loadable after a crash.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Iterator, List, Tuple

import numpy as np

from .errors import CheckpointError
from .grids import ProductGrid
from .system import WaveFunction

__all__ = ["CheckpointWriter", "load_checkpoints", "CHUNK_LIMIT"]

MAGIC = b"QWP1"
VERSION = 1
CHUNK_LIMIT = 64 * 1024 * 1024


def _frame_size(shape, n_channels):
    return 8 + 8 + n_channels * int(np.prod(shape)) * 16


class CheckpointWriter:
    """Appends wavefunction snapshots to a chunked checkpoint set."""

    def __init__(self, stem, grid: ProductGrid, n_channels, meta=None):
        self.stem = str(stem)
        self.shape = tuple(int(n) for n in grid.shape)
        self.n_channels = int(n_channels)
        self.meta = dict(meta or {})
        self._frame_size = _frame_size(self.shape, self.n_channels)
        if self._frame_size > CHUNK_LIMIT:
            raise CheckpointError(
                f"a single snapshot ({self._frame_size} bytes) exceeds the "
                f"chunk limit of {CHUNK_LIMIT} bytes"
            )
        self._steps: List[dict] = []
        self._chunks: List[str] = []
        self._chunk_bytes = 0
        self._fh = None
        self._last_index = None

    # -- internals ----------------------------------------------------------

    def _chunk_name(self, n):
        return f"{os.path.basename(self.stem)}_{n}.qwp"

    def _open_chunk(self):
        name = self._chunk_name(len(self._chunks))
        path = os.path.join(os.path.dirname(self.stem) or ".", name)
        self._fh = open(path, "wb")
        self._fh.write(MAGIC)
        self._chunk_bytes = len(MAGIC)
        self._chunks.append(name)

    def _write_header(self):
        header = {
            "version": VERSION,
            "shape": list(self.shape),
            "n_channels": self.n_channels,
            "meta": self.meta,
            "chunks": self._chunks,
            "steps": self._steps,
        }
        payload = json.dumps(header, sort_keys=True).encode()
        with open(self.stem + ".qwp", "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)

    # -- public API ---------------------------------------------------------

    def append(self, index, t, psi: WaveFunction):
        if psi.grid.shape != self.shape or psi.n_channels != self.n_channels:
            raise CheckpointError(
                f"snapshot shape {psi.grid.shape} x {psi.n_channels} does not "
                f"match checkpoint header {self.shape} x {self.n_channels}"
            )
        if self._last_index is not None and index <= self._last_index:
            raise CheckpointError(
                f"step indices must increase: got {index} after {self._last_index}"
            )
        self._last_index = index
        if self._fh is None or self._chunk_bytes + self._frame_size > CHUNK_LIMIT:
            if self._fh is not None:
                self._fh.close()
            self._open_chunk()
        offset = self._chunk_bytes
        self._fh.write(struct.pack("<Qd", int(index), float(t)))
        for c in psi.channels:
            self._fh.write(np.ascontiguousarray(c, dtype=np.complex128).tobytes())
        self._fh.flush()
        self._chunk_bytes += self._frame_size
        self._steps.append(
            {"index": int(index), "t": float(t),
             "chunk": len(self._chunks) - 1, "offset": offset}
        )
        self._write_header()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        self._write_header()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def load_checkpoints(stem) -> Tuple[dict, Iterator[Tuple[int, float, list]]]:
    """Read a checkpoint set; returns ``(header, frame iterator)``.

    Frames are yielded as ``(index, t, [channel arrays])`` in saved order.
    """
    path = str(stem) + ".qwp" if not str(stem).endswith(".qwp") else str(stem)
    base = path[: -len(".qwp")]
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != MAGIC:
                raise CheckpointError(f"{path}: bad magic {magic!r}, expected QWP1")
            (length,) = struct.unpack("<Q", fh.read(8))
            header = json.loads(fh.read(length).decode())
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint header {path}: {exc}") from exc
    except (struct.error, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header {path}: {exc}") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {header.get('version')!r} "
            f"(supported: {VERSION})"
        )
    shape = tuple(header["shape"])
    nu = int(header["n_channels"])
    size = _frame_size(shape, nu)
    dirname = os.path.dirname(base) or "."

    def frames():
        for step in header["steps"]:
            chunk = header["chunks"][step["chunk"]]
            chunk_path = os.path.join(dirname, chunk)
            try:
                with open(chunk_path, "rb") as fh:
                    if fh.read(4) != MAGIC:
                        raise CheckpointError(f"{chunk}: bad chunk magic")
                    fh.seek(step["offset"])
                    blob = fh.read(size)
            except OSError as exc:
                raise CheckpointError(f"cannot read chunk {chunk}: {exc}") from exc
            if len(blob) < size:
                raise CheckpointError(
                    f"chunk {chunk} is truncated at step {step['index']} "
                    f"(got {len(blob)} of {size} bytes)"
                )
            index, t = struct.unpack("<Qd", blob[:16])
            data = np.frombuffer(blob[16:], dtype=np.complex128)
            channels = [
                data[k * int(np.prod(shape)):(k + 1) * int(np.prod(shape))]
                .reshape(shape).copy()
                for k in range(nu)
            ]
            yield index, t, channels

    return header, frames()
