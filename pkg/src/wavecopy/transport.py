"""Bit-exact wavefront framing and byte-stream transport.

Wire layout (all integers little-endian):

    magic   4 bytes  "WCF1"
    version u8
    seq     u32
    rows    u16
    cols    u16
    payload rows*cols complex samples as (re, im) float64 pairs, row-major
    crc     u32, CRC-32 (IEEE) over header+payload

Total frame size is 13 + rows*cols*16 + 4 bytes.
"""

import socket
import struct
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadChecksumError,
    BadMagicError,
    ConnectionLostError,
    DimMismatchError,
    NonFiniteSampleError,
    TruncatedError,
)
from .scene import PointSource, ReceiveArray

MAGIC = b"WCF1"
VERSION = 1
_HEADER = struct.Struct("<4sBIHH")
_CRC = struct.Struct("<I")


@dataclass(eq=False)
class WireFrame:
    seq: int
    payload: np.ndarray  # (rows, cols) complex128
    version: int = VERSION

    def __post_init__(self):
        self.payload = np.asarray(self.payload, dtype=np.complex128)
        if self.payload.ndim != 2:
            raise ValueError("payload must be a rows x cols matrix")

    @property
    def rows(self) -> int:
        return self.payload.shape[0]

    @property
    def cols(self) -> int:
        return self.payload.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, WireFrame)
            and self.seq == other.seq
            and self.version == other.version
            and self.payload.shape == other.payload.shape
            and np.array_equal(self.payload, other.payload)
        )


class FrameSampler:
    """Turns readings into frames with an incrementing sequence number."""

    def __init__(self, start_seq: int = 0):
        self._seq = start_seq

    def sample_wavefront(self, reading: np.ndarray) -> WireFrame:
        reading = np.asarray(reading, dtype=np.complex128)
        if not np.all(np.isfinite(reading.real)) or not np.all(np.isfinite(reading.imag)):
            raise NonFiniteSampleError("reading contains non-finite samples")
        frame = WireFrame(self._seq, reading.copy())
        self._seq = (self._seq + 1) & 0xFFFFFFFF
        return frame


def encode_frame(frame: WireFrame) -> bytes:
    header = _HEADER.pack(MAGIC, frame.version, frame.seq, frame.rows, frame.cols)
    payload = np.ascontiguousarray(frame.payload.astype("<c16", copy=False)).tobytes()
    crc = zlib.crc32(header + payload) & 0xFFFFFFFF
    return header + payload + _CRC.pack(crc)


def frame_size(rows: int, cols: int) -> int:
    return _HEADER.size + rows * cols * 16 + _CRC.size


def decode_frame(buf: bytes) -> WireFrame:
    """Decode one complete frame; errors are distinguishable by type."""
    frame, consumed = _parse_frame(buf, 0)
    if consumed != len(buf):
        raise ValueError(f"{len(buf) - consumed} trailing bytes after frame")
    return frame


def _parse_frame(buf, offset: int):
    """Parse a frame starting at `offset`; returns (frame, next_offset)."""
    view = memoryview(buf)[offset:]
    if len(view) < 4:
        raise TruncatedError("buffer shorter than the frame magic")
    if bytes(view[:4]) != MAGIC:
        raise BadMagicError("buffer does not start with the frame magic")
    if len(view) < _HEADER.size:
        raise TruncatedError("buffer ends inside the frame header")
    magic, version, seq, rows, cols = _HEADER.unpack_from(view, 0)
    total = frame_size(rows, cols)
    if len(view) < total:
        raise TruncatedError(f"frame needs {total} bytes, buffer has {len(view)}")
    header_payload = bytes(view[: total - _CRC.size])
    (crc_stored,) = _CRC.unpack_from(view, total - _CRC.size)
    if zlib.crc32(header_payload) & 0xFFFFFFFF != crc_stored:
        raise BadChecksumError("frame CRC-32 mismatch")
    payload = np.frombuffer(view[_HEADER.size : total - _CRC.size], dtype="<c16").reshape(
        rows, cols
    )
    return WireFrame(seq, payload.astype(np.complex128), version), offset + total


def replay_frame(frame: WireFrame, tx_array: ReceiveArray, conjugate: bool = False):
    """Map each payload sample onto a point source at the matching element.

    `conjugate=True` enables time-reversal replay; the default re-emits the
    samples as recorded.
    """
    if (frame.rows, frame.cols) != (tx_array.rows, tx_array.cols):
        raise DimMismatchError(
            f"frame is {frame.rows}x{frame.cols}, array is {tx_array.rows}x{tx_array.cols}"
        )
    samples = frame.payload.reshape(-1)
    if conjugate:
        samples = np.conj(samples)
    return [PointSource(pos, complex(a)) for pos, a in zip(tx_array.positions, samples)]


# ---------------- streaming ----------------


class FrameParser:
    """Incremental frame parser that resynchronizes on the next magic."""

    def __init__(self):
        self._buf = bytearray()
        self.frames_ok = 0
        self.frames_corrupt = 0
        self.decode_us: list = []

    def feed(self, data: bytes) -> list:
        """Consume bytes; returns the frames completed by this chunk."""
        self._buf.extend(data)
        frames = []
        while True:
            start = self._buf.find(MAGIC)
            if start < 0:
                # Keep a tail in case the magic straddles a chunk boundary.
                if len(self._buf) > 3:
                    del self._buf[: len(self._buf) - 3]
                return frames
            if start > 0:
                del self._buf[:start]
            try:
                t0 = time.perf_counter()
                frame, consumed = _parse_frame(bytes(self._buf), 0)
                self.decode_us.append((time.perf_counter() - t0) * 1e6)
            except TruncatedError:
                return frames  # wait for more bytes
            except (BadChecksumError, BadMagicError):
                self.frames_corrupt += 1
                del self._buf[:4]  # step past this false/corrupt magic
                continue
            self.frames_ok += 1
            del self._buf[:consumed]
            frames.append(frame)

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


@dataclass
class SessionStats:
    frames_ok: int = 0
    frames_corrupt: int = 0
    out_of_order: int = 0
    encode_us: list = field(default_factory=list)
    decode_us: list = field(default_factory=list)

    def summary(self) -> dict:
        med = lambda xs: float(np.median(xs)) if xs else None
        return {
            "frames_ok": self.frames_ok,
            "frames_corrupt": self.frames_corrupt,
            "out_of_order": self.out_of_order,
            "median_encode_us": med(self.encode_us),
            "median_decode_us": med(self.decode_us),
        }


def send_frames(sock: socket.socket, frames, rate_hz: float | None = None) -> SessionStats:
    """Encode and send frames over a connected socket, optionally rate-limited."""
    stats = SessionStats()
    interval = 1.0 / rate_hz if rate_hz else 0.0
    nxt = time.perf_counter()
    for frame in frames:
        t0 = time.perf_counter()
        blob = encode_frame(frame)
        stats.encode_us.append((time.perf_counter() - t0) * 1e6)
        try:
            sock.sendall(blob)
        except OSError as exc:
            raise ConnectionLostError(str(exc)) from exc
        stats.frames_ok += 1
        if interval:
            nxt += interval
            delay = nxt - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
    return stats


def receive_frames(conn: socket.socket, on_frame=None) -> SessionStats:
    """Read frames until the peer closes; corrupted frames are counted, not fatal."""
    parser = FrameParser()
    stats = SessionStats()
    last_seq = None
    while True:
        try:
            data = conn.recv(65536)
        except OSError as exc:
            raise ConnectionLostError(str(exc)) from exc
        if not data:
            break
        for frame in parser.feed(data):
            stats.frames_ok += 1
            if last_seq is not None and frame.seq <= last_seq:
                stats.out_of_order += 1
            last_seq = frame.seq
            if on_frame is not None:
                on_frame(frame)
    stats.frames_corrupt = parser.frames_corrupt
    stats.decode_us = parser.decode_us
    return stats


def serve_once(host: str, port: int, on_frame=None, ready=None) -> SessionStats:
    """Accept one client on (host, port) and receive its frame stream."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(1)
        if ready is not None:
            ready(srv.getsockname())
        conn, _ = srv.accept()
        with conn:
            return receive_frames(conn, on_frame=on_frame)


def send_session(host: str, port: int, frames, rate_hz: float | None = None) -> SessionStats:
    """Connect to a receiver and stream the given frames."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        try:
            sock.connect((host, port))
        except OSError as exc:
            raise ConnectionLostError(str(exc)) from exc
        return send_frames(sock, frames, rate_hz=rate_hz)
