"""
Channel framing for quantizer symbols

Frame layout (bit-exact):
  - each symbol s maps to the level index j = s + (N-1)/2 in {0, ..., N-1}
  - j is written as a ceil(log2 N)-bit big-endian field
  - fields go in component order i = 1..r, packed MSB-first into octets
  - trailing bits of the last octet are zero
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from src.codec.zoom_codec import SymbolVector, bits_per_component
from src.errors import MalformedFrame

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelFrame:
    payload: bytes
    k: int
    n_bits: int

    def hex(self) -> str:
        return self.payload.hex()

    def log_line(self) -> str:
        return f"k={self.k} bits={self.payload.hex()}"


def _payload_octets(n_bits: int) -> int:
    return (n_bits + 7) // 8


def symbol_to_index(symbol: float, N: int) -> int:
    j = symbol + (N - 1) / 2.0
    idx = int(round(j))
    if abs(j - idx) > 1e-9 or not 0 <= idx < N:
        raise MalformedFrame(f"symbol {symbol} is not admissible for N={N}")
    return idx


def pack_frame(symbols: SymbolVector, N: int, k: Optional[int] = None) -> ChannelFrame:
    b = bits_per_component(N)
    acc = 0
    for s in symbols.symbols:
        acc = (acc << b) | symbol_to_index(float(s), N)
    n_bits = b * len(symbols.symbols)
    n_octets = _payload_octets(n_bits)
    acc <<= n_octets * 8 - n_bits
    return ChannelFrame(
        payload=acc.to_bytes(n_octets, "big"),
        k=symbols.k if k is None else k,
        n_bits=n_bits,
    )


def unpack_frame(frame: ChannelFrame, N: int, r: int) -> SymbolVector:
    b = bits_per_component(N)
    n_bits = b * r
    n_octets = _payload_octets(n_bits)
    if len(frame.payload) != n_octets:
        raise MalformedFrame(
            f"frame k={frame.k}: payload is {len(frame.payload)} octets, expected {n_octets} for r={r}, N={N}"
        )
    acc = int.from_bytes(frame.payload, "big")
    pad = n_octets * 8 - n_bits
    if acc & ((1 << pad) - 1):
        raise MalformedFrame(f"frame k={frame.k}: nonzero padding bits")
    acc >>= pad
    mask = (1 << b) - 1
    indices = []
    for i in range(r):
        shift = (r - 1 - i) * b
        j = (acc >> shift) & mask
        if j >= N:
            raise MalformedFrame(f"frame k={frame.k}: level index {j} out of range for N={N}")
        indices.append(j)
    symbols = np.array(indices, dtype=float) - (N - 1) / 2.0
    return SymbolVector(symbols=symbols, k=frame.k)


def write_frame_log(frames: Iterable[ChannelFrame], path) -> int:
    """One `k=<int> bits=<hex>` line per frame; returns the line count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w") as fh:
        for frame in frames:
            fh.write(frame.log_line() + "\n")
            count += 1
    logger.info(f"💾 Frame log written: {path} ({count} frames)")
    return count


def read_frame_log(path) -> List[ChannelFrame]:
    """Inverse of write_frame_log; n_bits is unknown from the log and left as 8*len"""
    frames = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                k_part, bits_part = line.split()
                k = int(k_part.split("=", 1)[1])
                payload = bytes.fromhex(bits_part.split("=", 1)[1])
            except (ValueError, IndexError) as e:
                raise MalformedFrame(f"{path}:{line_no}: cannot parse frame log line: {e}")
            frames.append(ChannelFrame(payload=payload, k=k, n_bits=8 * len(payload)))
    return frames
