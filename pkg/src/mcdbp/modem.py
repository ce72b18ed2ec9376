"""Square QAM constellations and seeded symbol frames.

Seed derivation
---------------
Every random stream is drawn from ``numpy.random.SeedSequence`` with
``entropy=master_seed`` and a ``spawn_key`` tag::

    (ROLE_DATA, zigzag(channel_index), polarisation)   # symbol data
    (ROLE_ASE, amplifier_index)                        # amplifier noise

``zigzag`` maps signed channel offsets to non-negative integers
(0, -1, 1, -2, 2 ... -> 0, 1, 2, 3, 4 ...). The hash is therefore fixed by
numpy's SeedSequence and is independent of execution order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ROLE_DATA = 0
ROLE_ASE = 1

SUPPORTED_ORDERS = (4, 16, 64, 256)

FRAME_MAGIC = b"MCDBPFRM"


def zigzag(k: int) -> int:
    return 2 * k if k >= 0 else -2 * k - 1


def stream_rng(master_seed: int, *tag: int) -> np.random.Generator:
    """Independent generator for the stream identified by ``tag``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(t) for t in tag))
    return np.random.default_rng(ss)


def gray(n):
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    order: int
    points: np.ndarray
    labels: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def bit_labels(self) -> list[str]:
        return [format(int(l), f"0{self.bits_per_symbol}b") for l in self.labels]

    @property
    def name(self) -> str:
        return "QPSK" if self.order == 4 else f"{self.order}QAM"


def build_constellation(M: int) -> Constellation:
    """Unit-energy square M-QAM with per-axis Gray labels.

    Point ``i`` sits at in-phase level ``i // m`` and quadrature level
    ``i % m`` (``m = sqrt(M)``); its label is the Gray code of the in-phase
    level in the high bits followed by the Gray code of the quadrature level.
    """
    if M not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported constellation order {M}; "
                         f"supported orders are {SUPPORTED_ORDERS}")
    m = int(np.sqrt(M))
    k = int(np.log2(m))
    levels = 2 * np.arange(m) - (m - 1)
    ii, qq = np.divmod(np.arange(M), m)
    points = (levels[ii] + 1j * levels[qq]) / np.sqrt(2 * (M - 1) / 3)
    labels = (gray(ii) << k) | gray(qq)
    return Constellation(order=M, points=points, labels=labels)


@dataclass(frozen=True)
class SymbolFrame:
    channel_index: int
    x_pol: np.ndarray
    y_pol: np.ndarray
    seed_record: tuple

    @property
    def symbols(self) -> np.ndarray:
        return np.stack([self.x_pol, self.y_pol])

    @property
    def n_symbols(self) -> int:
        return len(self.x_pol)


def generate_frame(channel_index: int, constellation: Constellation,
                   n_symbols: int, master_seed: int) -> SymbolFrame:
    """Draw i.i.d. uniform symbols for both polarisations of one channel."""
    if n_symbols < 2 or n_symbols % 2:
        raise ValueError("n_symbols must be even and >= 2")
    pols = []
    tags = []
    for pol in (0, 1):
        tag = (ROLE_DATA, zigzag(channel_index), pol)
        rng = stream_rng(master_seed, *tag)
        pols.append(constellation.points[rng.integers(0, constellation.order, n_symbols)])
        tags.append((int(master_seed),) + tag)
    return SymbolFrame(channel_index, pols[0], pols[1], tuple(tags))


def decorrelate_polarizations(frame: SymbolFrame) -> SymbolFrame:
    """Cyclically delay the y polarisation by half the frame length."""
    n = frame.n_symbols
    if n % 2:
        raise ValueError("frame length must be even")
    return SymbolFrame(frame.channel_index, frame.x_pol,
                       np.roll(frame.y_pol, n // 2), frame.seed_record)


def write_frames(path, frames: list[SymbolFrame]) -> None:
    """Dump frames as a binary file.

    Layout: 8-byte magic ``MCDBPFRM``, uint32 channel count, uint64 symbols per
    polarisation, int32 channel indices, then for each channel in order its
    x samples followed by its y samples as interleaved little-endian
    complex64.
    """
    n = frames[0].n_symbols
    if any(f.n_symbols != n for f in frames):
        raise ValueError("all frames must have the same length")
    with open(path, "wb") as fh:
        fh.write(FRAME_MAGIC)
        fh.write(np.array([len(frames)], "<u4").tobytes())
        fh.write(np.array([n], "<u8").tobytes())
        fh.write(np.array([f.channel_index for f in frames], "<i4").tobytes())
        for f in frames:
            fh.write(f.x_pol.astype("<c8").tobytes())
            fh.write(f.y_pol.astype("<c8").tobytes())


def read_frames(path) -> list[SymbolFrame]:
    with open(path, "rb") as fh:
        if fh.read(8) != FRAME_MAGIC:
            raise ValueError(f"{path}: not a frame dump")
        n_ch = int(np.frombuffer(fh.read(4), "<u4")[0])
        n = int(np.frombuffer(fh.read(8), "<u8")[0])
        idx = np.frombuffer(fh.read(4 * n_ch), "<i4")
        data = np.frombuffer(fh.read(), "<c8").reshape(n_ch, 2, n)
    return [SymbolFrame(int(k), d[0].astype(complex), d[1].astype(complex), ())
            for k, d in zip(idx, data)]
