"""WAV file reading and writing.

Accepts 16-bit integer or 32-bit float PCM, mono or interleaved 2-channel.
Integer samples are normalized by 32768 so everything downstream works on
unit-scale floats.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from .errors import IngestError


def read_wav(path: str | os.PathLike) -> tuple[np.ndarray, int]:
    """Read a WAV file into float64 samples on a [-1, 1]-ish scale.

    Returns (data, sample_rate); data has shape (n,) for mono or (n, 2)
    for two channels.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise IngestError(f"WAV file not found: {path}") from None
    except ValueError as exc:
        raise IngestError(f"unreadable WAV file {path}: {exc}") from None
    if data.dtype == np.int16:
        out = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        out = data.astype(np.float64)
    elif data.dtype == np.float64:
        out = data.copy()
    else:
        raise IngestError(
            f"{path}: unsupported sample format {data.dtype}; "
            "expected 16-bit integer or 32-bit float PCM"
        )
    if out.ndim == 2 and out.shape[1] > 2:
        raise IngestError(f"{path}: {out.shape[1]} channels, expected mono or 2-channel")
    return out, int(rate)


def write_wav(
    path: str | os.PathLike,
    data: np.ndarray,
    sample_rate: int,
    fmt: str = "float32",
) -> None:
    """Write mono (n,) or 2-channel (n, 2) samples.

    fmt "float32" preserves values exactly; "int16" scales by 32768 and
    clips to the representable range.
    """
    data = np.asarray(data)
    if fmt == "float32":
        wavfile.write(path, sample_rate, data.astype(np.float32))
    elif fmt == "int16":
        scaled = np.clip(np.rint(data * 32768.0), -32768, 32767)
        wavfile.write(path, sample_rate, scaled.astype(np.int16))
    else:
        raise ValueError(f"unknown WAV format {fmt!r}; use 'float32' or 'int16'")
