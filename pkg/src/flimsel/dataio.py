"""Text serialization of photon datasets.

Layout: a short ``#%``-prefixed header, then one arrival time per line.
Times are written with 17 significant digits so doubles round-trip
exactly. Example::

    #%flimsel-dataset 1
    #%period_ns 12
    #%pulse_count 1000000
    #%noise_photons 100
    #%provenance simulate --seed 7
    0.73927182718281829
    ...

``noise_photons`` is the known expected noise photon total I_0 * T; it
and ``provenance`` are optional.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DatasetFormatError
from .models import PhotonDataset

FORMAT_VERSION = 1
_MAGIC = "#%flimsel-dataset"


def write_dataset(path, dataset: PhotonDataset,
                  noise_photons: float | None = None,
                  provenance: str | None = None) -> None:
    if dataset.pulse_count < 1:
        raise ValueError("serialized datasets need pulse_count >= 1")
    lines = [f"{_MAGIC} {FORMAT_VERSION}",
             f"#%period_ns {dataset.period:.17g}",
             f"#%pulse_count {dataset.pulse_count:.17g}"]
    if noise_photons is not None:
        if noise_photons < 0:
            raise ValueError("noise_photons must be >= 0")
        lines.append(f"#%noise_photons {noise_photons:.17g}")
    if provenance is not None:
        if "\n" in provenance:
            raise ValueError("provenance must be a single line")
        lines.append(f"#%provenance {provenance}")
    lines.extend(f"{t:.17g}" for t in dataset.times)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path) -> tuple[PhotonDataset, dict]:
    """Parse a dataset file.

    Returns the dataset and a header dict with optional keys
    ``noise_photons``, ``noise_per_pulse`` and ``provenance``. Raises
    :class:`DatasetFormatError` naming the offending line on malformed
    input.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise DatasetFormatError(
            f"line 1: expected header '{_MAGIC} <version>'", line_number=1)
    try:
        version = int(lines[0][len(_MAGIC):].strip())
    except ValueError:
        raise DatasetFormatError("line 1: unreadable format version",
                                 line_number=1) from None
    if version != FORMAT_VERSION:
        raise DatasetFormatError(
            f"line 1: unsupported format version {version}", line_number=1)

    header: dict = {}
    body_start = None
    for i, line in enumerate(lines[1:], start=2):
        if not line.startswith("#%"):
            body_start = i
            break
        try:
            key, value = line[2:].split(maxsplit=1)
        except ValueError:
            raise DatasetFormatError(
                f"line {i}: header line without a value", line_number=i) from None
        if key in ("period_ns", "pulse_count", "noise_photons"):
            try:
                header[key] = float(value)
            except ValueError:
                raise DatasetFormatError(
                    f"line {i}: {key} is not a number", line_number=i) from None
        elif key == "provenance":
            header[key] = value
        else:
            raise DatasetFormatError(
                f"line {i}: unknown header key '{key}'", line_number=i)
    if "period_ns" not in header or "pulse_count" not in header:
        raise DatasetFormatError(
            "header must define period_ns and pulse_count", line_number=1)
    if header["period_ns"] <= 0:
        raise DatasetFormatError("period_ns must be > 0", line_number=1)
    if header["pulse_count"] < 1:
        raise DatasetFormatError("pulse_count must be >= 1", line_number=1)

    times = []
    if body_start is not None:
        for i, line in enumerate(lines[body_start - 1:], start=body_start):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                t = float(stripped)
            except ValueError:
                raise DatasetFormatError(
                    f"line {i}: not a photon arrival time: {stripped!r}",
                    line_number=i) from None
            if not 0 <= t < header["period_ns"]:
                raise DatasetFormatError(
                    f"line {i}: time {t} outside [0, {header['period_ns']})",
                    line_number=i)
            times.append(t)

    dataset = PhotonDataset(times=np.array(times, dtype=float),
                            period=header["period_ns"],
                            pulse_count=header["pulse_count"])
    if "noise_photons" in header:
        header["noise_per_pulse"] = header["noise_photons"] / header["pulse_count"]
    return dataset, header
