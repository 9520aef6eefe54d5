"""Thin path-based bindings over the lunareg command line.

Every numeric result comes from the lunareg executable itself; this package
only builds command lines, reads headers for the upscale factor, and parses
the JSON the tool writes. Outputs are therefore identical to direct CLI use.
"""

import json
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

__all__ = ["CommandError", "metrics", "register"]
__version__ = "0.1.0"

METHODS = ("sift", "orb", "intfeat")
INTERPS = ("bilinear", "bicubic")
DEFAULT_SEED = 42

# register exits 0/2/3 with a report on disk; anything else has no report
_REPORTED_EXITS = (0, 2, 3)


class CommandError(RuntimeError):
    """A delegated command failed without producing a report."""

    def __init__(self, argv, returncode, stderr):
        detail = stderr.strip() or "no error output"
        super().__init__(f"{' '.join(argv)} exited {returncode}: {detail}")
        self.argv = list(argv)
        self.returncode = returncode
        self.stderr = stderr


def _run(args):
    argv = [sys.executable, "-m", "lunareg", *args]
    proc = subprocess.run(argv, capture_output=True, text=True)
    return argv, proc


def _pgm_size(raw, path):
    tokens = []
    i = 2
    while len(tokens) < 2 and i < len(raw):
        ch = raw[i : i + 1]
        if ch == b"#":
            while i < len(raw) and raw[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            start = i
            while i < len(raw) and not raw[i : i + 1].isspace() and raw[i : i + 1] != b"#":
                i += 1
            tokens.append(raw[start:i])
    if len(tokens) < 2:
        raise ValueError(f"{path}: truncated PGM header")
    return int(tokens[0]), int(tokens[1])


def image_size(path):
    """(width, height) parsed from a PNG or binary PGM header."""
    raw = Path(path).read_bytes()
    if raw[:8] == b"\x89PNG\r\n\x1a\n" and len(raw) >= 24:
        width, height = struct.unpack(">II", raw[16:24])
        return int(width), int(height)
    if raw[:2] == b"P5":
        return _pgm_size(raw, path)
    raise ValueError(f"{path}: not a PNG or binary PGM file")


def register(path1, path2, method, interp=None, seed=DEFAULT_SEED, out_dir=None):
    """Register image at path1 onto image at path2 via the lunareg CLI.

    With interp set, path1 is first resampled to path2's width using that
    kernel, matching the cross-resolution workflow. Returns (report,
    registered_path); failure statuses arrive inside the report, while I/O,
    usage and data errors raise.
    """
    method = str(method).lower()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if interp is not None:
        interp = str(interp).lower()
        if interp not in INTERPS:
            raise ValueError(f"unknown interp {interp!r}, expected one of {INTERPS}")

    out = Path(tempfile.mkdtemp(prefix="syncvision_")) if out_dir is None else Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    source = str(path1)
    if interp is not None:
        width1, _ = image_size(path1)
        width2, _ = image_size(path2)
        source = str(out / "upscaled.png")
        argv, proc = _run(
            [
                "upscale",
                str(path1),
                "--factor",
                repr(width2 / width1),
                "--interp",
                interp,
                "--out",
                source,
            ]
        )
        if proc.returncode != 0:
            raise CommandError(argv, proc.returncode, proc.stderr)

    argv, proc = _run(
        ["register", source, str(path2), "--method", method, "--seed", str(seed), "--out", str(out)]
    )
    if proc.returncode not in _REPORTED_EXITS:
        raise CommandError(argv, proc.returncode, proc.stderr)
    report = json.loads((out / "report.json").read_text())
    registered = out / "registered.png"
    return report, str(registered) if registered.exists() else None


def metrics(path1, path2, scale="eightbit", mode="windowed"):
    """Similarity metrics between two same-size images via the lunareg CLI.

    Returns the parsed payload mapping with ssim, psnr_db and mse.
    """
    argv, proc = _run(["metrics", str(path1), str(path2), "--scale", scale, "--mode", mode])
    if proc.returncode != 0:
        raise CommandError(argv, proc.returncode, proc.stderr)
    return json.loads(proc.stdout)
