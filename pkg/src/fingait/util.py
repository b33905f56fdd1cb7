"""Small shared helpers: seed derivation, CSV float formatting, checksums."""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Derive a stable 64-bit sub-seed from a master seed and context keys.

    Uses sha256 of the stringified parts, so the result is identical across
    runs, platforms and Python processes (unlike the builtin ``hash``).
    """
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def fmt(value) -> str:
    """Shortest round-trip decimal form of a float, for deterministic CSVs."""
    return repr(float(value))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_kv_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blanks ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
