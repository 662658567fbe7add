"""64-bit FNV-1a hashing shared by frame checksums, digests and partitioning."""

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    """Hash ``data``; pass a previous result as ``h`` to continue a running hash."""
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def hexdigest(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"
