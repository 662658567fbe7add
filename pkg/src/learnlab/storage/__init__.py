from .frame import (
    CorruptFrameError,
    Frame,
    FrameError,
    FrameReader,
    frame_from_labeled_rows,
    inspect_frame,
    labeled_rows_from_frame,
    read_frame,
    write_frame,
)
from .rawstore import RawRow, RawStore, UnknownTableError
from .sizing import StoragePlan, estimate_storage

__all__ = [
    "CorruptFrameError",
    "Frame",
    "FrameError",
    "FrameReader",
    "RawRow",
    "RawStore",
    "StoragePlan",
    "UnknownTableError",
    "estimate_storage",
    "frame_from_labeled_rows",
    "inspect_frame",
    "labeled_rows_from_frame",
    "read_frame",
    "write_frame",
]
