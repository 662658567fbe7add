"""Replication-aware storage sizing."""

from __future__ import annotations

from dataclasses import dataclass

MIB = 2**20
MB_PER_GB = 1000


@dataclass(frozen=True)
class StoragePlan:
    students: int
    bytes_per_student: int
    replication: int
    total_bytes: int

    @property
    def megabytes(self) -> float:
        return self.total_bytes / MIB

    @property
    def gigabytes(self) -> float:
        # MB are binary, GB are a thousand of them: 60,000 x 2 MB reads as 120,000 MB ~ 120 GB
        return self.megabytes / MB_PER_GB

    def human(self) -> str:
        if self.megabytes >= MB_PER_GB:
            return f"≈{self.gigabytes:.4g} GB"
        return f"≈{self.megabytes:.4g} MB"

    def describe(self) -> str:
        return (
            f"{self.students} students x {self.bytes_per_student} B x replication {self.replication}"
            f" = {self.total_bytes} B ({self.megabytes:.6g} MB, {self.human()})"
        )


def estimate_storage(students: int, bytes_per_student: int, replication: int = 1) -> StoragePlan:
    if students < 0 or bytes_per_student < 0:
        raise ValueError("students and bytes_per_student must be non-negative")
    if replication < 1:
        raise ValueError("replication must be at least 1")
    return StoragePlan(students, bytes_per_student, replication, students * bytes_per_student * replication)
