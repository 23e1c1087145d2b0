"""Model chains, contiguous split schemes, and per-partition aggregates.

A model is an ordered chain of blocks. A split scheme cuts the chain into
contiguous partitions; partition j covers blocks[cuts[j-1]:cuts[j]]. All
aggregates are computed by direct left-to-right summation so that repeated
evaluations of the same partition produce bit-identical floats.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Block:
    """One stage of the model chain."""

    index: int
    work_gflop: float
    param_bytes: float
    activation_out_bytes: float
    privacy_critical: bool = False
    sensitivity: float = 0.0


@dataclass(frozen=True)
class ModelSpec:
    """An ordered chain of blocks plus split limits.

    output_bytes is the size of the final model output returned to the
    requester-side node; when omitted it defaults to the last block's
    activation size.
    """

    name: str
    blocks: tuple[Block, ...]
    k_max: int
    output_bytes: float | None = None

    def __post_init__(self) -> None:
        if self.output_bytes is None and self.blocks:
            object.__setattr__(
                self, "output_bytes", self.blocks[-1].activation_out_bytes
            )

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def total_work_gflop(self) -> float:
        return sum(b.work_gflop for b in self.blocks)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class SplitScheme:
    """Contiguous segmentation given by interior cut positions.

    cut_points are strictly increasing block indices in (0, num_blocks);
    an empty tuple means the whole chain runs as one partition.
    """

    cut_points: tuple[int, ...]

    @property
    def num_partitions(self) -> int:
        return len(self.cut_points) + 1

    def ranges(self, num_blocks: int) -> tuple[tuple[int, int], ...]:
        """Half-open block ranges [start, stop) for partitions 1..k."""
        bounds = (0,) + self.cut_points + (num_blocks,)
        return tuple((bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1))

    def validate(self, num_blocks: int, k_max: int) -> ValidationResult:
        bad: list[str] = []
        if self.num_partitions > k_max:
            bad.append(f"{self.num_partitions} partitions exceed k_max={k_max}")
        prev = 0
        for c in self.cut_points:
            if not (prev < c < num_blocks):
                bad.append(f"cut point {c} out of order or out of range")
            prev = c
        return ValidationResult(not bad, tuple(bad))


@dataclass(frozen=True)
class PartitionStats:
    """Aggregates for one partition of a split scheme."""

    work_gflop: float
    param_bytes: float
    boundary_activation_bytes: float
    max_sensitivity: float
    privacy_critical: bool


def validate_model(spec: ModelSpec) -> ValidationResult:
    """Structural checks: contiguous indices, positive work, sane flags."""
    bad: list[str] = []
    if not spec.blocks:
        bad.append("model has no blocks")
    for pos, blk in enumerate(spec.blocks):
        if blk.index != pos:
            bad.append(f"block at position {pos} carries index {blk.index}")
        if blk.work_gflop <= 0:
            bad.append(f"block {pos}: work_gflop must be positive")
        if blk.param_bytes < 0:
            bad.append(f"block {pos}: param_bytes must be non-negative")
        if blk.activation_out_bytes < 0:
            bad.append(f"block {pos}: activation_out_bytes must be non-negative")
        if not (0.0 <= blk.sensitivity <= 1.0):
            bad.append(f"block {pos}: sensitivity must lie in [0, 1]")
        if blk.privacy_critical and blk.sensitivity <= 0.0:
            bad.append(f"block {pos}: privacy_critical requires sensitivity > 0")
    if spec.blocks and not (1 <= spec.k_max <= len(spec.blocks)):
        bad.append(f"k_max={spec.k_max} outside [1, {len(spec.blocks)}]")
    if spec.output_bytes is not None and spec.output_bytes < 0:
        bad.append("output_bytes must be non-negative")
    return ValidationResult(not bad, tuple(bad))


def split_count(num_blocks: int, max_k: int) -> int:
    """Number of contiguous split schemes with at most max_k partitions."""
    return sum(math.comb(num_blocks - 1, k - 1) for k in range(1, max_k + 1))


def enumerate_splits(spec: ModelSpec, max_k: int):
    """Yield all contiguous split schemes with 1..max_k partitions.

    Schemes come out ordered by partition count, then lexicographically by
    cut points, which is also the tie-break order used by the solvers.
    """
    if not 1 <= max_k <= spec.k_max:
        raise ValueError(f"max_k={max_k} outside [1, k_max={spec.k_max}]")
    n = spec.num_blocks
    for k in range(1, max_k + 1):
        for cuts in itertools.combinations(range(1, n), k - 1):
            yield SplitScheme(cuts)


def partition_stats(spec: ModelSpec, scheme: SplitScheme, j: int) -> PartitionStats:
    """Aggregates for partition j (1-based) under the given scheme.

    The boundary activation of the final partition is the model output,
    which sizes the return hop to the requester-side node.
    """
    ranges = scheme.ranges(spec.num_blocks)
    if not 1 <= j <= len(ranges):
        raise ValueError(f"partition index {j} outside 1..{len(ranges)}")
    start, stop = ranges[j - 1]
    work = 0.0
    params = 0.0
    sens = 0.0
    critical = False
    for blk in spec.blocks[start:stop]:
        work += blk.work_gflop
        params += blk.param_bytes
        if blk.sensitivity > sens:
            sens = blk.sensitivity
        critical = critical or blk.privacy_critical
    if j == len(ranges):
        boundary = spec.output_bytes if spec.output_bytes is not None else 0.0
    else:
        boundary = spec.blocks[stop - 1].activation_out_bytes
    return PartitionStats(work, params, boundary, sens, critical)


def all_partition_stats(
    spec: ModelSpec, scheme: SplitScheme
) -> tuple[PartitionStats, ...]:
    return tuple(
        partition_stats(spec, scheme, j) for j in range(1, scheme.num_partitions + 1)
    )
