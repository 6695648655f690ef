"""Full multi-frame texture descriptor and its CSV cache format.

An image is evolved under the pseudo-parabolic solver, every frame (the
original included) is encoded with both CLBP code types over all configured
(P, R) neighbourhoods, and the normalized histograms are concatenated in a
fixed order: code type outermost (sign, then magnitude), neighbourhood pair
in configured order, frame index k = 0..K innermost.  With the default
configuration the vector has (10 + 18 + 26 + 26) * 2 * 51 = 8160 entries.
"""

from __future__ import annotations

import os
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clbp import PatternKind, build_spec, sign_and_magnitude_histograms
from .pde import PseudoParabolicSystem, SolverConfig, as_field, assemble_system, evolve_sequence

DEFAULT_PAIRS = ((8, 1), (16, 2), (24, 3), (24, 4))


@dataclass(frozen=True)
class DescriptorConfig:
    solver: SolverConfig = SolverConfig()
    pairs: tuple = DEFAULT_PAIRS
    kinds: tuple = (PatternKind.SIGN, PatternKind.MAGNITUDE)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("at least one (P, R) pair is required")
        if not self.kinds:
            raise ValueError("at least one pattern kind is required")

    @property
    def length(self) -> int:
        bins = sum(p + 2 for p, _ in self.pairs)
        return bins * len(self.kinds) * (self.solver.steps + 1)


@dataclass(frozen=True)
class DescriptorVector:
    values: np.ndarray
    source_id: str = ""


def describe(image, config: DescriptorConfig = DescriptorConfig(), source_id: str = "",
             system: PseudoParabolicSystem | None = None) -> DescriptorVector:
    """Compute the concatenated multi-frame descriptor of one image.

    Pass a prebuilt ``system`` (matching the image size and solver
    coefficients) to share one factorization across many images.
    """
    u = as_field(image)
    specs = [build_spec(p, r) for p, r in config.pairs]
    margin = max(s.margin for s in specs)
    height, width = u.shape
    if width <= 2 * margin or height <= 2 * margin:
        raise ValueError(
            f"image {width}x{height} too small for the largest radius: "
            f"needs at least {2 * margin + 1} pixels per side"
        )
    frames = evolve_sequence(u, config.solver, system=system)
    # blocks[kind][pair][k] in computation order; concatenation reorders.
    blocks = {kind: [[None] * len(frames) for _ in specs] for kind in config.kinds}
    for k, frame in enumerate(frames):
        for j, spec in enumerate(specs):
            sign_hist, mag_hist = sign_and_magnitude_histograms(frame, spec)
            per_kind = {PatternKind.SIGN: sign_hist.bins, PatternKind.MAGNITUDE: mag_hist.bins}
            for kind in config.kinds:
                blocks[kind][j][k] = per_kind[kind]
    ordered = [blocks[kind][j][k]
               for kind in config.kinds
               for j in range(len(specs))
               for k in range(len(frames))]
    return DescriptorVector(values=np.concatenate(ordered), source_id=source_id)


def describe_batch(images, config: DescriptorConfig = DescriptorConfig(),
                   workers: int = 1) -> list[DescriptorVector]:
    """Describe ``(id, image)`` pairs, sharing one factorization per size.

    Output order matches input order regardless of scheduling; each element
    is bit-identical to a standalone :func:`describe` call.
    """
    items = [(str(source_id), as_field(image)) for source_id, image in images]
    if not items:
        return []
    systems: dict[tuple[int, int], PseudoParabolicSystem] = {}
    if config.solver.steps > 0:
        for _, u in items:
            if u.shape not in systems:
                systems[u.shape] = assemble_system(u.shape[1], u.shape[0], config.solver)

    def one(item):
        source_id, u = item
        return describe(u, config, source_id=source_id, system=systems.get(u.shape))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, items))
    return [one(item) for item in items]


@dataclass(frozen=True)
class CacheRow:
    """One descriptor cache record: image id, class label, protocol group."""

    id: str
    label: str
    group: str
    values: np.ndarray


def write_cache(path, rows) -> None:
    """Write descriptor rows as CSV: header ``id,label,group,f0,...``.

    Feature values are serialized with 17 significant digits (exact float64
    round-trip).  The file appears atomically: it is written to a temporary
    sibling and renamed on completion, so an interrupted run leaves no
    partial cache behind.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to write an empty descriptor cache")
    dim = len(rows[0].values)
    for row in rows:
        if len(row.values) != dim:
            raise ValueError(f"inconsistent descriptor length for id {row.id!r}")
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label", "group"] + [f"f{i}" for i in range(dim)])
            for row in rows:
                writer.writerow([row.id, row.label, row.group]
                                + [format(v, ".17g") for v in row.values])
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def read_cache(path) -> list[CacheRow]:
    """Read a descriptor cache written by :func:`write_cache`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["id", "label", "group"]:
            raise ValueError(f"{path}: not a descriptor cache (bad header)")
        dim = len(header) - 3
        rows = []
        for line, record in enumerate(reader, start=2):
            if len(record) != dim + 3:
                raise ValueError(f"{path}:{line}: expected {dim + 3} fields, got {len(record)}")
            values = np.asarray(record[3:], dtype=np.float64)
            rows.append(CacheRow(id=record[0], label=record[1], group=record[2], values=values))
    return rows
