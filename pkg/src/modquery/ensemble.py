"""Consensus index: an ensemble of Louvain optima from random cut-set starts.

Binary layout (little-endian)::

    magic "MQIX" | version u32 | flags u32 | n u64 | P u64 | master_seed u64
    | p_cut f64 | graph_fingerprint u64 | P x n u32 labels | P f64 q_values
    | CRC-64/ECMA-182 of everything before it (u64)

A ``<path>.nodes`` node table is written next to the index.
"""
from __future__ import annotations

import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import crcmod.predefined
import numpy as np

from ._io import atomic_write
from ._seeding import derive_seed
from .errors import (ChecksumError, FingerprintError, IndexFormatError,
                     PreconditionError, VersionError)
from .graph import Graph, read_node_table, require_connected, write_node_table
from .louvain import LouvainConfig, louvain
from .partition import CutSeedConfig, random_cut_partition

log = logging.getLogger(__name__)

MAGIC = b"MQIX"
VERSION = 1
_HEADER = struct.Struct("<4sIIQQQdQ")
_crc64 = crcmod.predefined.mkPredefinedCrcFun("crc-64-we")


def crc64(data: bytes) -> int:
    """CRC-64/ECMA-182 (poly 0x42F0E1EBA9EA3693, init/xorout all ones)."""
    return _crc64(data)


AUTO = "auto"


def auto_cut_probability(g: Graph, branching: float = 0.5) -> float:
    """Cut probability that leaves the kept-edge graph subcritical.

    Keeping each edge with probability ``1 - p`` gives a branching factor of
    ``(1 - p) (<k^2> - <k>) / <k>``; this returns the ``p`` at which it equals
    ``branching``, clipped to ``[0.5, 1]``.  On dense graphs a cut
    probability of 0.5 leaves one giant start component, which Louvain
    cannot split; this opt-in setting yields higher-modularity ensembles.
    """
    k = np.diff(g.indptr).astype(np.float64)
    excess = (k * k).mean() - k.mean()
    if excess <= 0:
        return 0.5
    return float(np.clip(1.0 - branching * k.mean() / excess, 0.5, 1.0))


@dataclass(frozen=True)
class IndexBuildConfig:
    num_partitions: int = 2000
    # probability that an edge is cut when drawing a start partition, or
    # "auto" for auto_cut_probability(g)
    p_cut: float | str = 0.5
    master_seed: int = 0
    louvain: LouvainConfig = field(default_factory=LouvainConfig)
    workers: int = 1

    def __post_init__(self):
        if self.num_partitions < 1:
            raise ValueError("num_partitions must be >= 1")
        if self.p_cut != AUTO:
            CutSeedConfig(float(self.p_cut))

    def resolved_p_cut(self, g: Graph) -> float:
        return auto_cut_probability(g) if self.p_cut == AUTO else float(self.p_cut)


@dataclass(frozen=True, eq=False)
class EnsembleIndex:
    labels: np.ndarray      # (P, n) uint32, row r = partition of run r
    q_values: np.ndarray    # (P,) float64
    master_seed: int
    p_cut: float
    fingerprint: int
    ids: tuple

    @property
    def n(self) -> int:
        return self.labels.shape[1]

    @property
    def num_partitions(self) -> int:
        return self.labels.shape[0]

    def __len__(self):
        return self.num_partitions

    @property
    def global_labels(self) -> np.ndarray:
        """Labels offset per partition so community ids are unique index-wide."""
        cached = self.__dict__.get("_global")
        if cached is None:
            lab = self.labels.astype(np.int64)
            counts = lab.max(axis=1) + 1
            offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
            cached = lab + offsets[:, None]
            cached.setflags(write=False)
            object.__setattr__(self, "_global", cached)
            object.__setattr__(self, "_ncomm", int(counts.sum()))
        return cached

    @property
    def total_communities(self) -> int:
        self.global_labels
        return self.__dict__["_ncomm"]

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(MAGIC, VERSION, 0, self.n, self.num_partitions,
                              self.master_seed, self.p_cut, self.fingerprint)
        body = (header + self.labels.astype("<u4").tobytes()
                + self.q_values.astype("<f8").tobytes())
        return body + struct.pack("<Q", crc64(body))

    def same_as(self, other: "EnsembleIndex") -> bool:
        return (self.to_bytes() == other.to_bytes()) and self.ids == other.ids


def _one_run(g: Graph, cfg: IndexBuildConfig, p_cut: float, r: int):
    seed = derive_seed(cfg.master_seed, r)
    start = random_cut_partition(g, CutSeedConfig(p_cut, seed))
    lcfg = LouvainConfig(cfg.louvain.min_delta_q, seed, cfg.louvain.max_levels, cfg.louvain.shuffle)
    res = louvain(g, start, lcfg)
    return res.partition.labels.astype(np.uint32), res.q


def build_index(g: Graph, cfg: IndexBuildConfig = IndexBuildConfig(), progress=None) -> EnsembleIndex:
    """Run ``cfg.num_partitions`` independent Louvain optimisations.

    Run ``r`` uses seed ``derive_seed(master_seed, r)`` both for its cut set
    and for its scan order, so the result does not depend on ``workers``.
    The numba kernels release the GIL, so a thread pool gives real
    parallelism.
    """
    require_connected(g)
    if g.m == 0:
        raise PreconditionError("graph has no edges")
    P = cfg.num_partitions
    p_cut = cfg.resolved_p_cut(g)
    labels = np.empty((P, g.n), dtype=np.uint32)
    q = np.empty(P)

    def run(r):
        labels[r], q[r] = _one_run(g, cfg, p_cut, r)
        if progress is not None:
            progress(r)

    if cfg.workers <= 1:
        for r in range(P):
            run(r)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(run, range(P)))
    labels.setflags(write=False)
    q.setflags(write=False)
    return EnsembleIndex(labels, q, cfg.master_seed, p_cut, g.fingerprint(), g.ids)


def save_index(idx: EnsembleIndex, path) -> None:
    atomic_write(path, idx.to_bytes())
    write_node_table(idx.ids, os.fspath(path) + ".nodes")


def index_from_bytes(data: bytes, ids=None) -> EnsembleIndex:
    if len(data) < _HEADER.size + 8:
        raise ChecksumError(f"index data too short ({len(data)} bytes)")
    body, (stored,) = data[:-8], struct.unpack("<Q", data[-8:])
    if crc64(body) != stored:
        raise ChecksumError("index checksum mismatch (file truncated or corrupted)")
    magic, version, flags, n, P, seed, p_cut, fp = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise IndexFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported index version {version}")
    if flags != 0:
        raise IndexFormatError(f"unknown flags {flags:#x}")
    expect = _HEADER.size + 4 * n * P + 8 * P
    if len(body) != expect:
        raise IndexFormatError(f"index body is {len(body)} bytes, header implies {expect}")
    off = _HEADER.size
    labels = np.frombuffer(body, dtype="<u4", count=n * P, offset=off).reshape(P, n).astype(np.uint32)
    q = np.frombuffer(body, dtype="<f8", count=P, offset=off + 4 * n * P).astype(np.float64)
    labels.setflags(write=False)
    q.setflags(write=False)
    if ids is None:
        ids = [str(i) for i in range(n)]
    if len(ids) != n:
        raise IndexFormatError(f"node table has {len(ids)} ids, index has n={n}")
    return EnsembleIndex(labels, q, seed, p_cut, fp, tuple(ids))


def load_index(path, g: Graph | None = None) -> EnsembleIndex:
    """Read an index; if ``g`` is given its fingerprint must match."""
    with open(path, "rb") as fh:
        data = fh.read()
    nodes = os.fspath(path) + ".nodes"
    ids = read_node_table(nodes) if os.path.exists(nodes) else None
    idx = index_from_bytes(data, ids)
    if g is not None:
        if g.fingerprint() != idx.fingerprint:
            raise FingerprintError("index was built on a different graph")
        if g.ids != idx.ids:
            raise FingerprintError("node table does not match the graph's id table")
    return idx
