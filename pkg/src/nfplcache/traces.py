"""Synthetic trace generators, trace file ingestion, and observation masks.

Generators are pure functions of their arguments and the supplied
:class:`~nfplcache.core.RngStream`. File ids are dense 0-based integers;
for synthetic traces id 0 is always the most popular file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Catalog, RngStream, Trace


@dataclass(eq=False)
class ObservationMask:
    """Per-request visibility bits: entry t is True when request t is seen."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 1:
            raise ValueError("mask must be one-dimensional")

    def __len__(self) -> int:
        return len(self.bits)


def zipf_probs(n_files: int, alpha: float) -> np.ndarray:
    """Zipf pmf over dense ids: P(i) proportional to 1/(i+1)^alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    weights = 1.0 / np.power(np.arange(1, n_files + 1, dtype=float), alpha)
    return weights / weights.sum()


def gen_zipf(catalog: Catalog, length: int, alpha: float, rng: RngStream) -> Trace:
    """I.i.d. Zipf-distributed requests, sampled by inverse-cdf lookup."""
    if length < 1:
        raise ValueError("length must be positive")
    cum = np.cumsum(zipf_probs(catalog.n_files, alpha))
    cum[-1] = 1.0
    ids = np.searchsorted(cum, rng.random(length), side="right")
    return Trace(catalog, ids)


def gen_zipf_rr(
    catalog: Catalog,
    length: int,
    alpha: float,
    rng: RngStream | None = None,
    counts: np.ndarray | None = None,
) -> Trace:
    """Adversarially ordered trace with Zipf-distributed totals.

    Per-file totals are drawn multinomially, files are relabeled by
    popularity rank (0 = most requests, ties to the lower original id),
    and requests are emitted in descending round-robin cycles: each cycle
    walks the still-active files from the highest label down to 0, and a
    file drops out once its total is exhausted.

    ``counts`` injects the per-file totals directly, bypassing the
    multinomial draw, so tests can assert the emitted order exactly.
    """
    n = catalog.n_files
    if length < 1:
        raise ValueError("length must be positive")
    if counts is None:
        if rng is None:
            raise ValueError("either rng or counts is required")
        counts = rng.multinomial(length, zipf_probs(n, alpha))
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (n,):
        raise ValueError(f"counts must have one entry per file, got {counts.shape}")
    if counts.sum() != length:
        raise ValueError("counts must sum to the trace length")

    order = np.lexsort((np.arange(n), -counts))
    ranked = counts[order]  # non-increasing
    neg = -ranked
    chunks = []
    for cycle in range(int(ranked[0])):
        active = int(np.searchsorted(neg, -cycle, side="left"))
        if active == 0:
            break
        chunks.append(np.arange(active - 1, -1, -1, dtype=np.int64))
    return Trace(catalog, np.concatenate(chunks))


def gen_round_robin(catalog: Catalog, length: int) -> Trace:
    """Equal-popularity cycles N-1, N-2, ..., 0, truncated at length."""
    if length < 1:
        raise ValueError("length must be positive")
    n = catalog.n_files
    cycle = np.arange(n - 1, -1, -1, dtype=np.int64)
    reps = -(-length // n)
    return Trace(catalog, np.tile(cycle, reps)[:length])


def bpo_mask(length: int, p: float, rng: RngStream) -> ObservationMask:
    """I.i.d. Bernoulli(p) visibility bits for a length-T trace."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("observation probability must lie in [0, 1]")
    if length < 1:
        raise ValueError("length must be positive")
    return ObservationMask(rng.bernoulli(p, length))


def save_trace(trace: Trace, path: str | Path) -> None:
    """Write one decimal file id per line (UTF-8)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(map(str, trace.requests.tolist())))
        fh.write("\n")


def _parse_lines(path: Path) -> list[int]:
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip()
            if not token:
                continue
            try:
                raw.append(int(token))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: not an integer id: {token!r}")
    return raw


def _parse_csv(path: Path, id_column: str) -> list[int]:
    raw = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or id_column not in reader.fieldnames:
            raise ValueError(
                f"{path}: id column {id_column!r} not found "
                f"(header: {reader.fieldnames})"
            )
        for row in reader:
            token = (row[id_column] or "").strip()
            try:
                raw.append(int(token))
            except ValueError:
                raise ValueError(
                    f"{path}: line {reader.line_num}: not an integer id: {token!r}"
                )
    return raw


def load_trace_with_mapping(
    path: str | Path,
    fmt: str = "auto",
    id_column: str | None = None,
    remap: str = "auto",
    n_files: int | None = None,
) -> tuple[Trace, dict[int, int]]:
    """Read a trace file; returns the trace and the raw-id -> dense-id map.

    Formats: ``lines`` (one decimal id per line) or ``csv`` (header row,
    id column selected by name); ``auto`` picks csv for .csv paths.

    Raw ids are remapped to dense 0-based ids by first appearance. With
    ``remap='auto'`` (default) files whose ids are already dense 0-based
    are kept verbatim, so saving and reloading a trace is the identity.
    ``remap='never'`` keeps raw ids and sizes the catalog as max id + 1.
    ``n_files`` overrides the inferred catalog size (it must cover every
    mapped id; useful when a trace does not request its whole catalog).
    """
    path = Path(path)
    if fmt == "auto":
        fmt = "csv" if path.suffix.lower() == ".csv" else "lines"
    if fmt == "lines":
        raw = _parse_lines(path)
    elif fmt == "csv":
        if id_column is None:
            raise ValueError("csv format requires an id column name")
        raw = _parse_csv(path, id_column)
    else:
        raise ValueError("fmt must be 'auto', 'lines' or 'csv'")
    if not raw:
        raise ValueError(f"{path}: empty trace file")
    if remap not in ("auto", "always", "never"):
        raise ValueError("remap must be 'auto', 'always' or 'never'")

    distinct = set(raw)
    already_dense = min(distinct) == 0 and max(distinct) == len(distinct) - 1
    if remap == "never" or (remap == "auto" and already_dense):
        if min(distinct) < 0:
            raise ValueError(f"{path}: negative ids require remapping")
        mapping = {i: i for i in sorted(distinct)}
        requests = np.asarray(raw, dtype=np.int64)
        inferred = max(distinct) + 1
    else:
        mapping = {}
        for rid in raw:
            if rid not in mapping:
                mapping[rid] = len(mapping)
        requests = np.fromiter((mapping[r] for r in raw), dtype=np.int64, count=len(raw))
        inferred = len(mapping)

    size = inferred if n_files is None else n_files
    if size < inferred:
        raise ValueError(f"{path}: n_files={n_files} smaller than max mapped id + 1")
    return Trace(Catalog(size), requests), mapping


def load_trace(
    path: str | Path,
    fmt: str = "auto",
    id_column: str | None = None,
    remap: str = "auto",
    n_files: int | None = None,
) -> Trace:
    """Like :func:`load_trace_with_mapping`, returning only the trace."""
    return load_trace_with_mapping(path, fmt, id_column, remap, n_files)[0]
