"""LDPC code containers: alist / QC shift-table parsing, QC lifting, degree profiles
and the vertical layer partition used by the layered decoder.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from collections import Counter
from typing import Sequence

import numpy as np


class CodeFormatError(ValueError):
    """Malformed alist or shift-table input."""


class LayerConflictError(ValueError):
    """A check node meets one vertical layer more than once."""


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Sparse binary parity-check matrix stored as row and column adjacency.

    ``rows[m]`` lists the (0-based, sorted) VN indices of check ``m``;
    ``cols[n]`` lists the CN indices of variable ``n``.
    """

    m: int
    n: int
    rows: tuple
    cols: tuple

    def __post_init__(self):
        if len(self.rows) != self.m or len(self.cols) != self.n:
            raise ValueError("adjacency length does not match matrix shape")
        edges_r = set()
        for r, vns in enumerate(self.rows):
            if len(vns) == 0:
                raise ValueError(f"row {r} is empty")
            if len(set(vns)) != len(vns):
                raise ValueError(f"duplicate entry in row {r}")
            edges_r.update((r, v) for v in vns)
        edges_c = set()
        for c, cns in enumerate(self.cols):
            if len(cns) == 0:
                raise ValueError(f"column {c} is empty")
            if len(set(cns)) != len(cns):
                raise ValueError(f"duplicate entry in column {c}")
            edges_c.update((r, c) for r in cns)
        if edges_r != edges_c:
            raise ValueError("rows and cols describe different edge sets")

    @classmethod
    def from_edges(cls, m: int, n: int, edges) -> "ParityCheckMatrix":
        rows = [[] for _ in range(m)]
        cols = [[] for _ in range(n)]
        for r, c in edges:
            rows[r].append(c)
            cols[c].append(r)
        return cls(m, n, tuple(tuple(sorted(x)) for x in rows), tuple(tuple(sorted(x)) for x in cols))

    @classmethod
    def from_dense(cls, h) -> "ParityCheckMatrix":
        h = np.asarray(h)
        r, c = np.nonzero(h)
        return cls.from_edges(h.shape[0], h.shape[1], zip(r.tolist(), c.tolist()))

    @property
    def num_edges(self) -> int:
        return sum(len(r) for r in self.rows)

    def to_dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        for r, vns in enumerate(self.rows):
            h[r, list(vns)] = 1
        return h

    def edge_arrays(self):
        """CSR view used by the decoders.

        Returns ``(cn_ptr, edge_vn, vn_ptr, vn_edges)``: edges are numbered in
        row-major order, ``vn_edges[vn_ptr[v]:vn_ptr[v+1]]`` are the edge ids
        incident to VN ``v``.
        """
        cn_ptr = np.zeros(self.m + 1, dtype=np.int64)
        cn_ptr[1:] = np.cumsum([len(r) for r in self.rows])
        edge_vn = np.fromiter((v for r in self.rows for v in r), dtype=np.int64, count=int(cn_ptr[-1]))
        order = np.argsort(edge_vn, kind="stable")
        vn_ptr = np.zeros(self.n + 1, dtype=np.int64)
        vn_ptr[1:] = np.cumsum(np.bincount(edge_vn, minlength=self.n))
        return cn_ptr, edge_vn, vn_ptr, order.astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return (self.m, self.n, self.rows) == (other.m, other.n, other.rows)

    def __hash__(self):
        return hash((self.m, self.n, self.rows))


@dataclass(frozen=True)
class QcBaseMatrix:
    """Base matrix of a quasi-cyclic code; ``-1`` marks an all-zero block."""

    mb: int
    nb: int
    z: int
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != self.mb or any(len(r) != self.nb for r in self.entries):
            raise ValueError("entries shape does not match (mb, nb)")
        for r, row in enumerate(self.entries):
            for c, s in enumerate(row):
                if s < -1 or s >= self.z:
                    raise ValueError(f"shift {s} at ({r},{c}) outside [-1, {self.z})")

    @classmethod
    def from_array(cls, arr, z: int) -> "QcBaseMatrix":
        arr = np.asarray(arr, dtype=int)
        return cls(arr.shape[0], arr.shape[1], z, tuple(tuple(int(v) for v in row) for row in arr))

    def mask(self) -> np.ndarray:
        return np.asarray(self.entries) >= 0


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree profile, stored as exact fractions.

    ``rho[i]`` is the fraction of edges on degree-``i`` check nodes and
    ``theta[j]`` the fraction on degree-``j`` variable nodes.
    """

    rho: dict
    theta: dict
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name, d in (("rho", self.rho), ("theta", self.theta)):
            if not d:
                raise ValueError(f"{name} is empty")
            total = sum(d.values())
            if abs(float(total) - 1.0) > 1e-12:
                raise ValueError(f"{name} fractions sum to {float(total)}, expected 1")
            for deg, frac in d.items():
                if deg < 1 or not (0 < frac <= 1):
                    raise ValueError(f"invalid {name} entry {deg}: {frac}")

    @classmethod
    def from_fractions(cls, rho: dict, theta: dict) -> "DegreeDistribution":
        """Build from possibly rounded decimal fractions, renormalising exactly."""

        def norm(d):
            fr = {int(k): Fraction(str(v)) for k, v in d.items()}
            tot = sum(fr.values())
            return {k: v / tot for k, v in sorted(fr.items())}

        return cls(norm(rho), norm(theta))

    @property
    def dc_max(self) -> int:
        return max(self.rho)

    @property
    def dv_max(self) -> int:
        return max(self.theta)

    def rho_float(self) -> dict:
        return {k: float(v) for k, v in sorted(self.rho.items())}

    def theta_float(self) -> dict:
        return {k: float(v) for k, v in sorted(self.theta.items())}

    def design_rate(self) -> float:
        return 1.0 - float(sum(v / k for k, v in self.rho.items()) / sum(v / k for k, v in self.theta.items()))


@dataclass(frozen=True)
class LayerPlan:
    """Vertical layers: ``layers[h]`` is the sorted array of VN indices of layer ``h``."""

    layers: tuple

    @property
    def nb(self) -> int:
        return len(self.layers)


# --------------------------------------------------------------------------- alist


def parse_alist(text: str) -> ParityCheckMatrix:
    """Parse MacKay alist text (1-based, zero padding allowed) into a matrix."""
    lines = []
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s:
            lines.append((no, s))
    pos = 0

    def ints(expected=None):
        nonlocal pos
        if pos >= len(lines):
            raise CodeFormatError("unexpected end of alist input")
        no, s = lines[pos]
        pos += 1
        try:
            vals = [int(t) for t in s.split()]
        except ValueError:
            raise CodeFormatError(f"line {no}: non-integer token") from None
        if expected is not None and len(vals) < expected:
            raise CodeFormatError(f"line {no}: expected {expected} integers, got {len(vals)}")
        return no, vals

    no, hdr = ints()
    if len(hdr) != 2 or min(hdr) <= 0:
        raise CodeFormatError(f"line {no}: malformed header, expected 'n m'")
    n, m = hdr
    no, mx = ints()
    if len(mx) != 2:
        raise CodeFormatError(f"line {no}: malformed header, expected max column/row degrees")
    no, col_deg = ints(n)
    no_r, row_deg = ints(m)
    col_deg, row_deg = col_deg[:n], row_deg[:m]

    cols = []
    for c in range(n):
        no, vals = ints()
        nz = [v for v in vals if v != 0]
        if len(nz) != col_deg[c]:
            raise CodeFormatError(f"line {no}: degree mismatch for column {c + 1}")
        for v in nz:
            if not 1 <= v <= m:
                raise CodeFormatError(f"line {no}: index out of range ({v})")
        if len(set(nz)) != len(nz):
            raise CodeFormatError(f"line {no}: duplicate edge in column {c + 1}")
        cols.append([v - 1 for v in nz])
    rows = []
    for r in range(m):
        no, vals = ints()
        nz = [v for v in vals if v != 0]
        if len(nz) != row_deg[r]:
            raise CodeFormatError(f"line {no}: degree mismatch for row {r + 1}")
        for v in nz:
            if not 1 <= v <= n:
                raise CodeFormatError(f"line {no}: index out of range ({v})")
        if len(set(nz)) != len(nz):
            raise CodeFormatError(f"line {no}: duplicate edge in row {r + 1}")
        rows.append([v - 1 for v in nz])

    e_cols = {(r, c) for c, cs in enumerate(cols) for r in cs}
    e_rows = {(r, c) for r, vs in enumerate(rows) for c in vs}
    if e_cols != e_rows:
        raise CodeFormatError(f"line {no}: row and column adjacency lists disagree")
    try:
        return ParityCheckMatrix.from_edges(m, n, e_rows)
    except ValueError as exc:
        raise CodeFormatError(str(exc)) from None


def serialize_alist(h: ParityCheckMatrix) -> str:
    col_deg = [len(c) for c in h.cols]
    row_deg = [len(r) for r in h.rows]
    out = [f"{h.n} {h.m}", f"{max(col_deg)} {max(row_deg)}",
           " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    out += [" ".join(str(r + 1) for r in c) for c in h.cols]
    out += [" ".join(str(v + 1) for v in r) for r in h.rows]
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------- QC matrices


def parse_qc_table(text: str) -> QcBaseMatrix:
    """Parse a shift table: ``Mb Nb Z`` then ``Mb`` rows of ``Nb`` shifts."""
    lines = [(no, s.strip()) for no, s in enumerate(text.splitlines(), start=1)
             if s.strip() and not s.strip().startswith("#")]
    if not lines:
        raise CodeFormatError("empty shift table")
    no, s = lines[0]
    try:
        mb, nb, z = (int(t) for t in s.split())
    except ValueError:
        raise CodeFormatError(f"line {no}: malformed header, expected 'Mb Nb Z'") from None
    if len(lines) - 1 != mb:
        raise CodeFormatError(f"expected {mb} shift rows, found {len(lines) - 1}")
    entries = []
    for no, s in lines[1:]:
        try:
            row = [int(t) for t in s.split()]
        except ValueError:
            raise CodeFormatError(f"line {no}: non-integer shift") from None
        if len(row) != nb:
            raise CodeFormatError(f"line {no}: expected {nb} shifts, got {len(row)}")
        for v in row:
            if v < -1 or v >= z:
                raise CodeFormatError(f"line {no}: index out of range (shift {v}, Z={z})")
        entries.append(tuple(row))
    return QcBaseMatrix(mb, nb, z, tuple(entries))


def serialize_qc_table(base: QcBaseMatrix) -> str:
    out = [f"{base.mb} {base.nb} {base.z}"]
    out += [" ".join(f"{v:3d}" for v in row) for row in base.entries]
    return "\n".join(out) + "\n"


def expand_qc(base: QcBaseMatrix) -> ParityCheckMatrix:
    """Lift a base matrix: shift ``s`` at ``(r, c)`` links VN ``c*Z+k`` to CN ``r*Z+(k+s)%Z``."""
    z = base.z
    edges = []
    k = np.arange(z)
    for r, row in enumerate(base.entries):
        for c, s in enumerate(row):
            if s < 0:
                continue
            if s >= z:
                raise ValueError(f"shift {s} >= Z={z}")
            edges.extend(zip((r * z + (k + s) % z).tolist(), (c * z + k).tolist()))
    return ParityCheckMatrix.from_edges(base.mb * z, base.nb * z, edges)


# --------------------------------------------------------------- degree profiles


def degree_distributions(h: ParityCheckMatrix) -> DegreeDistribution:
    e = h.num_edges
    cdeg = Counter(len(r) for r in h.rows)
    vdeg = Counter(len(c) for c in h.cols)
    rho = {d: Fraction(d * cnt, e) for d, cnt in sorted(cdeg.items())}
    theta = {d: Fraction(d * cnt, e) for d, cnt in sorted(vdeg.items())}
    return DegreeDistribution(rho, theta, extra={"m": h.m, "n": h.n, "edges": e})


def base_degree_distributions(base: QcBaseMatrix) -> DegreeDistribution:
    """Degree profile from base-matrix row/column weights (lifting preserves it)."""
    mask = base.mask()
    e = int(mask.sum())
    rho = {int(d): Fraction(int(d) * cnt, e) for d, cnt in sorted(Counter(mask.sum(1).tolist()).items())}
    theta = {int(d): Fraction(int(d) * cnt, e) for d, cnt in sorted(Counter(mask.sum(0).tolist()).items())}
    return DegreeDistribution(rho, theta, extra={"m": base.mb * base.z, "n": base.nb * base.z,
                                                 "edges": e * base.z})


def layer_partition(base: QcBaseMatrix, h: ParityCheckMatrix | None = None) -> LayerPlan:
    """One layer per base column, in ascending order, validated on the lifted graph."""
    if h is None:
        h = expand_qc(base)
    z = base.z
    layers = []
    for c in range(base.nb):
        vns = np.arange(c * z, (c + 1) * z)
        seen = {}
        for v in vns.tolist():
            for cn in h.cols[v]:
                if cn in seen:
                    raise LayerConflictError(
                        f"layer conflict: CN {cn} meets VNs {seen[cn]} and {v} in layer {c}")
                seen[cn] = v
        layers.append(vns)
    return LayerPlan(tuple(layers))


def validate_layer_plan(h: ParityCheckMatrix, plan: LayerPlan) -> None:
    covered = np.concatenate(plan.layers) if plan.layers else np.array([], dtype=int)
    if covered.size != h.n or not np.array_equal(np.sort(covered), np.arange(h.n)):
        raise LayerConflictError("layers do not partition the variable nodes")
    for li, layer in enumerate(plan.layers):
        seen = set()
        for v in np.asarray(layer).tolist():
            for cn in h.cols[v]:
                if cn in seen:
                    raise LayerConflictError(f"layer conflict: CN {cn} meets layer {li} twice")
                seen.add(cn)


def qc_layer_plan_from_matrix(h: ParityCheckMatrix, z: int) -> LayerPlan:
    """Layers of ``z`` consecutive columns; validated against ``h``."""
    if h.n % z:
        raise ValueError("N is not a multiple of Z")
    plan = LayerPlan(tuple(np.arange(c * z, (c + 1) * z) for c in range(h.n // z)))
    validate_layer_plan(h, plan)
    return plan


# ----------------------------------------------------------------------- encoding


def generator_matrix(h: ParityCheckMatrix) -> np.ndarray:
    """Generator matrix (rows span the null space of ``h`` over GF(2))."""
    a = h.to_dense().astype(np.uint8).copy()
    m, n = a.shape
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        nz = np.nonzero(a[row:, col])[0]
        if nz.size == 0:
            continue
        p = row + nz[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        others = np.nonzero(a[:, col])[0]
        others = others[others != row]
        a[others] ^= a[row]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in set(pivots)]
    g = np.zeros((len(free), n), dtype=np.uint8)
    for i, f in enumerate(free):
        g[i, f] = 1
        for r, p in enumerate(pivots):
            g[i, p] = a[r, f]
    return g


def check_syndrome(h: ParityCheckMatrix, bits: Sequence[int]) -> bool:
    bits = np.asarray(bits)
    if bits.shape[0] != h.n:
        raise ValueError("bit vector length does not match N")
    return all(int(bits[list(r)].sum()) % 2 == 0 for r in h.rows)
