"""Tensor-product Hilbert spaces for the electric and dual descriptions.

Factor layout: matter sites first (row-major site order, so fermion sign
strings are a contiguous prefix), then gauge cells — links for the
electric description (`links_E`), plaquettes followed by the global rotors
for the dual one (`plaqs_M`).  The first factor varies slowest.

Gauge cells carry truncated rotors: integer levels -cutoff..+cutoff with
ladder operators that *annihilate* at the ends rather than wrap.  The
raising ladder steps the level variable up by one: on interior levels
conjugating the level operator by the ladder shifts it, and commutators
with divergence-type constraints come out exactly as in the untruncated
model, which is what the acceptance checks exercise.

Matter species:

- ``staggered_fermion``: one two-level factor per site; the dynamical
  charge is the site occupation minus one on odd-parity sites.
- ``hardcore_boson`` / ``truncated_boson``: particle and antiparticle
  number states per site (hardcore = occupation capped at one); the local
  field mixes particle annihilation with antiparticle creation so that one
  operator carries a full unit of charge.

A hard product-dimension guard protects against accidentally requesting an
exponentially large space; raise `max_dim` deliberately to go past it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import Lattice, divergence_matrix, site_parity, sites

MATTER_KINDS = ("none", "staggered_fermion", "hardcore_boson", "truncated_boson")
GAUGE_KINDS = ("links_E", "plaqs_M")

DEFAULT_MAX_DIM = 2**26


class MemoryGuardError(RuntimeError):
    """Requested Hilbert space exceeds the configured dimension guard."""


@dataclass
class LocalOp:
    """A small operator on one tensor factor, tagged for fermion strings."""

    name: str
    matrix: sp.csr_matrix
    fermion_parity: int = 0  # 1 for operators that flip fermion number


def _csr(mat) -> sp.csr_matrix:
    return sp.csr_matrix(np.asarray(mat, dtype=complex))


# ---------------------------------------------------------------------------
# Local operator families
# ---------------------------------------------------------------------------


def rotor_ops(cutoff: int) -> dict[str, LocalOp]:
    """Truncated integer rotor: levels -cutoff..cutoff.

    'level': diagonal level operator.  'raise'/'lower': unit steps that
    annihilate at +cutoff / -cutoff respectively.
    """
    if cutoff < 1:
        raise ValueError("rotor cutoff must be >= 1")
    d = 2 * cutoff + 1
    lev = np.diag(np.arange(-cutoff, cutoff + 1).astype(float))
    up = np.zeros((d, d))
    for k in range(d - 1):
        up[k + 1, k] = 1.0
    return {
        "level": LocalOp("level", _csr(lev)),
        "raise": LocalOp("raise", _csr(up)),
        "lower": LocalOp("lower", _csr(up.T)),
    }


def fermion_site_ops() -> dict[str, LocalOp]:
    """Single staggered-fermion site: basis |empty>, |occupied>."""
    c = np.array([[0.0, 1.0], [0.0, 0.0]])
    n = np.array([[0.0, 0.0], [0.0, 1.0]])
    return {
        "annihilate": LocalOp("annihilate", _csr(c), fermion_parity=1),
        "create": LocalOp("create", _csr(c.T), fermion_parity=1),
        "number": LocalOp("number", _csr(n)),
    }


def boson_site_ops(n_max: int) -> dict[str, LocalOp]:
    """Particle/antiparticle pair per site with occupations 0..n_max each.

    The site field mixes the two species, (a + i b^dag)/sqrt(2), so a single
    application moves the site charge n_a - n_b by one unit; its commutator
    with the charge is canonical even at finite n_max because the truncation
    cuts both species at the same level.
    """
    if n_max < 1:
        raise ValueError("boson occupation cap must be >= 1")
    d1 = n_max + 1
    low = np.zeros((d1, d1))
    for k in range(1, d1):
        low[k - 1, k] = math.sqrt(k)
    eye = np.eye(d1)
    a = np.kron(low, eye)
    b = np.kron(eye, low)
    na = np.kron(np.diag(np.arange(d1, dtype=float)), eye)
    nb = np.kron(eye, np.diag(np.arange(d1, dtype=float)))
    psi = (a + 1j * b.T) / math.sqrt(2.0)
    return {
        "field": LocalOp("field", _csr(psi)),
        "field_dag": LocalOp("field_dag", _csr(psi.conj().T)),
        "charge": LocalOp("charge", _csr(na - nb)),
        "n_total": LocalOp("n_total", _csr(na + nb)),
    }


# ---------------------------------------------------------------------------
# Space specification
# ---------------------------------------------------------------------------


@dataclass
class HilbertSpec:
    """Factorized Hilbert space for one lattice and formulation."""

    lattice: Lattice
    gauge_kind: str
    cutoff: int
    matter: str = "none"
    n_max: int = 1
    global_cutoff: int | None = None
    max_dim: int = DEFAULT_MAX_DIM

    # filled in __post_init__
    dims: list[int] = field(default_factory=list, repr=False)
    n_matter: int = field(default=0, repr=False)
    n_gauge: int = field(default=0, repr=False)
    n_globals: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.gauge_kind not in GAUGE_KINDS:
            raise ValueError(f"gauge_kind must be one of {GAUGE_KINDS}")
        if self.matter not in MATTER_KINDS:
            raise ValueError(f"matter must be one of {MATTER_KINDS}")
        if self.gauge_kind == "plaqs_M" and self.lattice.dim != 2:
            raise ValueError("the compact dual description is built for 2D lattices")
        if self.global_cutoff is None:
            self.global_cutoff = self.cutoff
        lat = self.lattice
        self.n_matter = 0 if self.matter == "none" else lat.n_sites
        if self.gauge_kind == "links_E":
            self.n_gauge = lat.n_links
            self.n_globals = 0
        else:
            self.n_gauge = lat.n_plaqs
            self.n_globals = lat.n_global_loops
        self.dims = (
            [self._matter_dim()] * self.n_matter
            + [2 * self.cutoff + 1] * self.n_gauge
            + [2 * self.global_cutoff + 1] * self.n_globals
        )
        total = 1
        for d in self.dims:
            total *= d
            if total > self.max_dim:
                raise MemoryGuardError(
                    f"Hilbert dimension exceeds guard {self.max_dim}; "
                    "raise max_dim explicitly to proceed"
                )

    def _matter_dim(self) -> int:
        if self.matter == "staggered_fermion":
            return 2
        if self.matter == "hardcore_boson":
            return 4
        return (self.n_max + 1) ** 2

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=object)) if self.dims else 1

    # factor addressing -----------------------------------------------------
    def matter_pos(self, site: int) -> int:
        if self.matter == "none":
            raise ValueError("no matter factors in this space")
        return site

    def gauge_pos(self, cell: int) -> int:
        return self.n_matter + cell

    def global_pos(self, direction: int) -> int:
        if self.n_globals == 0:
            raise ValueError("no global rotor factors in this space")
        return self.n_matter + self.n_gauge + direction

    def matter_ops(self) -> dict[str, LocalOp]:
        if self.matter == "staggered_fermion":
            return fermion_site_ops()
        if self.matter == "hardcore_boson":
            return boson_site_ops(1)
        if self.matter == "truncated_boson":
            return boson_site_ops(self.n_max)
        raise ValueError("no matter factors in this space")

    def gauge_ops(self) -> dict[str, LocalOp]:
        return rotor_ops(self.cutoff)

    def global_ops(self) -> dict[str, LocalOp]:
        return rotor_ops(self.global_cutoff)


# ---------------------------------------------------------------------------
# Embedding and assembly
# ---------------------------------------------------------------------------


def _identity(n: int) -> sp.csr_matrix:
    return sp.identity(n, format="csr", dtype=complex)


def factor_diagonal(spec: HilbertSpec, pos: int, local_diag: np.ndarray) -> np.ndarray:
    """Full-space diagonal of a local diagonal operator at factor `pos`."""
    left = int(np.prod(spec.dims[:pos], dtype=object)) if pos else 1
    right = int(np.prod(spec.dims[pos + 1 :], dtype=object)) if pos + 1 < len(spec.dims) else 1
    return np.tile(np.repeat(np.asarray(local_diag), right), left)


def _fermion_string_diag(spec: HilbertSpec, pos: int) -> np.ndarray:
    """Diagonal of the sign string over matter factors left of `pos`."""
    total = spec.total_dim
    signs = np.ones(total)
    z = np.array([1.0, -1.0])
    for k in range(min(pos, spec.n_matter)):
        signs *= factor_diagonal(spec, k, z)
    return signs


def embed(spec: HilbertSpec, pos: int, op: LocalOp) -> sp.csr_matrix:
    """Embed a local operator at factor `pos`, with fermion string if odd."""
    dl = int(np.prod(spec.dims[:pos], dtype=object)) if pos else 1
    dr = int(np.prod(spec.dims[pos + 1 :], dtype=object)) if pos + 1 < len(spec.dims) else 1
    full = sp.kron(sp.kron(_identity(dl), op.matrix), _identity(dr), format="csr")
    if op.fermion_parity % 2:
        string = _fermion_string_diag(spec, pos)
        full = sp.diags(string).tocsr() @ full
    return full


def assemble(spec: HilbertSpec, ops: list[tuple[int, LocalOp]]) -> sp.csr_matrix:
    """Operator product of embedded factors, applied right to left.

    The list reads like the written product: ops[0] acts last.  Fermionic
    entries pick up their sign strings individually, which composes to the
    standard convention for multi-site strings.
    """
    total = spec.total_dim
    out = _identity(total)
    for pos, op in reversed(ops):
        out = embed(spec, pos, op) @ out
    return out.tocsr()


# ---------------------------------------------------------------------------
# Charges, Gauss constraints, sectors
# ---------------------------------------------------------------------------


def charge_diagonals(spec: HilbertSpec) -> np.ndarray:
    """(n_sites, total_dim) dynamical charge diagonal per site."""
    lat = spec.lattice
    total = spec.total_dim
    out = np.zeros((lat.n_sites, total))
    if spec.matter == "none":
        return out
    parities = site_parity(lat)
    if spec.matter == "staggered_fermion":
        n_diag = np.array([0.0, 1.0])
        for s in range(lat.n_sites):
            q = factor_diagonal(spec, spec.matter_pos(s), n_diag)
            if parities[s] < 0:
                q = q - 1.0
            out[s] = q
    else:
        ops = spec.matter_ops()
        local_q = np.real(ops["charge"].matrix.diagonal())
        for s in range(lat.n_sites):
            out[s] = factor_diagonal(spec, spec.matter_pos(s), local_q)
    return out


def gauge_level_diagonals(spec: HilbertSpec) -> np.ndarray:
    """(n_gauge, total_dim) level diagonal per gauge cell factor."""
    lev = np.arange(-spec.cutoff, spec.cutoff + 1).astype(float)
    return np.stack(
        [factor_diagonal(spec, spec.gauge_pos(c), lev) for c in range(spec.n_gauge)]
    )


def global_level_diagonals(spec: HilbertSpec) -> np.ndarray:
    lev = np.arange(-spec.global_cutoff, spec.global_cutoff + 1).astype(float)
    return np.stack(
        [factor_diagonal(spec, spec.global_pos(i), lev) for i in range(spec.n_globals)]
    )


def gauss_diagonal(spec: HilbertSpec, site: int, static_charge: float = 0.0) -> np.ndarray:
    """Diagonal of the Gauss constraint at one site: div E - Q - q."""
    if spec.gauge_kind != "links_E":
        raise ValueError("Gauss constraints act on the electric description")
    lat = spec.lattice
    row = divergence_matrix(lat).getrow(site)
    levels = gauge_level_diagonals(spec)
    g = np.zeros(spec.total_dim)
    for link, coeff in zip(row.indices, row.data):
        g += coeff * levels[link]
    if spec.matter != "none":
        g -= charge_diagonals(spec)[site]
    return g - static_charge


def gauss_operator(spec: HilbertSpec, site: int, static_charge: float = 0.0) -> sp.csr_matrix:
    return sp.diags(gauss_diagonal(spec, site, static_charge)).tocsr()


@dataclass
class BasisMap:
    """Selection of basis states spanning a diagonal-constraint sector."""

    spec: HilbertSpec
    indices: np.ndarray
    isometry: sp.csr_matrix  # total_dim x n_selected

    @property
    def dim(self) -> int:
        return len(self.indices)


def gauss_sector_basis(spec: HilbertSpec, static_charges: np.ndarray | None = None) -> BasisMap:
    """Basis of the simultaneous kernel of every Gauss constraint.

    Vectorized over sites: one pass over the level diagonals instead of one
    full-space operator per site, which matters at the largest cutoffs.
    """
    if spec.gauge_kind != "links_E":
        raise ValueError("Gauss constraints act on the electric description")
    lat = spec.lattice
    if static_charges is None:
        static_charges = np.zeros(lat.n_sites)
    levels = gauge_level_diagonals(spec)  # (n_links, D)
    div_levels = divergence_matrix(lat) @ levels  # (n_sites, D)
    if spec.matter != "none":
        div_levels = div_levels - charge_diagonals(spec)
    div_levels = div_levels - np.asarray(static_charges)[:, None]
    mask = np.all(np.abs(div_levels) < 1e-9, axis=0)
    idx = np.nonzero(mask)[0]
    iso = sp.csr_matrix(
        (np.ones(len(idx)), (idx, np.arange(len(idx)))),
        shape=(spec.total_dim, len(idx)),
    )
    return BasisMap(spec, idx, iso)


def sector_basis(spec: HilbertSpec, conditions: list[tuple[np.ndarray, float]]) -> BasisMap:
    """States on which every (diagonal, value) condition holds to 1e-9."""
    mask = np.ones(spec.total_dim, dtype=bool)
    for diag, value in conditions:
        mask &= np.abs(np.asarray(diag) - value) < 1e-9
    idx = np.nonzero(mask)[0]
    iso = sp.csr_matrix(
        (np.ones(len(idx)), (idx, np.arange(len(idx)))),
        shape=(spec.total_dim, len(idx)),
    )
    return BasisMap(spec, idx, iso)


def project(op: sp.spmatrix, basis: BasisMap) -> sp.csr_matrix:
    """Compress an operator to a sector: S^dag A S."""
    return (basis.isometry.T.conjugate() @ op @ basis.isometry).tocsr()


def hermiticity_defect(op: sp.spmatrix) -> float:
    d = op - op.conjugate().T
    return 0.0 if d.nnz == 0 else float(np.abs(d.data).max())
