"""Exact n-qubit Pauli-string algebra in the symplectic (bit-mask) picture.

A Pauli string is stored as two n-bit masks plus a global phase exponent,
representing the operator

    i**phase * X(x_mask) * Z(z_mask),

where X(x) applies sigma_x on every site in x and Z(z) applies sigma_z on
every site in z.  Site j corresponds to bit j of the basis-state index and
sigma_z |0> = +|0>.  All products and phases are exact integer arithmetic,
so long stabilizer products never accumulate floating-point drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# Largest site count for which matrices are materialized (2**14 = 16384).
MATRIX_SITE_CAP = 14

_PHASE_VALUES = (1.0, 1.0j, -1.0, -1.0j)
_PHASE_LABELS = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LETTER_OF_BITS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
# sigma_y = i * X * Z, hence the phase exponent 1 attached to "Y".
_BITS_OF_LETTER = {"I": (0, 0, 0), "X": (1, 0, 0), "Y": (1, 1, 1), "Z": (0, 1, 0)}


class PauliError(ValueError):
    pass


def _parity(mask: int) -> int:
    return mask.bit_count() & 1


@dataclass(frozen=True)
class PauliString:
    """A phased Pauli operator on ``n`` sites."""

    n: int
    x_mask: int
    z_mask: int
    phase: int = 0  # exponent of i, mod 4

    def __post_init__(self):
        if self.n < 1:
            raise PauliError("need at least one site")
        full = (1 << self.n) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise PauliError("mask exceeds site count")
        object.__setattr__(self, "phase", self.phase % 4)

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0, 0)

    @classmethod
    def single(cls, n: int, site: int, kind: str) -> "PauliString":
        """sigma_{kind} acting on one site of an n-site register."""
        if not 0 <= site < n:
            raise PauliError(f"site {site} outside register of {n}")
        x, z, p = _BITS_OF_LETTER[kind.upper()]
        return cls(n, x << site, z << site, p)

    @classmethod
    def from_sites(cls, n: int, kind: str, sites) -> "PauliString":
        """Product of identical single-site factors, e.g. a stabilizer."""
        op = cls.identity(n)
        for s in sites:
            op = op * cls.single(n, s, kind)
        return op

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse text like ``+XIZY`` or ``-iZZ`` (site 0 = leftmost letter)."""
        body = label
        sign = 0
        for prefix, k in (("+i", 1), ("-i", 3), ("+", 0), ("-", 2)):
            if label.startswith(prefix):
                body = label[len(prefix):]
                sign = k
                break
        if not body or any(c not in "IXYZ" for c in body):
            raise PauliError(f"bad Pauli label {label!r}")
        x = z = 0
        phase = sign
        for j, c in enumerate(body):
            bx, bz, bp = _BITS_OF_LETTER[c]
            x |= bx << j
            z |= bz << j
            phase += bp
        return cls(len(body), x, z, phase % 4)

    # -- basic queries -----------------------------------------------------

    @property
    def phase_value(self) -> complex:
        return _PHASE_VALUES[self.phase]

    def support(self) -> tuple:
        mask = self.x_mask | self.z_mask
        return tuple(j for j in range(self.n) if (mask >> j) & 1)

    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0 and self.phase == 0

    def is_hermitian(self) -> bool:
        # (i^p X Z)^dag = i^{-p} (-1)^{x.z} X Z
        return (self.phase & 1) == _parity(self.x_mask & self.z_mask)

    def key(self) -> tuple:
        """Mask pair identifying the operator up to phase."""
        return (self.x_mask, self.z_mask)

    # -- algebra -----------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise PauliError("site counts differ")
        phase = self.phase + other.phase + 2 * _parity(self.z_mask & other.x_mask)
        return PauliString(self.n, self.x_mask ^ other.x_mask,
                           self.z_mask ^ other.z_mask, phase % 4)

    def adjoint(self) -> "PauliString":
        phase = (-self.phase + 2 * _parity(self.x_mask & self.z_mask)) % 4
        return PauliString(self.n, self.x_mask, self.z_mask, phase)

    def commutes_with(self, other: "PauliString") -> bool:
        return commutes(self, other)

    # -- conversions -------------------------------------------------------

    def to_label(self) -> str:
        letters = []
        n_y = 0
        for j in range(self.n):
            bits = ((self.x_mask >> j) & 1, (self.z_mask >> j) & 1)
            letters.append(_LETTER_OF_BITS[bits])
            n_y += bits == (1, 1)
        return _PHASE_LABELS[(self.phase - n_y) % 4] + "".join(letters)

    def matrix(self) -> sp.csr_matrix:
        """Sparse 2**n matrix; exactly 2**n nonzeros."""
        if self.n > MATRIX_SITE_CAP:
            raise PauliError(f"n={self.n} exceeds matrix cap {MATRIX_SITE_CAP}")
        dim = 1 << self.n
        cols = np.arange(dim, dtype=np.int64)
        rows = cols ^ self.x_mask
        signs = 1.0 - 2.0 * (np.bitwise_count(cols & self.z_mask) & 1)
        vals = self.phase_value * signs.astype(complex)
        return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))

    def __repr__(self):
        return f"PauliString({self.to_label()!r})"


def pauli_multiply(p: PauliString, q: PauliString) -> PauliString:
    """Exact product p*q with full phase tracking."""
    return p * q


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic form x_p.z_q + z_p.x_q is even."""
    if p.n != q.n:
        raise PauliError("site counts differ")
    return (_parity(p.x_mask & q.z_mask) ^ _parity(p.z_mask & q.x_mask)) == 0


# ---------------------------------------------------------------------------
# Real-coefficient sums of phased Pauli strings
# ---------------------------------------------------------------------------

class PauliSum:
    """Sum of (real coefficient, phased PauliString) terms.

    Canonical form keeps the string phase in {1, i} with a signed real
    coefficient, and distinct (x_mask, z_mask) keys; zero terms are dropped.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms=()):
        self.n = n
        self.terms = self._canonicalize(terms)

    @classmethod
    def from_terms(cls, terms) -> "PauliSum":
        terms = list(terms)
        if not terms:
            raise PauliError("empty term list; use PauliSum(n, [])")
        return cls(terms[0][1].n, terms)

    @classmethod
    def zero(cls, n: int) -> "PauliSum":
        return cls(n, [])

    @classmethod
    def identity(cls, n: int, coeff: float = 1.0) -> "PauliSum":
        return cls(n, [(coeff, PauliString.identity(n))])

    def _canonicalize(self, terms):
        acc: dict = {}
        for coeff, op in terms:
            if op.n != self.n:
                raise PauliError("site counts differ inside sum")
            w = coeff * op.phase_value
            acc[op.key()] = acc.get(op.key(), 0.0) + w
        out = []
        for (x, z), w in sorted(acc.items()):
            mag = abs(w)
            if mag < 1e-15:
                continue
            if abs(w.imag) <= 1e-12 * mag:
                out.append((w.real, PauliString(self.n, x, z, 0)))
            elif abs(w.real) <= 1e-12 * mag:
                out.append((w.imag, PauliString(self.n, x, z, 1)))
            else:
                raise PauliError("coefficient not real times a Pauli phase")
        return tuple(out)

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "PauliSum") -> "PauliSum":
        return PauliSum(self.n, list(self.terms) + list(other.terms))

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + other.scale(-1.0)

    def scale(self, factor: float) -> "PauliSum":
        return PauliSum(self.n, [(factor * c, op) for c, op in self.terms])

    def __mul__(self, other) -> "PauliSum":
        if isinstance(other, PauliString):
            other = PauliSum(self.n, [(1.0, other)])
        prods = [(ca * cb, oa * ob)
                 for ca, oa in self.terms for cb, ob in other.terms]
        return PauliSum(self.n, prods)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n, [(c, op.adjoint()) for c, op in self.terms])

    def is_hermitian(self) -> bool:
        return all(op.is_hermitian() for _, op in self.terms)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        body = " ".join(f"{c:+g}*{op.to_label()}" for c, op in self.terms[:6])
        more = "..." if len(self.terms) > 6 else ""
        return f"PauliSum[{body}{more}]"

    def matrix(self) -> sp.csr_matrix:
        if self.n > MATRIX_SITE_CAP:
            raise PauliError(f"n={self.n} exceeds matrix cap {MATRIX_SITE_CAP}")
        dim = 1 << self.n
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for c, op in self.terms:
            out = out + c * op.matrix()
        return out


def to_matrix(a) -> sp.csr_matrix:
    """Sparse matrix of a PauliString or PauliSum."""
    return a.matrix()


# ---------------------------------------------------------------------------
# GF(2) linear algebra on bit-mask rows
# ---------------------------------------------------------------------------

def gf2_rank(rows) -> int:
    rank = 0
    basis = []
    for row in rows:
        r = row
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
            basis.sort(reverse=True)
            rank += 1
    return rank


def gf2_solve(rows, rhs, nvars: int):
    """Solve parity(rows[i] & x) == rhs[i] for an nvars-bit x.

    Returns a solution mask, or None if the system is inconsistent.
    """
    # augmented rows: unknown bits 0..nvars-1, rhs in bit nvars
    aug = [row | (int(b) << nvars) for row, b in zip(rows, rhs)]
    pivots = []  # (pivot_bit, row)
    for row in aug:
        r = row
        for pbit, prow in pivots:
            if (r >> pbit) & 1:
                r ^= prow
        body = r & ((1 << nvars) - 1)
        if body == 0:
            if r >> nvars:
                return None
            continue
        pbit = body.bit_length() - 1
        pivots.append((pbit, r))
        pivots.sort(reverse=True)
    x = 0
    # back substitution: pivots are in decreasing pivot-bit order
    for pbit, row in sorted(pivots):
        val = (row >> nvars) & 1
        val ^= _parity(row & ((1 << nvars) - 1) & x & ~(1 << pbit))
        if val:
            x |= 1 << pbit
    return x


# ---------------------------------------------------------------------------
# Commutant of a generating set
# ---------------------------------------------------------------------------

_SCAN_SITE_CAP = 8


def commutant_dimension(generators, hamiltonian) -> int:
    """Count Pauli strings commuting with every generator and H term.

    ``hamiltonian`` is a PauliSum whose terms must mutually commute; distinct
    Pauli strings are linearly independent, so the count *is* the dimension of
    the commutant algebra spanned by them.  Exhaustive symplectic scan up to
    8 sites, GF(2) nullity count beyond.
    """
    if isinstance(hamiltonian, PauliSum):
        h_ops = [op for _, op in hamiltonian.terms]
    else:
        h_ops = list(hamiltonian)
    for i, a in enumerate(h_ops):
        for b in h_ops[i + 1:]:
            if not commutes(a, b):
                raise PauliError("Hamiltonian terms do not mutually commute")
    ops = list(generators) + h_ops
    if not ops:
        raise PauliError("no generators")
    n = ops[0].n
    if any(op.n != n for op in ops):
        raise PauliError("site counts differ")
    if n <= _SCAN_SITE_CAP:
        return _commutant_by_scan(ops, n)
    rows = [(op.x_mask << n) | op.z_mask for op in ops]
    return 1 << (2 * n - gf2_rank(rows))


def _commutant_by_scan(ops, n: int) -> int:
    idx = np.arange(1 << (2 * n), dtype=np.uint64)
    cand_x = idx & np.uint64((1 << n) - 1)
    cand_z = idx >> np.uint64(n)
    ok = np.ones(idx.shape, dtype=bool)
    for op in ops:
        form = (np.bitwise_count(cand_x & np.uint64(op.z_mask))
                + np.bitwise_count(cand_z & np.uint64(op.x_mask)))
        ok &= (form & 1) == 0
    return int(ok.sum())


# ---------------------------------------------------------------------------
# Coordinate-format text export of sparse matrices
# ---------------------------------------------------------------------------

def write_coo_text(matrix, path) -> None:
    """Dump a sparse matrix as 'dim nnz' header plus 'row col re im' lines."""
    m = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.nnz}\n")
        for r, c, v in zip(m.row, m.col, m.data):
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def read_coo_text(path) -> sp.csr_matrix:
    with open(path) as fh:
        dim, nnz = (int(t) for t in fh.readline().split())
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            r, c, re, im = fh.readline().split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(re) + 1j * float(im))
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def hermiticity_defect(matrix) -> float:
    """Largest |M - M^dag| entry, for hermitian_flag style checks."""
    d = matrix - matrix.conj().T
    if sp.issparse(d):
        return float(abs(d).max()) if d.nnz else 0.0
    return float(np.abs(d).max()) if d.size else 0.0
