"""Positive master Hamiltonian on Hilbert-Schmidt space and its blocks.

The unitary map X -> X rho^{1/2} turns minus the generator into the Hermitian
positive semidefinite operator

    K = sum_{alpha, w >= 0} g(w) [ (S_L - eta S_R)*(S_L - eta S_R)
                                 + (Sd_R - eta Sd_L)*(Sd_R - eta Sd_L) ],

with S = S_alpha(w), Sd its adjoint, eta = exp(-beta*w/2), and
g(w) = rate(w)/2 for w > 0, rate(0)/4 at w = 0.  K and -L share their
spectrum; the identity survives as the kernel vector rho^{1/2}.

Blocks: conjugation by any stabilizer or logical operator commutes with the
generator, so operator space splits into joint charge sectors labeled by a
stabilizer flip pattern and a logical sector.  Every block is K-invariant and
small (2^k with k independent stabilizers), which is what makes desk-scale
gap certification cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .basis import StabilizerFrame
from .davies import SuperOperatorRep, GeneratorError
from .models import ModelSpec
from .pauli import PauliString, PauliSum, gf2_solve


def _g_weight(rate: float, omega: float, tol: float = 1e-12) -> float:
    return rate / 2.0 if omega > tol else rate / 4.0


def _component_k(matrix: sp.csr_matrix, eta: float) -> sp.csr_matrix:
    """(S_L - eta S_R)*(S_L - eta S_R) + (Sd_R - eta Sd_L)*(Sd_R - eta Sd_L).

    Both factors annihilate rho^{1/2}: S rho^{1/2} = eta rho^{1/2} S and
    Sd rho^{1/2} = eta^{-1} rho^{1/2} Sd for a component at frequency w.
    """
    dim = matrix.shape[0]
    ident = sp.identity(dim, format="csr", dtype=complex)
    adj = matrix.conj().T.tocsr()
    a = sp.kron(ident, matrix, format="csr") - eta * sp.kron(matrix.T, ident, format="csr")
    b = sp.kron(matrix.conj(), ident, format="csr") - eta * sp.kron(ident, adj, format="csr")
    return (a.conj().T @ a + b.conj().T @ b).tocsr()


@dataclass
class MasterHamiltonian:
    rep: SuperOperatorRep
    kernel_witness: np.ndarray
    component_index: list = field(default_factory=list)  # (coupling_index, omega)

    @property
    def matrix(self):
        return self.rep.matrix

    @property
    def frame(self) -> StabilizerFrame:
        return self.rep.frame

    def component(self, i: int) -> sp.csr_matrix:
        """Materialize one positive-frequency summand of K."""
        comp = self._components[i]
        eta = math.exp(-self.rep.beta * comp.omega / 2.0)
        return _g_weight(comp.rate, comp.omega) * _component_k(comp.matrix, eta)

    def kernel_residual(self) -> float:
        v = self.kernel_witness
        return float(np.linalg.norm(self.matrix @ v))


def to_master(lrep: SuperOperatorRep) -> MasterHamiltonian:
    """Unitarily transport -L to Hilbert-Schmidt space via X -> X rho^{1/2}."""
    if lrep.space != "liouville":
        raise GeneratorError("to_master expects a Liouville-space generator")
    if lrep.rho is None or lrep.frame is None:
        raise GeneratorError("generator lacks Gibbs weights or basis frame")
    dim = lrep.frame.dim
    k = sp.csr_matrix((dim * dim, dim * dim), dtype=complex)
    used = []
    comps = []
    for comp in lrep.components:
        if comp.omega < -1e-12:
            continue  # covered by the adjoint of the positive-frequency term
        eta = math.exp(-lrep.beta * comp.omega / 2.0)
        k = k + _g_weight(comp.rate, comp.omega) * _component_k(comp.matrix, eta)
        used.append((comp.coupling_index, comp.omega))
        comps.append(comp)

    witness = np.zeros(dim * dim, dtype=complex)
    witness[np.arange(dim) * (dim + 1)] = np.sqrt(lrep.rho)
    rep = SuperOperatorRep(matrix=k.tocsr(), space="hilbert-schmidt",
                           beta=lrep.beta, frame=lrep.frame, rho=lrep.rho,
                           components=lrep.components, meta=dict(lrep.meta))
    master = MasterHamiltonian(rep=rep, kernel_witness=witness,
                               component_index=used)
    master._components = comps
    return master


# ---------------------------------------------------------------------------
# Charge-sector blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockLabel:
    """One joint charge sector: stabilizer flip pattern plus logical sector.

    flip: bits over independent stabilizers (bra/ket syndrome difference);
    mu:   bits over logical pairs whose X operator is present in the sector;
    nu:   bits over logical pairs whose Z operator is present.
    """

    flip: int
    mu: int
    nu: int
    n_indep: int
    n_logical: int

    @property
    def dim(self) -> int:
        return 1 << self.n_indep

    @property
    def sector(self) -> str:
        if self.n_logical == 1:
            return {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}[(self.mu, self.nu)]
        parts = [f"Z{i + 1}" for i in range(self.n_logical) if (self.nu >> i) & 1]
        parts += [f"X{i + 1}" for i in range(self.n_logical) if (self.mu >> i) & 1]
        return "".join(parts) or "I"

    def describe(self) -> dict:
        return {"flip": self.flip, "sector": self.sector, "dim": self.dim}


def block_labels(frame: StabilizerFrame) -> list:
    k, ell = frame.n_indep, frame.n_logical
    return [BlockLabel(flip=f, mu=mu, nu=nu, n_indep=k, n_logical=ell)
            for f in range(1 << k) for mu in range(1 << ell) for nu in range(1 << ell)]


def _logical_x_chain(frame: StabilizerFrame, u: int, subset: int):
    """Apply the X logicals in `subset` to state u; returns (state, phase)."""
    phase = 1.0 + 0.0j
    for i in range(frame.n_logical):
        if (subset >> i) & 1:
            phase *= frame.x_phase[i][u]
            u = int(frame.x_perm[i][u])
    return u, phase


def block_basis(frame: StabilizerFrame, label: BlockLabel) -> sp.csc_matrix:
    """Orthonormal isometry from the block onto operator space.

    Column sigma is the logical-charge projection of the matrix unit
    |sigma, 0><sigma ^ flip, mu|, an eigenvector of every stabilizer and
    logical conjugation with the charges encoded in the label.
    """
    k, ell = frame.n_indep, frame.n_logical
    dim = frame.dim
    ncols = 1 << k
    scale = 2.0 ** (-ell / 2.0)
    rows, cols, vals = [], [], []
    for sigma in range(ncols):
        u0 = frame.state_index(sigma, 0)
        v0 = frame.state_index(sigma ^ label.flip, label.mu)
        for subset in range(1 << ell):
            sign = 1.0 - 2.0 * ((subset & label.nu).bit_count() & 1)
            u, pu = _logical_x_chain(frame, u0, subset)
            v, pv = _logical_x_chain(frame, v0, subset)
            rows.append(frame.vec_index(u, v))
            cols.append(sigma)
            vals.append(scale * sign * pu * np.conj(pv))
    return sp.csc_matrix((vals, (rows, cols)), shape=(dim * dim, ncols))


def block_matrix(rep_matrix, basis: sp.csc_matrix) -> np.ndarray:
    m = basis.conj().T @ (rep_matrix @ basis)
    m = m.toarray() if sp.issparse(m) else np.asarray(m)
    return (m + m.conj().T) / 2.0


def block_decompose(k_or_rep, model: ModelSpec = None) -> list:
    """All (BlockLabel, SuperOperatorRep) pairs of a Hilbert-Schmidt operator.

    The direct sum of the returned blocks is unitarily equal to the input;
    per-block matrices are dense Hermitian of size 2^(independent stabilizers).
    """
    rep = k_or_rep.rep if isinstance(k_or_rep, MasterHamiltonian) else k_or_rep
    if rep.space != "hilbert-schmidt":
        raise GeneratorError("block decomposition acts on Hilbert-Schmidt reps")
    frame = rep.frame
    out = []
    for label in block_labels(frame):
        basis = block_basis(frame, label)
        sub = block_matrix(rep.matrix, basis)
        out.append((label, SuperOperatorRep(
            matrix=sub, space="hilbert-schmidt", beta=rep.beta, frame=frame,
            rho=rep.rho, meta={"block": label.describe()})))
    return out


def block_offdiagonal_defect(rep, label: BlockLabel, seed: int = 0) -> float:
    """|| K b - B (B^dag K b) || for a random block vector b; zero if invariant."""
    basis = block_basis(rep.frame, label)
    rng = np.random.default_rng(seed)
    coeff = rng.standard_normal(basis.shape[1])
    v = basis @ coeff
    w = rep.matrix @ v
    return float(np.linalg.norm(w - basis @ (basis.conj().T @ w)))


# ---------------------------------------------------------------------------
# Sign-flipped restriction for the torus x-type generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XBlockSpec:
    """Fine block of the sigma_x generator on the torus.

    star_flip_sites: comb sites carrying sigma_z in the star-flip operator;
    nu / mu: logical sector bits as in BlockLabel.
    """

    star_flip_sites: tuple = ()
    nu: int = 0
    mu: int = 0


def _sandwich_signs(model: ModelSpec, block: XBlockSpec) -> np.ndarray:
    zmask = 0
    for j in block.star_flip_sites:
        zmask ^= 1 << j
    for i in range(model.n_logical):
        if (block.nu >> i) & 1:
            zmask ^= model.logicals[i][1].z_mask
    signs = np.ones(model.n_sites)
    for j in range(model.n_sites):
        if (zmask >> j) & 1:
            signs[j] = -1.0
    return signs


def _signed_master(lrep: SuperOperatorRep, signs: np.ndarray) -> sp.csr_matrix:
    """K with the left-right cross (sandwich) terms sign-flipped per site."""
    dim = lrep.frame.dim
    ident = sp.identity(dim, format="csr", dtype=complex)
    total = sp.csr_matrix((dim * dim, dim * dim), dtype=complex)
    for comp in lrep.components:
        if comp.omega < -1e-12:
            continue
        site = comp.coupling.support()
        if len(site) != 1:
            raise GeneratorError("sign-flip rule needs single-site couplings")
        sgn = signs[site[0]]
        eta = math.exp(-lrep.beta * comp.omega / 2.0)
        s = comp.matrix
        sd = s.conj().T.tocsr()
        d = (sd @ s + eta ** 2 * (s @ sd)).tocsr()
        diag = sp.kron(ident, d, format="csr") + sp.kron(d.T, ident, format="csr")
        cross = 2.0 * eta * (sp.kron(s.T, sd, format="csr")
                             + sp.kron(s.conj(), s, format="csr"))
        total = total + _g_weight(comp.rate, comp.omega) * (diag - sgn * cross)
    return total.tocsr()


class _ToricBlockBasis:
    """Operator-product bases for the fine x-type blocks of a torus model."""

    def __init__(self, frame: StabilizerFrame):
        model = frame.model
        if model.kind != "toric" or model.partition is None:
            raise GeneratorError("x-type blocks require a toric model")
        self.frame = frame
        self.model = model
        L = model.geometry["L"]
        indep = frame.indep
        self.star_idx = [i for i in indep if model.stabilizers[i].z_mask == 0]
        self.plaq_idx = [i for i in indep if model.stabilizers[i].x_mask == 0]
        self.snake = list(model.partition.snake)
        # per-independent-plaquette rows of the snake flip system
        rows = []
        for p in self.plaq_idx:
            row = 0
            for pos, j in enumerate(self.snake):
                sx = PauliString.single(model.n_sites, j, "X")
                if not sx.commutes_with(model.stabilizers[p]):
                    row |= 1 << pos
            rows.append(row)
        self.flip_rows = rows

    def snake_flip_operator(self, pattern: int) -> PauliString:
        subset = gf2_solve(self.flip_rows,
                           [(pattern >> i) & 1 for i in range(len(self.plaq_idx))],
                           len(self.snake))
        if subset is None:
            raise GeneratorError("snake does not span the requested flip")
        sites = [self.snake[pos] for pos in range(len(self.snake))
                 if (subset >> pos) & 1]
        return PauliString.from_sites(self.model.n_sites, "X", sites)

    def _projector(self, idx_list, pattern: int) -> PauliSum:
        n = self.model.n_sites
        proj = PauliSum.identity(n)
        for pos, i in enumerate(idx_list):
            eps = 1.0 - 2.0 * ((pattern >> pos) & 1)
            half = PauliSum(n, [(0.5, PauliString.identity(n)),
                                (0.5 * eps, self.model.stabilizers[i])])
            proj = proj * half
        return proj

    def sector_operator(self, block: XBlockSpec) -> PauliSum:
        n = self.model.n_sites
        op = PauliSum.identity(n)
        for i in range(self.model.n_logical):
            if (block.nu >> i) & 1:
                op = op * self.model.logicals[i][1]
        for i in range(self.model.n_logical):
            if (block.mu >> i) & 1:
                op = op * self.model.logicals[i][0]
        return op

    def plaquette_factor_basis(self) -> sp.csc_matrix:
        """Columns (m, m'): normalized vec of P_plaq(m) * U_snake(m ^ m')."""
        return self._assemble(lambda m, mp: self._projector(self.plaq_idx, m)
                              * self.snake_flip_operator(m ^ mp))

    def full_block_basis(self, block: XBlockSpec) -> sp.csc_matrix:
        """Columns (alpha, m, m') spanning the fine block."""
        n = self.model.n_sites
        flip_op = PauliString.from_sites(n, "Z", block.star_flip_sites)
        sector = self.sector_operator(block)

        def build(alpha, m, mp):
            return (self._projector(self.star_idx, alpha)
                    * PauliSum(n, [(1.0, flip_op)])
                    * self._projector(self.plaq_idx, m)
                    * self.snake_flip_operator(m ^ mp)
                    * sector)

        cols = []
        for alpha in range(1 << len(self.star_idx)):
            for m in range(1 << len(self.plaq_idx)):
                for mp in range(1 << len(self.plaq_idx)):
                    cols.append(self._vec(build(alpha, m, mp)))
        return sp.hstack(cols, format="csc")

    def _assemble(self, build) -> sp.csc_matrix:
        cols = []
        for m in range(1 << len(self.plaq_idx)):
            for mp in range(1 << len(self.plaq_idx)):
                cols.append(self._vec(build(m, mp)))
        return sp.hstack(cols, format="csc")

    def _vec(self, op: PauliSum) -> sp.csc_matrix:
        m = self.frame.matrix_of(op)
        v = sp.csc_matrix(m.toarray().reshape((-1, 1), order="F"))
        nrm = sp.linalg.norm(v)
        if nrm < 1e-12:
            raise GeneratorError("degenerate block basis vector")
        return v / nrm


def sign_flip_restriction(master_x: MasterHamiltonian, block: XBlockSpec,
                          check: bool = True, atol: float = 1e-12) -> SuperOperatorRep:
    """Restriction of the torus sigma_x master operator to one fine block.

    Sites carrying a sigma_z of the block's star-flip or Z-logical content get
    their sandwich terms sign-flipped; everything else is unchanged.  With
    ``check`` the result is compared against the directly projected block of
    the untouched operator, which must agree to ``atol``.
    """
    lrep = master_x.rep
    model = lrep.frame.model
    helper = _ToricBlockBasis(lrep.frame)
    signs = _sandwich_signs(model, block)
    signed = _signed_master(lrep, signs)
    w_p = helper.plaquette_factor_basis()
    direct = block_matrix(signed, w_p)

    if check:
        w_full = helper.full_block_basis(block)
        projected = block_matrix(lrep.matrix, w_full)
        n_star = 1 << len(helper.star_idx)
        want = np.kron(np.eye(n_star), direct)
        defect = np.abs(projected - want).max()
        if defect > atol:
            raise GeneratorError(
                f"sign-flip restriction defect {defect:.3e} exceeds {atol:.1e}")

    return SuperOperatorRep(matrix=direct, space="hilbert-schmidt",
                            beta=lrep.beta, frame=lrep.frame, rho=lrep.rho,
                            meta={"x_block": {"star_flip_sites": list(block.star_flip_sites),
                                              "nu": block.nu, "mu": block.mu}})
