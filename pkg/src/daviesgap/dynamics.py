"""Semigroup evolution of observables and autocorrelation traces.

The full generator splits as i*delta + L with delta diagonal in the
stabilizer eigenbasis and commuting with the dissipative part, so the
coherent factor is an exact phase and only exp(t*L) needs Krylov work.
Matrix exponential action uses an Arnoldi approximation with step
subdivision until two refinements agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import build_frame
from .davies import SuperOperatorRep, ThermalParams, build_generator, \
    default_couplings, GeneratorError
from .models import ModelSpec
from .pauli import PauliString


class EvolutionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Krylov exponential action
# ---------------------------------------------------------------------------

def _arnoldi_step(matvec, v, t, m):
    """exp(t*M) v via an m-dimensional Arnoldi approximation."""
    n = v.shape[0]
    beta = np.linalg.norm(v)
    if beta == 0.0:
        return v.copy()
    basis = np.zeros((m + 1, n), dtype=complex)
    h = np.zeros((m + 1, m), dtype=complex)
    basis[0] = v / beta
    used = m
    for j in range(m):
        w = matvec(basis[j])
        coeffs = basis[:j + 1].conj() @ w
        h[:j + 1, j] = coeffs
        w -= coeffs @ basis[:j + 1]
        h[j + 1, j] = np.linalg.norm(w)
        if abs(h[j + 1, j]) < 1e-14:
            used = j + 1
            break
        basis[j + 1] = w / h[j + 1, j]
    e = sla.expm(t * h[:used, :used])[:, 0]
    return beta * (e @ basis[:used])


def expm_action(matrix, v, t: float, tol: float = 1e-9, krylov_dim: int = 30,
                max_doublings: int = 24, steps_hint: int = 1) -> np.ndarray:
    """exp(t*matrix) @ v with step subdivision until refinements agree.

    The step count doubles until two successive results differ by less than
    ``tol`` relative to the vector norm; failure to stabilize raises.  A
    ``steps_hint`` (e.g. carried over from a previous call on a similar
    interval) seeds the subdivision without changing the acceptance test.
    """
    w, _ = _expm_action_steps(matrix, v, t, tol, krylov_dim, max_doublings,
                              steps_hint)
    return w


def _expm_action_steps(matrix, v, t, tol, krylov_dim, max_doublings,
                       steps_hint):
    if t == 0.0:
        return np.array(v, dtype=complex, copy=True), steps_hint
    matvec = (lambda x: matrix @ x)
    m = min(krylov_dim, matrix.shape[0])
    steps = max(1, int(steps_hint))
    # for a contraction semigroup, accuracy relative to the initial norm is
    # the best roundoff allows once the state has decayed
    floor = np.linalg.norm(v)
    prev = None
    for _ in range(max_doublings):
        w = np.array(v, dtype=complex, copy=True)
        dt = t / steps
        # coarse attempts may overflow before being rejected below
        with np.errstate(all="ignore"):
            for _ in range(steps):
                w = _arnoldi_step(matvec, w, dt, m)
        with np.errstate(all="ignore"):
            nw = float(np.linalg.norm(w))
        if not (np.all(np.isfinite(w)) and math.isfinite(nw)):
            # Krylov projection overflowed; only finer steps count
            prev = None
            steps *= 2
            continue
        if prev is not None:
            scale = max(nw, floor, 1e-300)
            diff = float(np.linalg.norm(w - prev))
            if math.isfinite(diff) and diff <= tol * scale:
                return w, max(1, steps // 2)
        prev = w
        steps *= 2
    raise EvolutionError("exponential action did not stabilize under subdivision")


def evolve(rep, a_vec: np.ndarray, t: float, tol: float = 1e-9) -> np.ndarray:
    """Apply the semigroup at time t to an operator vector.

    A Liouville rep stores minus the generator, so it evolves as exp(-t*M);
    the same sign applies to the Hilbert-Schmidt master operator.  Plain
    matrices and linear operators are exponentiated as given.
    """
    if t < 0:
        raise EvolutionError("evolution time must be nonnegative")
    if isinstance(rep, SuperOperatorRep):
        matrix = -rep.matrix
    else:
        matrix = rep
    return expm_action(matrix, np.asarray(a_vec, dtype=complex), t, tol=tol)


def dissipative_matrix(lrep: SuperOperatorRep):
    """The generator L itself (the rep stores -L)."""
    return -lrep.matrix


def full_generator_matrix(lrep: SuperOperatorRep):
    """i*delta + L as a sparse matrix (normal, not Hermitian)."""
    delta = lrep.delta_diagonal()
    return (-lrep.matrix + sp.diags(1j * delta)).tocsr()


# ---------------------------------------------------------------------------
# Autocorrelation traces
# ---------------------------------------------------------------------------

@dataclass
class AutocorrelationTrace:
    observable: str
    times: np.ndarray
    values_full: np.ndarray         # <A, e^{tG} A^dag>_beta
    values_dissipative: np.ndarray  # <A, e^{tL} A^dag>_beta, real
    fitted_rate: float = float("nan")
    meta: dict = field(default_factory=dict)

    def schwarz_slack(self) -> float:
        """min over the grid of (dissipative^2 - |full|^2); >= 0 up to noise."""
        return float(np.min(self.values_dissipative ** 2
                            - np.abs(self.values_full) ** 2))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,re_full,im_full,dissipative\n")
            for t, f, d in zip(self.times, self.values_full,
                               self.values_dissipative):
                fh.write(f"{t:.12g},{f.real:.12g},{f.imag:.12g},{d:.12g}\n")


def default_time_grid(gap_estimate: float, points: int = 60) -> np.ndarray:
    """Logarithmic grid resolving transients through the asymptotic decay."""
    if gap_estimate <= 0:
        raise EvolutionError("need a positive gap estimate for the default grid")
    return np.geomspace(0.01 / gap_estimate, 30.0 / gap_estimate, points)


def autocorrelation(model: ModelSpec, tp: ThermalParams, couplings=None,
                    observable: PauliString = None, grid=None,
                    gap_estimate: float = None, frame=None,
                    lrep: SuperOperatorRep = None, tol: float = 1e-9,
                    label: str = None) -> AutocorrelationTrace:
    """Both autocorrelation traces of a mean-zero observable.

    The full trace uses the complete evolution including the coherent part;
    the dissipative trace drops it.  The decay rate is fitted on the tail
    half of the grid, skipping values below 1e-12.
    """
    if observable is None:
        observable = model.logicals[0][1]
    if lrep is None:
        if frame is None:
            frame = build_frame(model)
        if couplings is None:
            couplings = default_couplings(model)
        lrep = build_generator(model, couplings=couplings, tp=tp, frame=frame)
    frame = lrep.frame
    rho = lrep.rho
    d = frame.dim

    a = frame.matrix_of(observable).toarray()
    mean = np.sum(rho * np.diagonal(a))
    if abs(mean) > 1e-10:
        raise GeneratorError(f"observable has Gibbs mean {mean:.3e}, expected 0")
    norm = math.sqrt(abs(np.sum((a.conj() * a) * rho[None, :])))
    a = a / norm

    if grid is None:
        if gap_estimate is None:
            from .spectral import certify
            gap_estimate = certify(model, tp, couplings=couplings,
                                   frame=frame).gap
        grid = default_time_grid(gap_estimate)
    grid = np.asarray(grid, dtype=float)

    gram = np.repeat(rho, d)
    a_vec = a.reshape(-1, order="F")
    adag_vec = a.conj().T.reshape(-1, order="F")
    delta = lrep.delta_diagonal()
    neg_l = lrep.matrix

    full = np.zeros(len(grid), dtype=complex)
    dissip = np.zeros(len(grid), dtype=float)
    psi = adag_vec.copy()
    t_prev = 0.0
    hint, dt_prev = 1, None
    for i, t in enumerate(grid):
        dt = t - t_prev
        if dt_prev:
            hint = max(1, int(hint * dt / dt_prev))
        psi, hint = _expm_action_steps(-neg_l, psi, dt, tol, 30, 24, hint)
        dt_prev = dt if dt > 0 else dt_prev
        t_prev = t
        # delta commutes with the dissipative part: e^{tG} = e^{it delta} e^{tL}
        phased = np.exp(1j * t * delta) * psi
        full[i] = np.sum(a_vec.conj() * gram * phased)
        val = np.sum(a_vec.conj() * gram * psi)
        dissip[i] = val.real

    if label is None:
        label = observable.to_label() if isinstance(observable, PauliString) \
            else repr(observable)
    trace = AutocorrelationTrace(
        observable=label, times=grid, values_full=full,
        values_dissipative=dissip,
        meta={"betaJ": tp.beta * tp.coupling, "model": model.kind,
              "gap_estimate": gap_estimate})
    trace.fitted_rate = fit_decay_rate(grid, dissip)
    return trace


def fit_decay_rate(times, values, floor: float = 1e-12) -> float:
    """Least-squares slope of -log(values) over the tail half of the grid."""
    n = len(times)
    sel = np.arange(n) >= n // 2
    sel &= np.asarray(values) > floor
    if sel.sum() < 2:
        return float("nan")
    t = np.asarray(times)[sel]
    y = np.log(np.asarray(values)[sel])
    slope, _ = np.polyfit(t, y, 1)
    return float(-slope)


def relaxation_time(trace: AutocorrelationTrace, rate_floor: float = 1e-9) -> float:
    """1 / fitted decay rate; a non-decaying trace signals a conserved quantity."""
    rate = trace.fitted_rate
    if not math.isfinite(rate) or rate <= rate_floor:
        raise EvolutionError(
            "trace does not decay: the observable overlaps a conserved quantity "
            "(non-ergodic coupling set)")
    return 1.0 / rate
