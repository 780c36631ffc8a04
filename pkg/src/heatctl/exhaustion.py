"""Dirichlet problems on nested centered boxes vs a large reference box.

States supported in a small box are expanded exactly (closed-form sine
overlaps) in every box basis, semigroups act in their own eigensystems, and
differences are evaluated through cross inner products, so no interpolation
error enters.  The reference box stands in for the unbounded domain.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _trig
from .control import ControlProblem, _phi, gramian_condition, min_norm_control
from .errors import FidelityError, ParameterError
from .spectral import DomainSpec, build_basis, galerkin_schrodinger


def centered_box(L, d=1, boundary="dirichlet"):
    """``(-L/2, L/2)^d`` as a domain."""
    return DomainSpec(boundary, (float(L),) * d, (-float(L) / 2,) * d)


def box_basis(L, omega_cut, d=1, n_max=512):
    """Dirichlet basis on the centered box with frequencies up to ``omega_cut``."""
    return build_basis(centered_box(L, d), float(omega_cut) ** 2 * d, n_max=n_max)


def cross_gram(basis_a, basis_b, boxes):
    """Matrix of ``int_box phi^a_i phi^b_j`` summed over absolute boxes."""
    n_a, n_b = basis_a.n, basis_b.n
    out = np.zeros((n_a, n_b))
    for box in boxes:
        block = np.ones((n_a, n_b))
        for ax, (lo, hi) in enumerate(box):
            Aa, wa, pa = basis_a.axis_atoms(ax)
            Ab, wb, pb = basis_b.axis_atoms(ax)
            block *= _trig.cross_integrals(Aa, wa, pa, Ab, wb, pb, lo, hi)
        out += block
    return out


def overlap_matrix(dst_basis, src_basis):
    """Coefficients of zero-extended src modes in the dst basis."""
    return cross_gram(dst_basis, src_basis, [src_basis.domain.box()])


def _contains(outer, inner):
    return all(o_lo <= i_lo + 1e-12 and i_hi <= o_hi + 1e-12
               for (o_lo, o_hi), (i_lo, i_hi) in zip(outer, inner))


def embed_zero_extension(u, src_basis, dst_basis):
    """Zero-extend a coefficient vector into a larger box basis.

    Returns ``(coeffs, fidelity)`` with ``fidelity = ||coeffs|| / ||u||``;
    the loss ``1 - fidelity`` is the truncation cost of the dst basis.
    """
    src_box = src_basis.domain.box()
    dst_box = dst_basis.domain.box()
    if not _contains(dst_box, src_box) or dst_basis.domain.volume <= src_basis.domain.volume:
        raise ParameterError("target box must strictly contain the source box")
    u = np.asarray(u, dtype=float)
    coeffs = overlap_matrix(dst_basis, src_basis) @ u
    norm = float(np.linalg.norm(u))
    fidelity = float(np.linalg.norm(coeffs)) / norm if norm > 0 else 1.0
    return coeffs, fidelity


def bump_state(basis, R=1.0):
    """Lowest Dirichlet mode of the centered box of side ``R``, in ``basis``.

    The bump is unit-norm on its own support; the returned coefficients are
    its exact projection onto ``basis``.
    """
    d = basis.domain.dimension
    src = build_basis(centered_box(R, d), d * (math.pi / R) ** 2 + 1e-9, n_max=8)
    if src.n != 1:
        raise ParameterError("bump construction expected a single mode")
    return overlap_matrix(basis, src)[:, 0]


@dataclass(frozen=True)
class ExhaustionRun:
    """Common data of an exhaustion experiment on boxes ``(-L/2, L/2)^d``."""

    L_list: tuple
    L_ref: float
    t: float
    R: float = 1.0
    omega_cut: float = 60.0
    d: int = 1
    potential: object = None
    fidelity_tol: float = 1e-6
    n_max: int = 512

    def __post_init__(self):
        L = tuple(float(x) for x in self.L_list)
        if any(b <= a for a, b in zip(L[:-1], L[1:])):
            raise ParameterError("L list must be strictly increasing")
        if min(L) < 2 * self.R:
            raise ParameterError("boxes must satisfy L >= 2 R")
        if self.L_ref < 2 * max(L):
            raise ParameterError("reference box must satisfy L_ref >= 2 max(L)")
        if self.t <= 0:
            raise ParameterError("t must be positive")
        object.__setattr__(self, "L_list", L)


@dataclass(frozen=True)
class DiffReport:
    L_list: tuple
    differences: tuple
    fidelities: tuple
    slope_vs_Lsq: float
    intercept: float


def _heat_state(L, run, t_or_none=None, tol=None):
    basis = box_basis(L, run.omega_cut, run.d, run.n_max)
    op = galerkin_schrodinger(basis, run.potential)
    c = bump_state(basis, run.R)
    fid = float(np.linalg.norm(c))
    if 1.0 - fid > (run.fidelity_tol if tol is None else tol):
        raise FidelityError(
            f"bump loses {1.0 - fid:.2e} of its norm in the L={L} basis")
    if t_or_none is None:
        return basis, op, c, fid
    w = op.to_eigenbasis(c)
    v = op.from_eigenbasis(np.exp(-t_or_none * op.eigvals) * w)
    return basis, op, c, fid, v


def semigroup_difference(run):
    """Per L, ``|| (exp(-t H_ref) - exp(-t H_L)) u0 ||`` for the bump state.

    The small-box semigroup acts as ``exp(-t H_L) ⊕ I`` restricted to the
    zero-extension, and the comparison uses exact cross inner products in
    the reference basis, so the reported values carry only the (checked)
    basis-truncation error.
    """
    basis_R, op_R, c_R, fid_R, v_R = _heat_state(run.L_ref, run, run.t)
    diffs, fids = [], []
    for L in run.L_list:
        basis_L, op_L, c_L, fid_L, v_L = _heat_state(L, run, run.t)
        O = cross_gram(basis_R, basis_L, [basis_L.domain.box()])
        d2 = float(v_R @ v_R + v_L @ v_L - 2.0 * v_R @ (O @ v_L))
        diffs.append(math.sqrt(max(d2, 0.0)))
        fids.append(fid_L)
    if len(diffs) >= 2 and all(d > 0 for d in diffs):
        x = np.array([L ** 2 for L in run.L_list])
        y = np.log(diffs)
        A = np.vstack([np.ones_like(x), x]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope, intercept = float(coef[1]), float(coef[0])
    else:
        slope = intercept = math.nan
    return DiffReport(
        L_list=run.L_list,
        differences=tuple(diffs),
        fidelities=tuple(fids),
        slope_vs_Lsq=slope,
        intercept=intercept,
    )


@dataclass(frozen=True)
class ControlFamilyReport:
    L_list: tuple
    control_norms: tuple
    residuals: tuple
    conditions: tuple


def nested_control_family(S, T, run, cond_cap=1e12, fidelity_tol=1e-3):
    """Min-norm null-controls on each box, replayed on the reference box.

    Per L: solve the truncated Gramian control for the bump state on
    ``(-L/2, L/2)``, record its norm, then drive the reference dynamics with
    the same control (supported in ``S ∩ Λ_L``) and record the final-state
    residual relative to the unit initial state.  Representation loss of the
    bump shows up inside the residual, so only a coarse fidelity gate is
    applied here.
    """
    if T <= 0:
        raise ParameterError("T must be positive")
    basis_R, op_R, c_R, _ = _heat_state(run.L_ref, run, tol=fidelity_tol)
    mu_R = op_R.eigvals
    norms, residuals, conds = [], [], []
    for L in run.L_list:
        basis_L, op_L, c_L, _ = _heat_state(L, run, tol=fidelity_tol)
        problem = ControlProblem.from_set(op_L, S, T, u0=c_L)
        signal, cost = min_norm_control(problem, cond_cap)
        v = signal.phases[0].v if signal.phases else np.zeros(op_L.n)
        boxes = S.boxes_in_region(basis_L.domain.box())
        Cx = cross_gram(basis_R, basis_L, boxes)
        if not op_R.is_diagonal or not op_L.is_diagonal:
            Cx = op_R.eigvecs.T @ Cx @ op_L.eigvecs
        mu_L = op_L.eigvals
        K = _phi(T, mu_R[:, None] + mu_L[None, :])
        uT = np.exp(-T * mu_R) * op_R.to_eigenbasis(c_R) - (Cx * K) @ v
        norms.append(cost)
        residuals.append(float(np.linalg.norm(uT)))
        conds.append(gramian_condition(problem))
    return ControlFamilyReport(
        L_list=run.L_list,
        control_norms=tuple(norms),
        residuals=tuple(residuals),
        conditions=tuple(conds),
    )
