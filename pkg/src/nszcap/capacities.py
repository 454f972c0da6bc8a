"""Capacity programs on non-commutative bipartite graphs.

Six quantities are computed, all as optimal values of semidefinite programs
solved by :mod:`nszcap.sdpsolver`:

``upsilon``         one-shot no-signalling-assisted zero-error capacity,
                    in messages (linear scale);
``upsilon_hat``     its activated variant, obtained by relaxing the output
                    marginal constraint from equality to an inequality;
``aram``            the semidefinite (fractional) packing number;
``upsilon_cq`` / ``upsilon_hat_cq`` / ``aram_cq``
                    the classical-quantum specializations.

Every result carries the primal witness matrices and, where available, the
dual witness, so values can be re-verified outside the solver.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .graphspace import CqGraph, NCGraph, tensor_power
from .matrixcore import ValidationError, op_norm, partial_trace, tensor
from .sdpsolver import (
    NONNEG,
    PSD,
    Block,
    Coo,
    SdpProblem,
    SdpSolution,
    SolverFailure,
    SolverOptions,
    coo,
    entry_coeff,
    entry_value,
    herm_entries,
    herm_from_entry_values,
    num_herm_entries,
    solve,
)

DEFAULT_MAX_CHOI_DIM = 4096
STRICT_TOL = 1e-7


class DimensionLimitError(RuntimeError):
    """A construction would exceed the configured Choi-dimension guard."""


def max_choi_dim() -> int:
    raw = os.environ.get("NSZCAP_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_CHOI_DIM
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"NSZCAP_MAX_DIM must be an integer, got {raw!r}") from exc


@dataclass
class CapacityResult:
    quantity: str
    value: float
    primal_witness: dict
    dual_witness: dict
    gap: float
    status: str = "optimal"
    iterations: int = 0

    @property
    def log2_value(self) -> float:
        return math.log2(self.value) if self.value > 0 else -math.inf


def _graph_is_real(P) -> bool:
    return float(np.abs(np.asarray(P).imag).max(initial=0.0)) <= 1e-14


def _real_view(P, real: bool):
    A = np.asarray(P)
    return A.real.copy() if real else A.astype(complex)


def _run(problem: SdpProblem, opts: SolverOptions | None, quantity: str) -> SdpSolution:
    sol = solve(problem, opts)
    if not sol.optimal:
        raise SolverFailure(
            f"{quantity}: solver returned status {sol.status!r} "
            f"(gap {sol.gap:.3e}, primal residual {sol.primal_residual:.3e}, "
            f"dual residual {sol.dual_residual:.3e})", solution=sol)
    return sol


# ---------------------------------------------------------------------------
# Program builders
# ---------------------------------------------------------------------------

def _identity_marginal_coeff(d_A: int, d_B: int, b1: int, b2: int, kind: str) -> Coo:
    """Functional ``<1_A (x) E, U>`` that reads Re/Im of ``(tr_A U)[b1, b2]``."""
    rows = np.arange(d_A) * d_B
    if b1 == b2:
        return coo(rows + b1, rows + b1, np.ones(d_A))
    ii = np.concatenate([rows + b1, rows + b2])
    jj = np.concatenate([rows + b2, rows + b1])
    if kind == "re":
        vv = np.full(2 * d_A, 0.5)
    else:
        vv = np.concatenate([np.full(d_A, 0.5j), np.full(d_A, -0.5j)])
    return Coo(ii, jj, vv)


def _support_complement_basis(P, real: bool):
    """Orthonormal basis of ker(P) for a projection P (columns)."""
    A = _real_view(P, real)
    w, V = np.linalg.eigh(A)
    return np.ascontiguousarray(V[:, w < 0.5])


def build_upsilon_problem(K: NCGraph, hat: bool):
    """Transcribe the one-shot (or activated) capacity program.

    Variables: S on A, U on AB, the slack W = S (x) 1 - U, and for the
    activated variant the output slack Y = 1_B - tr_A U.  The support
    condition <P, W> = 0 together with W >= 0 forces W onto ker(P), so W is
    represented there directly (a based block); this keeps the program
    strictly feasible, which the pinned formulation is not.
    """
    n, dA, dB = K.dim, K.d_A, K.d_B
    real = _graph_is_real(K.P_AB)
    theta = _support_complement_basis(K.P_AB, real)
    r = theta.shape[1]
    S_BLK, U_BLK = 0, 1
    W_BLK = 2 if r else None
    Y_BLK = (3 if r else 2) if hat else None
    blocks = [Block(PSD, dA), Block(PSD, n)]
    if r:
        blocks.append(Block(PSD, r, basis=theta))
    if hat:
        blocks.append(Block(PSD, dB))
    objective = [np.eye(dA)] + [None] * (len(blocks) - 1)

    constraints = []
    for (i, j, kind) in herm_entries(n, real):
        coeffs = {U_BLK: entry_coeff(i, j, kind)}
        if r:
            coeffs[W_BLK] = entry_coeff(i, j, kind)
        a1, b1 = divmod(i, dB)
        a2, b2 = divmod(j, dB)
        if b1 == b2:
            coeffs[S_BLK] = entry_coeff(a1, a2, kind, scale=-1.0)
        constraints.append((coeffs, 0.0))
    for (b1, b2, kind) in herm_entries(dB, real):
        coeffs = {U_BLK: _identity_marginal_coeff(dA, dB, b1, b2, kind)}
        if hat:
            coeffs[Y_BLK] = entry_coeff(b1, b2, kind)
        constraints.append((coeffs, 1.0 if b1 == b2 else 0.0))

    meta = {"real": real, "n": n, "dA": dA, "dB": dB,
            "coupling": (0, num_herm_entries(n, real)),
            "marginal": (num_herm_entries(n, real),
                         num_herm_entries(n, real) + num_herm_entries(dB, real))}
    return SdpProblem(blocks, objective, constraints,
                      name="upsilon_hat" if hat else "upsilon"), meta


def _extract_upsilon_witnesses(sol: SdpSolution, meta):
    primal = {"S_A": np.asarray(sol.primal_blocks[0]),
              "U_AB": np.asarray(sol.primal_blocks[1])}
    a0, a1 = meta["coupling"]
    b0, b1 = meta["marginal"]
    V = -herm_from_entry_values(meta["n"], sol.dual_multipliers[a0:a1], meta["real"])
    T = herm_from_entry_values(meta["dB"], sol.dual_multipliers[b0:b1], meta["real"])
    dual = {"T_B": T, "V_AB": V}
    return primal, dual


def upsilon(K: NCGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """One-shot no-signalling-assisted zero-error capacity (message count)."""
    problem, meta = build_upsilon_problem(K, hat=False)
    sol = _run(problem, opts, "upsilon")
    primal, dual = _extract_upsilon_witnesses(sol, meta)
    return CapacityResult("upsilon", sol.primal_value, primal, dual, sol.gap,
                          sol.status, sol.iterations)


def upsilon_hat(K: NCGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """Activated one-shot capacity: borrow a noiseless channel, pay it back."""
    problem, meta = build_upsilon_problem(K, hat=True)
    sol = _run(problem, opts, "upsilon_hat")
    primal, dual = _extract_upsilon_witnesses(sol, meta)
    return CapacityResult("upsilon_hat", sol.primal_value, primal, dual, sol.gap,
                          sol.status, sol.iterations)


def build_upsilon_hat_dual_problem(K: NCGraph):
    """Transcribe the minimization dual of the activated capacity.

    Variables: T on B, and the slacks Y1 = 1 (x) T - V,
    y2 = tr_B V - 1_A, Y3 = -(1-P) V (1-P); V itself is eliminated through
    Y1.  Y3 lives on ker(P), and the complement-compression family is
    enumerated there, which keeps the program strictly feasible.
    """
    n, dA, dB = K.dim, K.d_A, K.d_B
    real = _graph_is_real(K.P_AB)
    theta = _support_complement_basis(K.P_AB, real)
    r = theta.shape[1]
    T_BLK, Y1_BLK, Y2_BLK = 0, 1, 2
    Y3_BLK = 3 if r else None
    blocks = [Block(PSD, dB), Block(PSD, n), Block(PSD, dA)]
    if r:
        blocks.append(Block(PSD, r, basis=theta))
    objective = [-np.eye(dB)] + [None] * (len(blocks) - 1)

    constraints = []
    for (a1, a2, kind) in herm_entries(dA, real):
        rows = np.arange(dB)
        if a1 == a2:
            y1c = coo(a1 * dB + rows, a1 * dB + rows, np.ones(dB))
        else:
            ii = np.concatenate([a1 * dB + rows, a2 * dB + rows])
            jj = np.concatenate([a2 * dB + rows, a1 * dB + rows])
            if kind == "re":
                vv = np.full(2 * dB, 0.5)
            else:
                vv = np.concatenate([np.full(dB, 0.5j), np.full(dB, -0.5j)])
            y1c = Coo(ii, jj, vv)
        coeffs = {Y2_BLK: entry_coeff(a1, a2, kind), Y1_BLK: y1c}
        if a1 == a2:
            coeffs[T_BLK] = -np.eye(dB)
        constraints.append((coeffs, -1.0 if a1 == a2 else 0.0))
    for (i, j, kind) in herm_entries(r, real):
        if i == j:
            L = np.outer(theta[:, i], theta[:, i].conj())
        elif kind == "re":
            L = 0.5 * (np.outer(theta[:, i], theta[:, j].conj())
                       + np.outer(theta[:, j], theta[:, i].conj()))
        else:
            L = 0.5j * (np.outer(theta[:, i], theta[:, j].conj())
                        - np.outer(theta[:, j], theta[:, i].conj()))
        constraints.append(({Y3_BLK: L, Y1_BLK: -L,
                             T_BLK: partial_trace(L, dA, dB, "first")}, 0.0))

    meta = {"real": real, "n": n, "dA": dA, "dB": dB}
    return SdpProblem(blocks, objective, constraints, name="upsilon_hat_dual"), meta


def upsilon_hat_dual(K: NCGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """Activated capacity computed from its dual program (min tr T form)."""
    problem, meta = build_upsilon_hat_dual_problem(K)
    sol = _run(problem, opts, "upsilon_hat_dual")
    T = np.asarray(sol.primal_blocks[0])
    Y1 = np.asarray(sol.primal_blocks[1])
    V = tensor(np.eye(meta["dA"], dtype=T.dtype), T) - Y1
    primal = {"T_B": T, "V_AB": V}
    return CapacityResult("upsilon_hat_dual", -sol.primal_value, primal, {},
                          sol.gap, sol.status, sol.iterations)


def build_aram_problem(K: NCGraph):
    """Transcribe the semidefinite packing number program."""
    dA, dB = K.d_A, K.d_B
    real = _graph_is_real(K.P_AB)
    P4 = _real_view(K.P_AB, real).reshape(dA, dB, dA, dB)
    S_BLK, Y_BLK = 0, 1
    blocks = [Block(PSD, dA), Block(PSD, dB)]
    objective = [np.eye(dA), None]
    constraints = []
    for (b1, b2, kind) in herm_entries(dB, real):
        G = entry_coeff(b1, b2, kind).to_dense(dB, P4.dtype)
        Lstar = np.einsum("abcd,db->ac", P4, G)
        Lstar = 0.5 * (Lstar + Lstar.conj().T)
        constraints.append(({S_BLK: Lstar, Y_BLK: entry_coeff(b1, b2, kind)},
                            1.0 if b1 == b2 else 0.0))
    meta = {"real": real, "dA": dA, "dB": dB}
    return SdpProblem(blocks, objective, constraints, name="aram"), meta


def aram(K: NCGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """Semidefinite (fractional) packing number."""
    problem, meta = build_aram_problem(K)
    sol = _run(problem, opts, "aram")
    primal = {"S_A": np.asarray(sol.primal_blocks[0])}
    T = herm_from_entry_values(meta["dB"], sol.dual_multipliers, meta["real"])
    return CapacityResult("aram", sol.primal_value, primal, {"T_B": T},
                          sol.gap, sol.status, sol.iterations)


# ---------------------------------------------------------------------------
# Classical-quantum programs
# ---------------------------------------------------------------------------

def _cq_is_real(C: CqGraph) -> bool:
    return all(_graph_is_real(P) for P in C.projections)


def build_cq_problem(C: CqGraph, variant: str):
    """cq programs: ``upsilon`` (equality), ``hat`` (inequality), ``aram``.

    The slack pair R_i, G_i with R_i + G_i = s_i (1 - P_i) lives on
    ker(P_i), so both are based there; in those coordinates the coupling is
    simply R_i + G_i = s_i * identity.
    """
    N, dB = C.num_inputs, C.d_B
    real = _cq_is_real(C)
    projs = [_real_view(P, real) for P in C.projections]

    blocks = [Block(NONNEG, N)]
    objective = [np.ones(N)]
    r_blk = {}
    g_blk = {}
    thetas = {}
    y_blk = None
    if variant in ("upsilon", "hat"):
        for i, Pi in enumerate(projs):
            theta = _support_complement_basis(Pi, real)
            if theta.shape[1] == 0:
                continue
            thetas[i] = theta
            r_blk[i] = len(blocks)
            blocks.append(Block(PSD, theta.shape[1], basis=theta))
            objective.append(None)
            g_blk[i] = len(blocks)
            blocks.append(Block(PSD, theta.shape[1], basis=theta))
            objective.append(None)
        if variant == "hat":
            y_blk = len(blocks)
            blocks.append(Block(PSD, dB))
            objective.append(None)
    else:
        y_blk = len(blocks)
        blocks.append(Block(PSD, dB))
        objective.append(None)

    constraints = []
    if variant in ("upsilon", "hat"):
        for i, theta in thetas.items():
            for (b1, b2, kind) in herm_entries(theta.shape[1], real):
                if b1 == b2:
                    L = np.outer(theta[:, b1], theta[:, b1].conj())
                elif kind == "re":
                    L = 0.5 * (np.outer(theta[:, b1], theta[:, b2].conj())
                               + np.outer(theta[:, b2], theta[:, b1].conj()))
                else:
                    L = 0.5j * (np.outer(theta[:, b1], theta[:, b2].conj())
                                - np.outer(theta[:, b2], theta[:, b1].conj()))
                coeffs = {r_blk[i]: L, g_blk[i]: L}
                if b1 == b2:
                    coeffs[0] = coo([i], [i], [-1.0])
                constraints.append((coeffs, 0.0))
    for (b1, b2, kind) in herm_entries(dB, real):
        svec = np.array([entry_value(Pi, b1, b2, kind) for Pi in projs])
        coeffs = {0: svec}
        if variant in ("upsilon", "hat"):
            for i in r_blk:
                coeffs[r_blk[i]] = entry_coeff(b1, b2, kind)
        if y_blk is not None:
            coeffs[y_blk] = entry_coeff(b1, b2, kind)
        constraints.append((coeffs, 1.0 if b1 == b2 else 0.0))

    meta = {"real": real, "N": N, "dB": dB, "variant": variant, "r_blk": r_blk}
    return SdpProblem(blocks, objective, constraints, name=f"cq_{variant}"), meta


def _cq_result(quantity: str, C: CqGraph, variant: str, opts) -> CapacityResult:
    problem, meta = build_cq_problem(C, variant)
    sol = _run(problem, opts, quantity)
    primal = {"s": np.asarray(sol.primal_blocks[0], dtype=float)}
    if variant in ("upsilon", "hat"):
        dB = meta["dB"]
        primal["R"] = [np.asarray(sol.primal_blocks[meta["r_blk"][i]])
                       if i in meta["r_blk"] else np.zeros((dB, dB))
                       for i in range(meta["N"])]
    return CapacityResult(quantity, sol.primal_value, primal, {}, sol.gap,
                          sol.status, sol.iterations)


def upsilon_cq(C: CqGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """One-shot capacity of a classical-quantum graph."""
    return _cq_result("upsilon_cq", C, "upsilon", opts)


def upsilon_hat_cq(C: CqGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """Activated one-shot capacity of a classical-quantum graph."""
    return _cq_result("upsilon_hat_cq", C, "hat", opts)


def aram_cq(C: CqGraph, opts: SolverOptions | None = None) -> CapacityResult:
    """Packing number of a classical-quantum graph."""
    return _cq_result("aram_cq", C, "aram", opts)


# ---------------------------------------------------------------------------
# Derived quantities
# ---------------------------------------------------------------------------

def superdense_bound(K: NCGraph) -> float:
    """Dense-coding lower bound ``d_A / ||tr_A P_AB||_inf`` on the activated capacity."""
    return K.d_A / op_norm(K.P_B)


@dataclass
class Thm9Report:
    aram_gt_1: bool
    pb_strict: bool
    trq_posdef: bool
    uhat_gt_1: bool
    margins: dict

    def all_agree(self) -> bool:
        vals = [self.aram_gt_1, self.pb_strict, self.trq_posdef, self.uhat_gt_1]
        return all(vals) or not any(vals)


class CriteriaInconsistency(RuntimeError):
    """The four positivity criteria disagreed beyond tolerance."""


def thm9_criteria(K: NCGraph, strict_tol: float = STRICT_TOL,
                  opts: SolverOptions | None = None) -> Thm9Report:
    """Evaluate the four equivalent positivity criteria with declared tolerances.

    Strict operator inequalities are decided with margin ``strict_tol``; the
    criteria are provably equivalent, so a disagreement with decisive margins
    signals solver trouble and raises :class:`CriteriaInconsistency`.
    """
    pb_margin = K.d_A - op_norm(K.P_B)
    trq = partial_trace(K.Q_AB, K.d_A, K.d_B, "first")
    trq_margin = float(np.linalg.eigvalsh(0.5 * (trq + trq.conj().T))[0])
    aram_margin = aram(K, opts).value - 1.0
    uhat_margin = upsilon_hat(K, opts).value - 1.0
    report = Thm9Report(
        aram_gt_1=aram_margin > strict_tol,
        pb_strict=pb_margin > strict_tol,
        trq_posdef=trq_margin > strict_tol,
        uhat_gt_1=uhat_margin > strict_tol,
        margins={"aram": aram_margin, "pb": pb_margin,
                 "trq": trq_margin, "uhat": uhat_margin},
    )
    if not report.all_agree():
        decisive = min(abs(v) for v in report.margins.values())
        if decisive > 10 * strict_tol:
            raise CriteriaInconsistency(f"criteria disagree with margins {report.margins}")
    return report


def is_activatable(K: NCGraph, eps: float = 1e-6,
                   opts: SolverOptions | None = None) -> bool:
    """True when the activated capacity strictly exceeds the plain one-shot value."""
    return upsilon_hat(K, opts).value > upsilon(K, opts).value + eps


def find_n0(K: NCGraph, n_max: int, opts: SolverOptions | None = None,
            dim_limit: int | None = None):
    """Least tensor power with one-shot capacity at least 2, or None."""
    if n_max < 1:
        raise ValidationError("n_max must be at least 1")
    limit = dim_limit if dim_limit is not None else max_choi_dim()
    for n in range(1, n_max + 1):
        if K.dim ** n > limit:
            raise DimensionLimitError(
                f"Choi dimension {K.dim ** n} at power {n} exceeds the limit {limit}")
        if upsilon(tensor_power(K, n), opts).value >= 2.0 - 1e-7:
            return n
    return None


# ---------------------------------------------------------------------------
# Witness re-verification (independent of the solver)
# ---------------------------------------------------------------------------

def _min_eig(M) -> float:
    A = np.asarray(M, dtype=complex)
    return float(np.linalg.eigvalsh(0.5 * (A + A.conj().T))[0])


def check_upsilon_witness(K: NCGraph, S, U, hat: bool) -> dict:
    """Constraint violations of an (S, U) pair for the capacity program."""
    S = np.asarray(S); U = np.asarray(U)
    SI = tensor(S, np.eye(K.d_B))
    trA_U = partial_trace(U, K.d_A, K.d_B, "first")
    marg = trA_U - np.eye(K.d_B)
    marg_violation = -_min_eig(-marg) if hat else float(np.abs(marg).max())
    return {
        "U_psd": -min(_min_eig(U), 0.0),
        "slack_psd": -min(_min_eig(SI - U), 0.0),
        "marginal": max(marg_violation, 0.0),
        "support_pairing": abs(float(np.vdot(K.P_AB, SI - U).real)),
    }


def check_eq5_witness(K: NCGraph, T, V) -> dict:
    """Constraint violations of a (T, V) pair for the dual program."""
    T = np.asarray(T); V = np.asarray(V)
    Q = K.Q_AB
    return {
        "T_psd": -min(_min_eig(T), 0.0),
        "upper": -min(_min_eig(tensor(np.eye(K.d_A), T) - V), 0.0),
        "marginal": -min(_min_eig(partial_trace(V, K.d_A, K.d_B, "second") - np.eye(K.d_A)), 0.0),
        "complement": max(-_min_eig(-(Q @ V @ Q)), 0.0),
    }


def check_aram_dual_witness(K: NCGraph, T) -> dict:
    """Constraint violations of T for the packing-number dual."""
    T = np.asarray(T)
    P4 = K.P_AB.reshape(K.d_A, K.d_B, K.d_A, K.d_B)
    PT = np.einsum("abcd,db->ac", P4, T.astype(complex))
    PT = 0.5 * (PT + PT.conj().T)
    return {
        "T_psd": -min(_min_eig(T), 0.0),
        "covering": -min(_min_eig(PT - np.eye(K.d_A)), 0.0),
    }
