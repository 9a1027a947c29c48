"""Regularized Christoffel functions with exclusion constraints.

All ``christoffel_inverse*`` functions return ``1 / C_C(x_z)``, the reciprocal
of the constrained minimum

    min_f  (1/n) sum_i f(x_i)^2 + gamma |f|_H^2   s.t.  f(x_z) = 1,  f(x_s) = 0 for s in C,

which equals ``n [P - P_C P_CC^{-1} P_C^T]_zz`` for the projector kernel ``P``
(the coefficient-space KKT solve in :func:`qp_oracle` confirms the factor ``n``).
The Schur-complement form is the production path; the determinant-ratio and
projection forms exist for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lstsq

from .errors import DomainError, SingularMatrixError
from .projector import ProjectorKernel, _dense, nystrom, residual_diagonal

MAX_ORACLE_N = 200


@dataclass(frozen=True)
class ChristoffelQuery:
    z: int
    exclusion: tuple[int, ...] = ()
    gamma: float = 1.0
    soft_epsilon: float | None = None

    def __post_init__(self):
        excl = tuple(int(s) for s in np.asarray(self.exclusion, dtype=int).reshape(-1))
        object.__setattr__(self, "exclusion", excl)
        if self.soft_epsilon is None and self.z in excl:
            raise DomainError(f"query point {self.z} belongs to the exclusion set")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.soft_epsilon is not None and not self.soft_epsilon > 0:
            raise ValueError("soft_epsilon must be positive")


def _check_query(P: ProjectorKernel, q: ChristoffelQuery):
    if not 0 <= q.z < P.n:
        raise IndexError(f"query index {q.z} out of range")
    if q.z in q.exclusion:
        raise DomainError(f"query point {q.z} belongs to the exclusion set")


def christoffel_inverse(P: ProjectorKernel, q: ChristoffelQuery) -> float:
    _check_query(P, q)
    if not q.exclusion:
        return float(P.entries[q.z, q.z]) * P.n
    idx = np.array(q.exclusion + (q.z,))
    sub = P.block(idx, idx)
    # residual_diagonal on the (|C|+1)-point principal submatrix gives the z entry only.
    return float(residual_diagonal(sub, np.arange(len(idx) - 1))[-1]) * P.n


def christoffel_inverse_all(P: ProjectorKernel, exclusion=()) -> np.ndarray:
    """``christoffel_inverse`` for every index; entries in ``exclusion`` are ~0."""
    return residual_diagonal(P, list(exclusion)) * P.n


# exp(-700) is close to the smallest normal double; below this the ratio is unreliable.
_LOGDET_FLOOR = -700.0


def christoffel_inverse_det(P: ProjectorKernel, q: ChristoffelQuery) -> float:
    """Determinant-ratio form ``n det P_{C_z C_z} / det P_CC`` via log-determinants."""
    _check_query(P, q)
    if not q.exclusion:
        raise DomainError("the determinant form needs a non-empty exclusion set")
    C = np.array(q.exclusion)
    Cz = np.append(C, q.z)
    sign_c, logdet_c = np.linalg.slogdet(P.block(C, C))
    sign_z, logdet_z = np.linalg.slogdet(P.block(Cz, Cz))
    if sign_c <= 0 or logdet_c < _LOGDET_FLOOR:
        raise SingularMatrixError(
            f"det P_CC underflows (log det = {logdet_c:.1f}); use christoffel_inverse (Schur complement)"
        )
    if sign_z <= 0:
        return 0.0
    return float(np.exp(logdet_z - logdet_c)) * P.n


def christoffel_inverse_projection(P: ProjectorKernel, q: ChristoffelQuery) -> float:
    """Projection form ``n |b_z - pi_{V_C} b_z|^2`` with ``B^T B = P`` and ``V_C = span{b_s}``."""
    _check_query(P, q)
    b = P.factor[:, q.z]
    if not q.exclusion:
        return float(b @ b) * P.n
    Bc = P.factor[:, list(q.exclusion)]
    coef = lstsq(Bc, b)[0]
    r = b - Bc @ coef
    return float(r @ r) * P.n


def christoffel_inverse_soft(P: ProjectorKernel, q: ChristoffelQuery) -> float:
    """Soft-constraint variant ``n [P - L_{eps,C}(P)]_zz``."""
    if q.soft_epsilon is None:
        raise ValueError("soft variant needs soft_epsilon")
    if not 0 <= q.z < P.n:
        raise IndexError(f"query index {q.z} out of range")
    if not q.exclusion:
        return float(P.entries[q.z, q.z]) * P.n
    approx = nystrom(P, list(q.exclusion), q.soft_epsilon)
    Pz = float(P.entries[q.z, q.z])
    w = approx.factor_rows([q.z])[0]
    return (Pz - float(w @ w)) * P.n


def soft_weights(n: int, exclusion, eps: float) -> np.ndarray:
    w = np.ones(n)
    w[list(exclusion)] = 1.0 + 1.0 / eps
    return w


@dataclass(frozen=True)
class OracleSolution:
    value: float
    alpha: np.ndarray


def qp_oracle(K, q: ChristoffelQuery, weights=None) -> OracleSolution:
    """Solve the coefficient-space QP by a dense KKT system.

    Minimizes ``alpha^T M alpha`` with ``M = n^{-1}(K W K + n gamma K)`` subject to
    ``(K alpha)_z = 1`` and, for hard constraints, ``(K alpha)_s = 0`` for ``s`` in the
    exclusion set. When ``weights`` is given the exclusion constraints are dropped
    and the weights carry the soft penalty instead.
    """
    Kd = _dense(K)
    n = Kd.shape[0]
    if n > MAX_ORACLE_N:
        raise ValueError(f"qp_oracle is limited to n <= {MAX_ORACLE_N}")
    if weights is None:
        if q.z in q.exclusion:
            raise DomainError("infeasible constraints: query point is excluded")
        rows = [q.z, *q.exclusion]
        w = np.ones(n)
    else:
        rows = [q.z]
        w = np.asarray(weights, dtype=float)
    M = (Kd @ (w[:, None] * Kd) + n * q.gamma * Kd) / n
    M = 0.5 * (M + M.T)
    A = Kd[rows, :]
    m = len(rows)
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = 2.0 * M
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    rhs = np.zeros(n + m)
    rhs[n] = 1.0
    sol = np.linalg.solve(kkt, rhs)
    alpha = sol[:n]
    return OracleSolution(float(alpha @ M @ alpha), alpha)


def optimal_coefficients(K, P: ProjectorKernel, q: ChristoffelQuery) -> np.ndarray:
    """Closed-form optimal ``alpha = K^{-1} R e_z / R_zz`` with ``R`` the projector residual."""
    Kd = _dense(K)
    if q.exclusion:
        R = P.entries - nystrom(P, list(q.exclusion), 0.0).dense()
    else:
        R = P.entries
    r = R[:, q.z]
    return np.linalg.solve(Kd, r) / r[q.z]
