"""The three complete simply connected Kahler space forms and their isometries.

Normalization: the canonical curvature values are +-4, realized by the
potentials -log(1 - |z|^2) on the unit ball (negative) and log(1 + |z|^2)
on the standard affine chart of projective space (positive); the flat model
is C^n with the identity metric.  A general nonzero curvature c rescales
the metric by 4/|c| while keeping the same coordinates, so the domain and
the isometry group never change, only norms do.

Isometries are stored uniformly as (n+1)x(n+1) complex matrices acting on
homogeneous coordinates (z_1, ..., z_n, t):

  * flat:      affine block form [[U, b], [0, 1]] with U unitary,
  * negative:  matrices preserving the Hermitian form diag(I_n, -1)
               (fractional-linear self-maps of the unit ball),
  * positive:  unitary matrices (fractional-linear in each affine chart).

Projective redundancy (a unit scalar) is irrelevant for the action and is
never normalized away.

For the positive model, points carry an affine chart index: the chart is
the homogeneous slot normalized to 1, with slot n the standard chart.  A
result switches charts when its standard slot drops below half the largest
modulus, keeping all affine coordinates bounded by 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartError, DomainError, InvalidFrameError, NoConvergenceError

#: tolerance for the frame-isometry precondition check
FRAME_TOL = 1e-7
#: relative threshold below which a fractional-linear denominator is singular
DENOM_TINY = 1e-12
#: switch charts when the standard slot falls below this fraction of the max
CHART_SWITCH_RATIO = 0.5


@dataclass(frozen=True)
class ModelSpace:
    """A space form N_c: constant holomorphic sectional curvature c, dim n."""

    c: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")

    @property
    def sign(self) -> int:
        return 0 if self.c == 0 else (1 if self.c > 0 else -1)

    @property
    def metric_scale(self) -> float:
        """Factor multiplying the canonical |c|=4 metric."""
        return 1.0 if self.c == 0 else 4.0 / abs(self.c)


@dataclass(frozen=True)
class ModelPoint:
    """A model-space point in affine coordinates of one chart.

    ``chart`` is the homogeneous slot equal to 1; slot ``n`` is the standard
    affine chart.  Negative and flat models only ever use the standard chart.
    """

    coords: np.ndarray
    chart: int = -1

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=complex)
        object.__setattr__(self, "coords", coords)
        if self.chart < 0:
            object.__setattr__(self, "chart", coords.size)

    @property
    def dim(self) -> int:
        return self.coords.size

    @property
    def is_standard(self) -> bool:
        return self.chart == self.dim

    @property
    def affine(self) -> np.ndarray:
        """Standard-chart affine coordinates; raises if near infinity."""
        if self.is_standard:
            return self.coords
        w = self.homogeneous()
        t = w[self.dim]
        if abs(t) < DENOM_TINY * max(1.0, float(np.max(np.abs(w)))):
            raise ChartError("point is too close to the hyperplane at infinity")
        return w[: self.dim] / t

    def homogeneous(self) -> np.ndarray:
        w = np.empty(self.dim + 1, dtype=complex)
        slots = [i for i in range(self.dim + 1) if i != self.chart]
        w[slots] = self.coords
        w[self.chart] = 1.0
        return w


def as_point(z) -> ModelPoint:
    if isinstance(z, ModelPoint):
        return z
    return ModelPoint(np.atleast_1d(np.asarray(z, dtype=complex)))


def point_from_homogeneous(model: ModelSpace, w: np.ndarray) -> ModelPoint:
    n = model.dim
    w = np.asarray(w, dtype=complex)
    wmax = float(np.max(np.abs(w)))
    if wmax == 0.0:
        raise DomainError("zero homogeneous vector")
    if model.sign <= 0:
        if abs(w[n]) < DENOM_TINY * wmax:
            raise DomainError("fractional-linear denominator vanished")
        return ModelPoint(w[:n] / w[n])
    if abs(w[n]) >= CHART_SWITCH_RATIO * wmax:
        return ModelPoint(w[:n] / w[n])
    s = int(np.argmax(np.abs(w)))
    slots = [i for i in range(n + 1) if i != s]
    return ModelPoint(w[slots] / w[s], chart=s)


def check_in_domain(model: ModelSpace, z: np.ndarray):
    if model.sign < 0 and float(np.linalg.norm(z)) >= 1.0:
        raise DomainError(
            f"|z| = {np.linalg.norm(z):.6f} >= 1: outside the unit ball model")


# -- metric -----------------------------------------------------------------


def model_metric_at(model: ModelSpace, z) -> np.ndarray:
    """Hermitian metric matrix of the model at ``z``.

    The matrix H is stored so that tangent norms are v^* H v and the
    pullback under a holomorphic map with Jacobian J is J^* H J; its
    entries are H[i, j] = d^2 phi / (dz_conj_i dz_j) for the potential phi.
    """
    p = as_point(z)
    n = model.dim
    s = model.metric_scale
    if model.sign == 0:
        return np.eye(n, dtype=complex)
    z = p.coords  # the positive-model metric has the same form in every chart
    if model.sign < 0:
        check_in_domain(model, z)
        rho = 1.0 - float(np.vdot(z, z).real)
        return s * (np.eye(n) / rho + np.outer(z, np.conj(z)) / rho**2)
    sig = 1.0 + float(np.vdot(z, z).real)
    return s * (np.eye(n) / sig - np.outer(z, np.conj(z)) / sig**2)


def hermitian_norm2(G: np.ndarray, v: np.ndarray) -> float:
    return float(np.vdot(v, G @ v).real)


# -- isometries --------------------------------------------------------------


@dataclass(frozen=True)
class ModelIsometry:
    """A holomorphic isometry of a model space, as a homogeneous matrix."""

    model: ModelSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def linear_part(self) -> np.ndarray:
        """The n x n block acting on standard affine coordinates at 0."""
        n = self.model.dim
        return self.matrix[:n, :n] / self.matrix[n, n]

    @property
    def translation_part(self) -> np.ndarray:
        n = self.model.dim
        return self.matrix[:n, n] / self.matrix[n, n]

    def form_residual(self) -> float:
        """Deviation from the group-defining matrix identity."""
        M = self.matrix
        n = self.model.dim
        if self.model.sign == 0:
            U = M[:n, :n]
            r = np.linalg.norm(U.conj().T @ U - np.eye(n))
            r += np.linalg.norm(M[n, :n]) + abs(M[n, n] - 1.0)
            return float(r)
        if self.model.sign < 0:
            J = np.diag([1.0] * n + [-1.0]).astype(complex)
            return float(np.linalg.norm(M.conj().T @ J @ M - J))
        return float(np.linalg.norm(M.conj().T @ M - np.eye(n + 1)))


def identity_isometry(model: ModelSpace) -> ModelIsometry:
    return ModelIsometry(model, np.eye(model.dim + 1, dtype=complex))


def compose(a: ModelIsometry, b: ModelIsometry) -> ModelIsometry:
    return ModelIsometry(a.model, a.matrix @ b.matrix)


def inverse(a: ModelIsometry) -> ModelIsometry:
    return ModelIsometry(a.model, np.linalg.inv(a.matrix))


def apply_isometry(iso: ModelIsometry, z) -> ModelPoint:
    p = as_point(z)
    w = iso.matrix @ p.homogeneous()
    return point_from_homogeneous(iso.model, w)


def isometry_differential(iso: ModelIsometry, z) -> np.ndarray:
    """Differential of the affine action at a standard-chart point ``z``."""
    z = as_point(z).affine
    n = iso.model.dim
    M = iso.matrix
    A, b = M[:n, :n], M[:n, n]
    crow, d = M[n, :n], M[n, n]
    w = crow @ z + d
    if abs(w) < DENOM_TINY:
        raise DomainError("differential at a fractional-linear pole")
    img = (A @ z + b) / w
    return A / w - np.outer(img, crow) / w


def isometries_equal(a: ModelIsometry, b: ModelIsometry, samples, tol=1e-8):
    """Compare the actions on sample points; returns (equal, max deviation)."""
    worst = 0.0
    for z in samples:
        pa = apply_isometry(a, z)
        pb = apply_isometry(b, z)
        worst = max(worst, float(np.linalg.norm(pa.affine - pb.affine)))
    return worst <= tol, worst


def translation(model: ModelSpace, b: np.ndarray) -> ModelIsometry:
    n = model.dim
    M = np.eye(n + 1, dtype=complex)
    M[:n, n] = b
    return ModelIsometry(model, M)


def transvection_to(model: ModelSpace, a) -> ModelIsometry:
    """The canonical transvection mapping the origin to ``a``.

    For the curved models this is the symmetric-space translation along the
    geodesic through 0 and ``a``; its differential at 0 is positive Hermitian.
    """
    a = as_point(a).affine
    n = model.dim
    if model.sign == 0:
        return translation(model, a)
    check_in_domain(model, a)
    r2 = float(np.vdot(a, a).real)
    if r2 == 0.0:
        return identity_isometry(model)
    ahat = a / np.sqrt(r2)
    P = np.outer(ahat, np.conj(ahat))
    Q = np.eye(n) - P
    M = np.empty((n + 1, n + 1), dtype=complex)
    if model.sign < 0:
        gamma = 1.0 / np.sqrt(1.0 - r2)
        M[:n, :n] = Q + gamma * P
        M[:n, n] = gamma * a
        M[n, :n] = gamma * np.conj(a)
        M[n, n] = gamma
    else:
        gamma = 1.0 / np.sqrt(1.0 + r2)
        M[:n, :n] = Q + gamma * P
        M[:n, n] = gamma * a
        M[n, :n] = -gamma * np.conj(a)
        M[n, n] = gamma
    return ModelIsometry(model, M)


def geodesic_symmetry(model: ModelSpace, x) -> ModelIsometry:
    """The point symmetry z -> exp_x(-log_x(z)) as a group element."""
    n = model.dim
    neg = np.diag([-1.0] * n + [1.0]).astype(complex)
    T = transvection_to(model, x)
    return ModelIsometry(model, T.matrix @ neg @ np.linalg.inv(T.matrix))


# -- exponential, logarithm, parallel transport ------------------------------


def model_exp(model: ModelSpace, p, v) -> ModelPoint:
    """Endpoint of the unit-time geodesic from ``p`` with initial velocity ``v``."""
    v = np.asarray(v, dtype=complex)
    if model.sign == 0:
        return ModelPoint(as_point(p).affine + v)
    T = transvection_to(model, p)
    w = np.linalg.solve(isometry_differential(T, np.zeros(model.dim)), v)
    r = float(np.linalg.norm(w))
    if r == 0.0:
        return apply_isometry(T, np.zeros(model.dim))
    if model.sign < 0:
        q0 = np.tanh(r) * w / r
        return apply_isometry(T, q0)
    hom = np.empty(model.dim + 1, dtype=complex)
    hom[: model.dim] = np.sin(r) * w / r
    hom[model.dim] = np.cos(r)
    return point_from_homogeneous(model, T.matrix @ hom)


def model_log(model: ModelSpace, p, q) -> np.ndarray:
    """Initial velocity of the geodesic from ``p`` reaching ``q`` at time 1."""
    if model.sign == 0:
        return as_point(q).affine - as_point(p).affine
    T = transvection_to(model, p)
    Minv = np.linalg.inv(T.matrix)
    wh = Minv @ as_point(q).homogeneous()
    n = model.dim
    if model.sign > 0 and abs(wh[n]) < 1e-9 * float(np.max(np.abs(wh))):
        raise NoConvergenceError(
            "logarithm undefined: points are antipodal within the chart")
    if abs(wh[n]) < DENOM_TINY * float(np.max(np.abs(wh))):
        raise DomainError("fractional-linear denominator vanished in log")
    z = wh[:n] / wh[n]
    r = float(np.linalg.norm(z))
    if r == 0.0:
        return np.zeros(n, dtype=complex)
    if model.sign < 0:
        if r >= 1.0:
            raise DomainError("log target outside the unit ball model")
        v0 = np.arctanh(r) * z / r
    else:
        v0 = np.arctan(r) * z / r
    return isometry_differential(T, np.zeros(n)) @ v0


def transport_matrix(model: ModelSpace, p, q) -> np.ndarray:
    """Parallel transport T_p -> T_q along the connecting geodesic.

    Realized as the differential of the transvection s_m o s_p, where m is
    the geodesic midpoint; this is the standard symmetric-space expression
    for transport along geodesics.
    """
    p_aff = as_point(p).affine
    q_aff = as_point(q).affine
    if model.sign == 0 or np.allclose(p_aff, q_aff, atol=1e-15):
        return np.eye(model.dim, dtype=complex)
    m = model_exp(model, p, 0.5 * model_log(model, p, q))
    tau = compose(geodesic_symmetry(model, m), geodesic_symmetry(model, p))
    return isometry_differential(tau, p_aff)


def model_parallel_transport(model: ModelSpace, p, q, v) -> np.ndarray:
    return transport_matrix(model, p, q) @ np.asarray(v, dtype=complex)


# -- isometry from frame data -------------------------------------------------


def isometry_from_frame_data(model: ModelSpace, p, q, A,
                             tol=FRAME_TOL) -> ModelIsometry:
    """The unique isometry with sigma(p) = q and d sigma_p = A.

    ``A`` must be a complex-linear isometry between the tangent spaces,
    i.e. A^* G(q) A = G(p) within ``tol``.
    """
    p = as_point(p)
    q = as_point(q)
    A = np.asarray(A, dtype=complex)
    Gp = model_metric_at(model, p)
    Gq = model_metric_at(model, q)
    frame_res = float(np.linalg.norm(A.conj().T @ Gq @ A - Gp))
    if frame_res > tol * max(1.0, float(np.linalg.norm(Gp))):
        raise InvalidFrameError(
            f"frame fails the isometry precondition: residual {frame_res:.3e}")
    n = model.dim
    if model.sign == 0:
        M = np.eye(n + 1, dtype=complex)
        M[:n, :n] = A
        M[:n, n] = q.affine - A @ p.affine
        return ModelIsometry(model, M)
    Tp = transvection_to(model, p)
    Tq = transvection_to(model, q)
    zero = np.zeros(n)
    U = np.linalg.solve(isometry_differential(Tq, zero),
                        A @ isometry_differential(Tp, zero))
    core = np.eye(n + 1, dtype=complex)
    core[:n, :n] = U
    M = Tq.matrix @ core @ np.linalg.inv(Tp.matrix)
    return ModelIsometry(model, M)
