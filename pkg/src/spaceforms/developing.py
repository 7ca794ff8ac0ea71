"""Developing charts by germ continuation, and their monodromy.

A germ is the data (p, q, A) of a local holomorphic isometry from a
constant-curvature metric field into its model space: center p, image
point q, and the complex-linear tangent isometry A: T_p M -> T_q N.  The
chart it determines is  x -> exp_q(A log_p(x)), and continuation along a
path updates the data segment by segment:

    q'  = exp_q(A v),  v = log_p(p')
    A'  = (model transport q -> q') o A o (field transport p' -> p)

Continuation never builds the universal cover: multivaluedness is exposed
only through per-path germs and the monodromy isometries extracted from
loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import models
from .engine import (
    MetricField,
    geodesic_with_transport,
    log_map,
    metric_at,
    require_space_form,
)
from .errors import (
    DomainError,
    NoConvergenceError,
    StepTooLargeError,
    UnreachableSamplesError,
)
from .models import ModelIsometry, ModelPoint, ModelSpace
from .reports import VerificationReport

#: germ isometry residual allowed at construction
GERM_TOL = 1e-7
#: maximal recursive bisection depth for one continuation segment
MAX_SUBDIVISION_DEPTH = 10


@dataclass(frozen=True)
class Germ:
    """A developing-chart germ (center, model image, tangent isometry)."""

    center: np.ndarray
    image: ModelPoint
    frame: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=complex))
        object.__setattr__(self, "frame", np.asarray(self.frame, dtype=complex))
        if not isinstance(self.image, ModelPoint):
            object.__setattr__(self, "image", models.as_point(self.image))


@dataclass(frozen=True)
class PathPolyline:
    """An ordered list of domain points with a per-segment step cap."""

    points: np.ndarray
    max_step: float = float("inf")

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a path needs at least one point of shape (N, n)")
        object.__setattr__(self, "points", pts)

    def validate(self, field: MetricField):
        for x in self.points:
            field.check_point(x)
        for a, b in zip(self.points[:-1], self.points[1:]):
            step = float(np.linalg.norm(b - a))
            cap = min(self.max_step, field.max_step_at(a))
            if step > cap * (1 + 1e-9):
                raise StepTooLargeError(
                    f"segment of length {step:.4g} exceeds the step cap {cap:.4g}")
        return self

    @property
    def is_loop(self) -> bool:
        return bool(np.allclose(self.points[0], self.points[-1], atol=1e-12))


def circle_loop(center, axis: int, radius: float, segments: int = 64,
                turns: int = 1, max_step=float("inf")) -> PathPolyline:
    """A loop winding ``turns`` times around the divisor {z_axis = 0}.

    Starts and ends at ``center``, which must satisfy |center[axis]| = radius.
    """
    center = np.asarray(center, dtype=complex)
    phase0 = np.angle(center[axis])
    ts = np.linspace(0.0, 2 * np.pi * turns, segments * abs(turns) + 1)
    pts = np.tile(center, (ts.size, 1))
    pts[:, axis] = radius * np.exp(1j * (phase0 + np.sign(turns) * ts))
    pts[-1] = center
    return PathPolyline(pts, max_step=max_step)


def concat_paths(*paths: PathPolyline) -> PathPolyline:
    pts = [paths[0].points]
    for prev, nxt in zip(paths[:-1], paths[1:]):
        if not np.allclose(prev.points[-1], nxt.points[0], atol=1e-9):
            raise ValueError("paths do not concatenate: endpoints differ")
        pts.append(nxt.points[1:])
    return PathPolyline(np.vstack(pts),
                        max_step=min(p.max_step for p in paths))


def reverse_path(path: PathPolyline) -> PathPolyline:
    return PathPolyline(path.points[::-1], max_step=path.max_step)


# -- germ construction and evaluation -----------------------------------------


def germ_residual(field: MetricField, c: float, germ: Germ) -> float:
    """Deviation of the germ from the isometry condition A* H_N(q) A = H_M(p)."""
    model = ModelSpace(c=c, dim=field.dim)
    HN = models.model_metric_at(model, germ.image)
    HM = metric_at(field, germ.center)
    return float(np.linalg.norm(germ.frame.conj().T @ HN @ germ.frame - HM))


def initial_germ(field: MetricField, c: float, p, frame: str = "normal",
                 image=None, check_tol: float = 1e-4) -> Germ:
    """Construct a base germ at ``p``.

    ``frame='normal'`` orthonormalizes the coordinate frame against the field
    metric (triangular Gram-Schmidt via Cholesky) and maps it to the standard
    frame at the model origin.  ``frame='inclusion'`` takes q = p with the
    identity frame, valid when the field is the model metric itself.  An
    explicit complex matrix may be passed instead, with ``image`` its target.
    """
    p = np.asarray(p, dtype=complex)
    model = ModelSpace(c=c, dim=field.dim)
    require_space_form(field, c, p, tol=check_tol)
    HM = metric_at(field, p)
    if isinstance(frame, str) and frame == "normal":
        L = np.linalg.cholesky(HM)
        germ = Germ(center=p, image=ModelPoint(np.zeros(field.dim)),
                    frame=L.conj().T)
    elif isinstance(frame, str) and frame == "inclusion":
        germ = Germ(center=p, image=ModelPoint(p), frame=np.eye(field.dim))
    elif isinstance(frame, str):
        raise ValueError(f"unknown frame choice {frame!r}")
    else:
        q = ModelPoint(np.zeros(field.dim)) if image is None else models.as_point(image)
        germ = Germ(center=p, image=q, frame=frame)
    res = germ_residual(field, c, germ)
    if res > GERM_TOL * max(1.0, float(np.linalg.norm(HM))):
        raise models.InvalidFrameError(
            f"initial germ violates the isometry condition: residual {res:.3e}")
    return germ


def evaluate_germ(field: MetricField, c: float, germ: Germ, x,
                  with_differential: bool = False):
    """Evaluate the germ's chart at ``x``: exp_q(A log_p(x)).

    Raises the shooting/domain errors unchanged; callers continue the germ
    closer to ``x`` when that happens.
    """
    x = np.asarray(x, dtype=complex)
    model = ModelSpace(c=c, dim=field.dim)
    v = log_map(field, germ.center, x)
    img = models.model_exp(model, germ.image, germ.frame @ v)
    if not with_differential:
        return img
    _, _, P_fwd = geodesic_with_transport(field, germ.center, v)
    PN = models.transport_matrix(model, germ.image, img)
    dphi = PN @ germ.frame @ np.linalg.inv(P_fwd)
    return img, dphi


def _continue_segment(field, model, germ: Germ, target, depth: int = 0) -> Germ:
    target = np.asarray(target, dtype=complex)
    step = float(np.linalg.norm(target - germ.center))
    if step == 0.0:
        return germ
    cap = field.max_step_at(germ.center)
    if step <= cap:
        try:
            v = log_map(field, germ.center, target)
            _, _, P_fwd = geodesic_with_transport(field, germ.center, v)
            q_new = models.model_exp(model, germ.image, germ.frame @ v)
            PN = models.transport_matrix(model, germ.image, q_new)
            frame_new = PN @ germ.frame @ np.linalg.inv(P_fwd)
            return Germ(center=target, image=q_new, frame=frame_new)
        except (NoConvergenceError, DomainError):
            if depth >= MAX_SUBDIVISION_DEPTH:
                raise
    if depth >= MAX_SUBDIVISION_DEPTH:
        raise StepTooLargeError(
            f"segment of length {step:.4g} unreachable after "
            f"{MAX_SUBDIVISION_DEPTH} bisections")
    mid = 0.5 * (germ.center + target)
    half = _continue_segment(field, model, germ, mid, depth + 1)
    return _continue_segment(field, model, half, target, depth + 1)


def continue_germ(field: MetricField, c: float, germ: Germ,
                  path: PathPolyline) -> Germ:
    """Analytic continuation of a germ along a polyline path."""
    pts = path.points
    if not np.allclose(pts[0], germ.center, atol=1e-10):
        raise ValueError("path must start at the germ center")
    model = ModelSpace(c=c, dim=field.dim)
    current = germ
    for target in pts[1:]:
        if float(np.linalg.norm(target - current.center)) > path.max_step * (1 + 1e-9):
            raise StepTooLargeError("path segment exceeds its declared step cap")
        current = _continue_segment(field, model, current, target)
    return current


def germ_distance(field: MetricField, g1: Germ, g2: Germ):
    """(image distance, frame operator-norm deviation) between two germs.

    Centers must coincide or be within one continuation step; in the latter
    case the second frame is parallel-transported to the first center.
    """
    from .engine import transport_frame

    if np.allclose(g1.center, g2.center, atol=1e-12):
        f2 = g2.frame
    else:
        f2 = g2.frame @ transport_frame(field, g1.center, g2.center)
    image_dist = float(np.linalg.norm(g1.image.affine - g2.image.affine))
    frame_dev = float(np.linalg.norm(g1.frame - f2, ord=2))
    return image_dist, frame_dev


# -- region development ---------------------------------------------------------


@dataclass
class DevelopedField:
    """Samples of a developing map: F, dF, and the continuation tree."""

    samples: np.ndarray
    images: list
    frames: np.ndarray
    parents: np.ndarray
    base_index: int
    base_germ: Germ
    model: ModelSpace

    @property
    def image_coords(self) -> np.ndarray:
        return np.array([pt.affine for pt in self.images])

    def germ_at(self, i: int) -> Germ:
        return Germ(center=self.samples[i], image=self.images[i],
                    frame=self.frames[i])

    def check_tree_consistency(self, field: MetricField, c: float,
                               indices=None, tol: float = 1e-6) -> float:
        """Re-continue each chosen sample from its parent; worst deviation."""
        worst = 0.0
        model = self.model
        idx = range(len(self.samples)) if indices is None else indices
        for i in idx:
            par = int(self.parents[i])
            if par < 0:
                continue
            redone = _continue_segment(field, model, self.germ_at(par),
                                       self.samples[i])
            d_img = float(np.linalg.norm(redone.image.affine - self.images[i].affine))
            d_frame = float(np.linalg.norm(redone.frame - self.frames[i]))
            worst = max(worst, d_img, d_frame)
        if worst > tol:
            raise AssertionError(
                f"continuation tree inconsistent: deviation {worst:.3e}")
        return worst


def knn_edges(samples: np.ndarray, k: int = 8):
    """Symmetric k-nearest-neighbor edge list (brute force, small sample sets)."""
    N = len(samples)
    edges = []
    for i in range(N):
        d = np.linalg.norm(samples - samples[i], axis=1)
        order = np.argsort(d)
        for j in order[1 : k + 1]:
            edges.append((i, int(j)))
    return edges


def develop_region(field: MetricField, c: float, base_germ: Germ, samples,
                   edges=None, k: int = 8) -> DevelopedField:
    """Develop a sample region by breadth-first continuation over a tree.

    ``samples`` must be path-connected through the supplied edge graph (or
    the k-nearest-neighbor graph built when ``edges`` is None) and is assumed
    to lie in a simply connected region; the base germ's center is prepended
    when not already among the samples.
    """
    samples = np.asarray(samples, dtype=complex)
    base = np.asarray(base_germ.center, dtype=complex)
    d0 = np.linalg.norm(samples - base, axis=1)
    if d0.min() > 1e-12:
        samples = np.vstack([base[None, :], samples])
        if edges is not None:
            edges = [(i + 1, j + 1) for i, j in edges]
        base_index = 0
    else:
        base_index = int(np.argmin(d0))
    N = len(samples)
    if edges is None:
        edges = knn_edges(samples, k=k)
    adj = [[] for _ in range(N)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    model = ModelSpace(c=c, dim=field.dim)
    images: list = [None] * N
    frames = np.zeros((N, field.dim, field.dim), dtype=complex)
    parents = np.full(N, -1, dtype=int)
    done = np.zeros(N, dtype=bool)

    # BFS over the neighbor graph; greedy nearest-first within each frontier
    images[base_index] = base_germ.image
    frames[base_index] = base_germ.frame
    done[base_index] = True
    frontier = [base_index]
    germs = {base_index: base_germ}
    while frontier:
        nxt = []
        for i in frontier:
            gi = germs.pop(i)
            for j in adj[i]:
                if done[j]:
                    continue
                gj = _continue_segment(field, model, gi, samples[j])
                images[j] = gj.image
                frames[j] = gj.frame
                parents[j] = i
                done[j] = True
                germs[j] = gj
                nxt.append(j)
        frontier = nxt
    if not done.all():
        missing = np.nonzero(~done)[0]
        raise UnreachableSamplesError(
            f"{missing.size} samples unreachable from the base through the "
            f"step graph", unreachable=missing.tolist())
    return DevelopedField(samples=samples, images=images, frames=frames,
                          parents=parents, base_index=base_index,
                          base_germ=base_germ, model=model)


# -- monodromy ------------------------------------------------------------------


@dataclass
class MonodromyRep:
    """Loops based at one point together with their monodromy isometries."""

    base_point: np.ndarray
    pairs: list = dataclass_field(default_factory=list)

    def add(self, loop: PathPolyline, iso: ModelIsometry):
        self.pairs.append((loop, iso))


def monodromy(field: MetricField, c: float, germ: Germ,
              loop: PathPolyline) -> ModelIsometry:
    """The model isometry relating a germ to its continuation around a loop."""
    if not loop.is_loop:
        raise ValueError("monodromy needs a closed loop")
    continued = continue_germ(field, c, germ, loop)
    model = ModelSpace(c=c, dim=field.dim)
    A_rel = continued.frame @ np.linalg.inv(germ.frame)
    return models.isometry_from_frame_data(model, germ.image, continued.image, A_rel)


def monodromy_deviation(field: MetricField, c: float, germ: Germ,
                        loop: PathPolyline, iso: ModelIsometry) -> float:
    """Residual of the defining relation: iso applied to the base germ must
    reproduce the continued germ."""
    continued = continue_germ(field, c, germ, loop)
    img = models.apply_isometry(iso, germ.image)
    dg = models.isometry_differential(iso, germ.image)
    d_img = float(np.linalg.norm(img.affine - continued.image.affine))
    d_frame = float(np.linalg.norm(dg @ germ.frame - continued.frame, ord=2))
    return max(d_img, d_frame)


# -- verification ----------------------------------------------------------------


def verify_pullback(field: MetricField, developed: DevelopedField, c: float,
                    tol: float = 1e-6) -> VerificationReport:
    """Check dF* H_N(F(x)) dF = H_M(x) over all developed samples."""
    model = developed.model
    worst = 0.0
    for i, x in enumerate(developed.samples):
        HN = models.model_metric_at(model, developed.images[i])
        HM = metric_at(field, x)
        dF = developed.frames[i]
        worst = max(worst, float(np.linalg.norm(dF.conj().T @ HN @ dF - HM)))
    return VerificationReport(
        name="developing-map-pullback",
        passed=worst <= tol,
        tolerance=tol,
        residuals={"max_residual": worst},
        details={"c": c, "n_samples": len(developed.samples)},
    )


def homotopy_invariance_check(field: MetricField, c: float, germ: Germ,
                              path1: PathPolyline, path2: PathPolyline,
                              tol: float = 1e-6) -> VerificationReport:
    """Continue a germ along two homotopic paths and compare the results.

    The paths must share endpoints; homotopy within the domain is the
    caller's assertion.  Non-homotopic paths show up as a frame/image gap
    equal to the monodromy obstruction.
    """
    if not np.allclose(path1.points[-1], path2.points[-1], atol=1e-12):
        raise ValueError("paths must share their endpoint")
    g1 = continue_germ(field, c, germ, path1)
    g2 = continue_germ(field, c, germ, path2)
    d_img, d_frame = germ_distance(field, g1, g2)
    return VerificationReport(
        name="homotopy-invariance",
        passed=max(d_img, d_frame) <= tol,
        tolerance=tol,
        residuals={"image_distance": d_img, "frame_deviation": d_frame},
        details={"endpoint": path1.points[-1]},
    )


def comparison_isometry(model: ModelSpace, germ1: Germ, germ2: Germ) -> ModelIsometry:
    """The unique model isometry tau with (germ1 chart) = tau o (germ2 chart).

    Realizes the uniqueness statement for developing maps: two developments
    of the same field differ by one isometry, recoverable from base germs.
    """
    A_rel = germ1.frame @ np.linalg.inv(germ2.frame)
    return models.isometry_from_frame_data(model, germ2.image, germ1.image, A_rel)
