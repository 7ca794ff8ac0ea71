"""Structured pass/fail reports produced by the verification pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class VerificationReport:
    """Outcome of one numeric check: a pass flag plus named residuals.

    ``calibration_sign`` records the overall sign convention fixed by the
    anchor requirement that the canonical negative-curvature metric measures
    holomorphic sectional curvature -4.
    """

    name: str
    passed: bool
    tolerance: float
    residuals: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    calibration_sign: int = 1

    @property
    def max_residual(self) -> float:
        vals = [v for v in self.residuals.values() if v is not None]
        return max(vals) if vals else 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
            "residuals": {k: _jsonify(v) for k, v in self.residuals.items()},
            "details": {k: _jsonify(v) for k, v in self.details.items()},
            "calibration_sign": self.calibration_sign,
        }


@dataclass
class ExtensionReport:
    """Aggregate result of the extension pipeline.

    Collects the four sub-checks (holomorphy of the boundary data,
    nondegeneracy of the extended differential, image containment, and
    agreement with the input metric on the overlap region) plus geometric
    bookkeeping: the torus polyradius and the rescale factor applied before
    extension.
    """

    passed: bool
    holomorphy: VerificationReport | None = None
    jacobian: VerificationReport | None = None
    containment: VerificationReport | None = None
    overlap: VerificationReport | None = None
    space_form: VerificationReport | None = None
    rho: float = 0.0
    scale: float = 1.0
    degree: int = 0
    grid: int = 0
    details: dict = field(default_factory=dict)
    calibration_sign: int = 1

    def checks(self):
        out = {}
        for key in ("space_form", "holomorphy", "jacobian", "containment", "overlap"):
            rep = getattr(self, key)
            if rep is not None:
                out[key] = rep
        return out

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "rho": self.rho,
            "scale": self.scale,
            "degree": self.degree,
            "grid": self.grid,
            "checks": {k: r.to_dict() for k, r in self.checks().items()},
            "details": {k: _jsonify(v) for k, v in self.details.items()},
            "calibration_sign": self.calibration_sign,
        }


def _jsonify(value):
    """Best-effort conversion of numpy scalars/arrays for json.dumps."""
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    return value
