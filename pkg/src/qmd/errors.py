"""Exception hierarchy. Every error carries a short machine-readable ``code``."""

from __future__ import annotations


class QMDError(Exception):
    code = "qmd-error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class GeometryError(QMDError, ValueError):
    code = "invalid-geometry"


class LevelOverflowError(QMDError, ValueError):
    code = "level-overflow"


class PointOutsideRegionError(QMDError, ValueError):
    code = "point-outside-region"


class ResolutionTooCoarseError(QMDError, ValueError):
    code = "resolution-too-coarse"


class InvalidSpecError(QMDError, ValueError):
    code = "invalid-spec"


class EmptyBallError(QMDError, ValueError):
    code = "empty-ball"


class EmptyRegionError(QMDError, ValueError):
    code = "empty-region"


class DomainError(QMDError, ValueError):
    code = "domain-error"


class CapExceededError(QMDError, ValueError):
    code = "cap-exceeded"


class AssignmentFailure(QMDError, RuntimeError):
    """First-fit could not place a cube; carries the contradiction witness."""

    code = "assignment-failure"

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["witness"] = self.witness
        return out
