"""Exception hierarchy shared by every subrig module."""


class SubrigError(Exception):
    """Base class for all library errors."""


class ExpressionSyntaxError(SubrigError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownVariable(SubrigError):
    def __init__(self, name):
        super().__init__(f"unknown variable {name!r}")
        self.name = name


class UnknownFunction(SubrigError):
    def __init__(self, name):
        super().__init__(f"unknown function {name!r}")
        self.name = name


class DomainError(SubrigError):
    def __init__(self, message, subexpression=None):
        detail = f" in {subexpression}" if subexpression is not None else ""
        super().__init__(f"{message}{detail}")
        self.subexpression = subexpression


class ConfigError(SubrigError):
    pass


class PartitionError(ConfigError):
    pass


class FrameDegenerate(SubrigError):
    def __init__(self, point, determinant):
        super().__init__(f"frame is degenerate at {list(point)} (det={determinant!r})")
        self.point = point
        self.determinant = determinant


class UnknownCatalogName(SubrigError):
    pass


class CarnotDataError(SubrigError):
    pass


class OffSurface(SubrigError):
    pass


class RegularityError(SubrigError):
    pass


class CharacteristicPoint(SubrigError):
    pass


class PatchOffSurface(SubrigError):
    def __init__(self, node, residual):
        super().__init__(f"patch node {list(node)} is off the surface (|phi|={residual:.3g})")
        self.node = node
        self.residual = residual


class RootFindFailure(SubrigError):
    pass


class NonTangentDirection(SubrigError):
    pass


class EigenSolverFailure(SubrigError):
    pass


class StepTooLarge(SubrigError):
    pass


class CharacteristicEncountered(SubrigError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RayRecrossing(SubrigError):
    pass


class NotCarnot(SubrigError):
    pass


class ProjectionFailure(SubrigError):
    pass


class EmptyGrid(SubrigError):
    pass
