"""Exception types raised by the simulator and its tooling."""


class SoftRigidError(Exception):
    pass


class ConfigError(SoftRigidError):
    """Invalid scene configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class GroundStructureError(SoftRigidError):
    pass


class SymmetryError(SoftRigidError):
    pass


class InversionError(SoftRigidError):
    def __init__(self, index: int, det: float, step: int | None = None):
        self.index = index
        self.det = det
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"particle {index} inverted (det F = {det:.3e}){where}")


class SafeBandError(SoftRigidError):
    def __init__(self, index: int, step: int | None = None):
        self.index = index
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"particle {index} left the grid safe band{where}")


class BlowUpError(SoftRigidError):
    def __init__(self, step: int, speed: float):
        self.step = step
        self.speed = speed
        super().__init__(f"numerical blow-up at step {step}: |v| = {speed:.3e} m/s")


class CheckpointError(SoftRigidError):
    pass


class GradientError(SoftRigidError):
    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")


class SpectrumError(SoftRigidError):
    pass
