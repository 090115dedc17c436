"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for simulator errors."""


class OutOfRange(SimError):
    """Parameter or query point outside its valid domain."""


class InvalidRay(SimError):
    """Ray origin not inside the tube."""


class CameraOutsideLumen(SimError):
    """Camera origin is inside the solid (wall/mold) region."""


class NoLumen(SimError):
    """Segmentation mask has no set pixels."""


class TargetLostDuringProbe(SimError):
    """Lumen target disappeared while probing for the Jacobian."""


class ZeroStep(SimError):
    """Jacobian probe step must be nonzero."""


class Aborted(SimError):
    """Trial aborted (e.g. target lost beyond the timeout)."""


class ConfigError(SimError):
    """Invalid experiment configuration."""


class InfeasibleStart(SimError):
    """No admissible initial pose satisfies the protocol constraint."""


class GoalNotReached(SimError):
    """Navigation metrics requested for a trial that never crossed the goal."""


class DegenerateStart(SimError):
    """Normalization denominator at t0 is (near) zero."""


class DegenerateProfile(SimError):
    """Speed profile unusable for the requested smoothness metric."""


class IoError(SimError):
    """Filesystem output failure."""
