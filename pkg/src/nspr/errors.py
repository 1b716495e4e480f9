"""Exception hierarchy shared by every module."""


class NsprError(Exception):
    """Base class for domain errors (mapped to exit code 2 by the CLI)."""


class RadiusTooLarge(NsprError):
    pass


class TimeRangeUnavailable(NsprError):
    pass


class PointOutsideBall(NsprError):
    pass


class SingularSource(NsprError):
    pass


class NotHarmonic(NsprError):
    pass


class CflViolation(NsprError):
    def __init__(self, max_speed, dt, h):
        self.max_speed = max_speed
        super().__init__(
            f"CFL violated: dt={dt:g} > 0.5*h/max|u| with h={h:g}, max|u|={max_speed:g}"
        )


class BlowupDetected(NsprError):
    def __init__(self, max_speed, t):
        self.max_speed = max_speed
        super().__init__(f"max|u|={max_speed:g} exceeded blow-up threshold at t={t:g}")


class SupportOutOfDomain(NsprError):
    pass


class ScaleUnderResolved(NsprError):
    pass


class EmptySet(NsprError):
    pass
