"""Error hierarchy shared by the engines and the command-line front end.

Every error carries the engine that raised it and the process exit code the
CLI reports for it, the same way an HTTP error carries its status code.
"""


class ScatTomoError(Exception):
    """Base class for all expected failures."""

    module = "scattomo"
    exit_code = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def __str__(self) -> str:
        return f"[{self.module}] {self.detail}"


class ConfigValidationError(ScatTomoError):
    module = "cli"
    exit_code = 2


class HilbertError(ScatTomoError):
    module = "hilbert"


class ProtocolError(ScatTomoError):
    module = "protocol"


class ExtrapolationError(ScatTomoError):
    module = "extrapolation"


class WaveguideError(ScatTomoError):
    module = "waveguide"


class DeconvolutionError(ScatTomoError):
    module = "deconvolution"


class ImperfectionError(ScatTomoError):
    module = "imperfections"
