"""Error taxonomy shared by the library, the HTTP service and the CLI.

Every error carries a ``kind`` used to pick HTTP status codes and CLI exit
codes: ``usage`` (1), ``data`` (2), ``numeric`` (3).
"""


class EmoseqError(Exception):
    kind = "data"


class UsageError(EmoseqError):
    """Bad command-line arguments or configuration values."""

    kind = "usage"


class ConfigError(UsageError):
    pass


class DataError(EmoseqError):
    kind = "data"


class FormatError(DataError):
    """Malformed input file (broken header, truncated payload, bad CSV)."""


class UnsupportedCodecError(DataError):
    """WAV file uses a compressed or otherwise unsupported encoding."""


class TooShortError(DataError):
    """Input audio shorter than the minimum the operation can process."""


class ManifestError(DataError):
    """Dataset manifest fails validation; message names line and column."""


class EmptyInputError(DataError):
    pass


class NumericError(EmoseqError):
    kind = "numeric"


class DimensionError(NumericError):
    """Operand shapes are inconsistent."""


class InvalidLabelError(NumericError):
    """Label sequence contains a symbol it must not (e.g. the blank)."""


class InfeasibleLabelError(NumericError):
    """No frame-level path of the given length can collapse to the label."""


EXIT_CODES = {"usage": 1, "data": 2, "numeric": 3}


def exit_code_for(err: EmoseqError) -> int:
    return EXIT_CODES.get(getattr(err, "kind", "data"), 2)
