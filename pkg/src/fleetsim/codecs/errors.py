class CodecError(ValueError):
    pass


class CorruptStream(CodecError):
    """Malformed RVL bitstream: truncated varint, run overflow, or trailing data."""
