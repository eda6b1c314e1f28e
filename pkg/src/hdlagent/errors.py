"""Exception hierarchy shared across the package."""


class HdlAgentError(Exception):
    pass


class ParseError(HdlAgentError):
    pass


class ValidationError(HdlAgentError):
    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or field)


class EmptyQuestion(HdlAgentError):
    pass


class StageTooLow(HdlAgentError):
    pass


class EmptyError(HdlAgentError):
    pass


class NoCodeFound(HdlAgentError):
    pass


class BackendError(HdlAgentError):
    """Raised by LLM backends. ``kind`` is one of network, http_status,
    rate_limited, malformed_response."""

    KINDS = ("network", "http_status", "rate_limited", "malformed_response")

    def __init__(self, kind, message=""):
        if kind not in self.KINDS:
            raise ValueError(f"unknown backend error kind {kind!r}")
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


class AmbiguousTop(HdlAgentError):
    pass


class UnknownPort(HdlAgentError):
    pass


class NameCollision(HdlAgentError):
    pass


class IoMismatch(HdlAgentError):
    def __init__(self, missing, unexpected):
        self.missing = sorted(missing)
        self.unexpected = sorted(unexpected)
        parts = []
        if self.missing:
            parts.append("missing " + ", ".join(map(_fmt_sig, self.missing)))
        if self.unexpected:
            parts.append("unexpected " + ", ".join(map(_fmt_sig, self.unexpected)))
        super().__init__("IO mismatch: " + "; ".join(parts))


class MalformedTest(HdlAgentError):
    pass


class InvalidGateCount(HdlAgentError):
    pass


def _fmt_sig(sig):
    name, direction, width = sig
    return f"{direction} {name}[{width}]"
