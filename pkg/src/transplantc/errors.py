"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class TransplantError(Exception):
    """Base class for all toolkit errors."""


class SourceError(TransplantError):
    def __init__(self, file: str, line: int, message: str):
        self.file = file
        self.line = line
        super().__init__(f"{file}:{line}: {message}")


class CSyntaxError(SourceError):
    def __init__(self, file: str, line: int, expected: str):
        self.expected = expected
        super().__init__(file, line, f"syntax error, expected {expected}")


class UnsupportedConstruct(SourceError):
    def __init__(self, file: str, line: int, construct: str):
        self.construct = construct
        super().__init__(file, line, f"unsupported construct: {construct}")


class UnbalancedDirective(SourceError):
    def __init__(self, file: str, line: int, detail: str = "unbalanced conditional directive"):
        super().__init__(file, line, detail)


class UnresolvedSymbol(SourceError):
    def __init__(self, name: str, file: str, line: int):
        self.name = name
        super().__init__(file, line, f"call to unresolved symbol {name!r}")


class UnknownEntryPoint(TransplantError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown entry point {name!r}")


class NoPathFromMain(TransplantError):
    def __init__(self, entry: str):
        self.entry = entry
        super().__init__(f"{entry!r} is not reachable from main")


class UnknownFeature(TransplantError):
    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"unknown feature {feature!r}")


class PlatformError(TransplantError):
    pass


class DuplicateFeatureId(PlatformError):
    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"artifact {feature!r} already stored (use --force to overwrite)")


class DigestMismatch(PlatformError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"digest mismatch for stored file {path}")


class MissingArtifact(PlatformError):
    def __init__(self, what: str):
        self.what = what
        super().__init__(f"missing artifact: {what}")


class MarkerNotFound(TransplantError):
    pass


class MarkerAmbiguous(TransplantError):
    pass


class SandboxIoError(TransplantError):
    pass


class BuildToolMissing(TransplantError):
    pass


class NoViableOrganFound(TransplantError):
    def __init__(self, message: str, trajectory: list | None = None):
        self.trajectory = trajectory or []
        super().__init__(message)


class SignatureConflict(TransplantError):
    def __init__(self, name: str, detail: str = ""):
        self.name = name
        super().__init__(f"signature conflict on {name!r}" + (f": {detail}" if detail else ""))


class BuildFailedAfterImplant(TransplantError):
    def __init__(self, log: str):
        self.log = log
        super().__init__("postoperative project does not build:\n" + log)


class MissingSuite(TransplantError):
    def __init__(self, kind: str):
        self.kind = kind
        super().__init__(f"missing test suite of kind {kind!r}")


class PromotionBeforeValidation(TransplantError):
    pass
