"""Exception types shared across the package."""


class RegqaError(Exception):
    """Base class for all package errors."""


# --- section-id grammar ---

class MalformedId(RegqaError):
    """Input does not follow the part.section(level)... grammar."""


# --- corpus ingestion ---

class NoSectionsFound(RegqaError):
    pass


class MalformedMarker(RegqaError):
    """A marked-plaintext section line could not be parsed."""

    def __init__(self, line_number: int, line: str, reason: str):
        super().__init__(f"line {line_number}: {reason}: {line!r}")
        self.line_number = line_number
        self.line = line


class OrphanTextError(RegqaError):
    """Text precedes the first section marker and no preamble id is derivable."""


class DuplicateSection(RegqaError):
    pass


# --- fetching ---

class FetchError(RegqaError):
    pass


class NetworkError(FetchError):
    pass


class HttpStatusError(FetchError):
    def __init__(self, status: int, url: str):
        super().__init__(f"HTTP {status} from {url}")
        self.status = status
        self.url = url


class FetchTimeout(FetchError):
    pass


# --- LLM gateway ---

class ProviderError(RegqaError):
    pass


class MockFixtureMissing(ProviderError):
    def __init__(self, template_id: str, key: str):
        super().__init__(f"no mock fixture for template {template_id!r} key {key}")
        self.template_id = template_id
        self.key = key


class SchemaViolation(RegqaError):
    pass


class TokenLimitExceeded(ProviderError):
    pass


class EmptyInput(RegqaError):
    pass


class TemplateError(RegqaError):
    pass


# --- extraction pipeline ---

class SectionExtractionFailed(RegqaError):
    def __init__(self, section_id, stage: str, cause: Exception):
        super().__init__(f"section {section_id} failed at {stage}: {cause}")
        self.section_id = section_id
        self.stage = stage
        self.cause = cause


# --- vectors ---

class DimensionMismatch(RegqaError):
    pass


class ZeroVector(RegqaError):
    pass


# --- navigator graph ---

class UnknownSection(RegqaError):
    pass


# --- persistence ---

class StorageError(RegqaError):
    pass


class CorruptBundle(StorageError):
    pass


# --- retrieval ---

class EmptyDecomposition(RegqaError):
    """The question yielded no entities; unanswerable by retrieval."""


class NoCandidates(RegqaError):
    pass


class RetrievalStageError(RegqaError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


# --- evaluation ---

class EmptyTruth(RegqaError):
    pass
