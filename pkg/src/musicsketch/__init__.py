"""musicsketch: intent interpretation, symbolic sketching, and session archiving."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AlignmentEntry,
    AlignmentReport,
    Attribute,
    AttributeClass,
    AttributeSet,
    NoteEvent,
    Provenance,
    RenderResult,
    SegmentRecord,
    SessionEntry,
    SymbolicPrompt,
    ValidationError,
    Violation,
    make_attribute,
    validate_attribute_set,
)
