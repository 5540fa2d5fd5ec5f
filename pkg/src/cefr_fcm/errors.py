"""Exception hierarchy. The CLI maps these onto exit codes."""


class CefrFcmError(Exception):
    """Base class for all package errors."""


class SchemaError(CefrFcmError, ValueError):
    """Input does not match the expected schema (missing column, bad cell, ...)."""


class EmptyInputError(SchemaError):
    """Input holds no usable rows."""


class InfeasibleError(CefrFcmError, ValueError):
    """A numerical procedure cannot run on the given input (e.g. fewer rows than clusters)."""


class NoCefrLabelsError(CefrFcmError, ValueError):
    """CEFR level names were requested from a model whose cluster count is not six."""
