"""Exception types. Each carries a short ``code`` used in CLI diagnostics."""


class TgcError(Exception):
    code = "Error"


class ShapeMismatch(TgcError, ValueError):
    code = "ShapeMismatch"


class IndexOutOfRange(TgcError, IndexError):
    code = "IndexOutOfRange"


class DuplicateEntry(TgcError, ValueError):
    code = "DuplicateEntry"


class EmptyInput(TgcError, ValueError):
    code = "EmptyInput"


class EmptyCorpus(TgcError, ValueError):
    code = "EmptyCorpus"


class EmptyDocument(TgcError, ValueError):
    code = "EmptyDocument"


class EmptyGraph(TgcError, ValueError):
    code = "EmptyGraph"


class EmptyDataset(TgcError, ValueError):
    code = "EmptyDataset"


class EmptyMatrix(TgcError, ValueError):
    code = "EmptyMatrix"


class LengthMismatch(TgcError, ValueError):
    code = "LengthMismatch"


class ClassOutOfRange(TgcError, ValueError):
    code = "ClassOutOfRange"


class LabelOutOfRange(TgcError, ValueError):
    code = "LabelOutOfRange"


class NonFiniteLoss(TgcError, FloatingPointError):
    code = "NonFiniteLoss"


class BadMagic(TgcError, ValueError):
    code = "BadMagic"


class VersionMismatch(TgcError, ValueError):
    code = "VersionMismatch"


class CorruptTensor(TgcError, ValueError):
    code = "CorruptTensor"


class ConfigError(TgcError, ValueError):
    code = "ConfigError"


class DatasetError(TgcError, ValueError):
    code = "DatasetError"


class LabelMismatch(TgcError, ValueError):
    code = "LabelMismatch"


class MissingModality(TgcError, ValueError):
    code = "MissingModality"


class IoError(TgcError, OSError):
    code = "IoError"
