"""Error taxonomy shared by all modules.

SchemaError covers malformed files and I/O-level problems (CLI exit 2);
ValidationError covers content that violates a task invariant (CLI exit 1).
"""


class HarnessError(Exception):
    pass


class SchemaError(HarnessError):
    pass


class ValidationError(HarnessError):
    pass
