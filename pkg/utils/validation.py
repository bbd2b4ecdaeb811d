# utils/validation.py
from typing import Any, Dict

from jsonschema import Draft202012Validator

from services.errors import InstanceError


def validate_document(document: Any, schema: Dict, source: str = "document") -> None:
    """Raise ``InstanceError`` listing every schema violation in ``document``."""
    validator = Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        details = "; ".join(
            f"{'/'.join(str(p) for p in error.absolute_path) or '<root>'}: {error.message}" for error in errors
        )
        raise InstanceError(f"{source}: {details}")
