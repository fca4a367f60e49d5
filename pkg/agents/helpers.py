"""Helper utilities for the agents module.

Provides id scoping for stored session traces and deterministic seed
derivation shared by the corpus, training and evaluation code.
"""
import hashlib
from typing import Tuple, Union

# Separator used to scope trace ids by run namespace
SESSION_ID_SEPARATOR = ":"


def scope_session_id(namespace: str, session_id: str) -> str:
    """Create a namespace-scoped session ID.

    Args:
        namespace: Run or model namespace
        session_id: Session identifier

    Returns:
        Scoped session ID in format: "{namespace}:{session_id}"

    Example:
        >>> scope_session_id("dual-av", "conv-0003")
        'dual-av:conv-0003'
    """
    return f"{namespace}{SESSION_ID_SEPARATOR}{session_id}"


def parse_scoped_session_id(scoped_session_id: str) -> Tuple[str, str]:
    """Parse a scoped session ID into namespace and session_id.

    Raises:
        ValueError: If the scoped_session_id format is invalid

    Example:
        >>> parse_scoped_session_id("dual-av:conv-0003")
        ('dual-av', 'conv-0003')
    """
    parts = scoped_session_id.split(SESSION_ID_SEPARATOR, 1)
    if len(parts) != 2:
        raise ValueError(
            f"Invalid scoped session ID format. Expected 'namespace{SESSION_ID_SEPARATOR}session_id', "
            f"got: '{scoped_session_id}'"
        )
    return parts[0], parts[1]


def derive_seed(base_seed: int, *parts: Union[str, int, float]) -> int:
    """Derive an independent 63-bit seed from a base seed and a key path.

    Example:
        >>> derive_seed(0, "conv", 3) == derive_seed(0, "conv", 3)
        True
    """
    key = SESSION_ID_SEPARATOR.join([str(base_seed)] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
