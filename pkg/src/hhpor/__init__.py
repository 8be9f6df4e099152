"""Dynamic proofs of retrievability over a hierarchical erasure-coded log."""
from .params import Address, SecretState, SystemParams, WriteRecord, setup, setup_profile

__all__ = ["Address", "SecretState", "SystemParams", "WriteRecord", "setup", "setup_profile"]
__version__ = "0.1.0"
