"""Semi-fragile image authentication: gradient features signed and carried in Haar HL3/LH3."""

from .authcrypto import KeyPair, keygen
from .imagecore import GrayImage, load_image, save_image
from .protocol import AuthVerdict, EmbedResult, SystemParams, authenticate, embed

__version__ = "0.1.0"

__all__ = [
    "AuthVerdict",
    "EmbedResult",
    "GrayImage",
    "KeyPair",
    "SystemParams",
    "authenticate",
    "embed",
    "keygen",
    "load_image",
    "save_image",
]
