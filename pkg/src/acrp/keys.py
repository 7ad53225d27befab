"""Ed25519 keypairs for citizens, auditors, authorities and consortium nodes."""

from __future__ import annotations

import hashlib
import os
from typing import Optional, Tuple

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)


class SigningKey:
    """Wrapper holding an Ed25519 private key plus its raw public bytes."""

    def __init__(self, priv: Ed25519PrivateKey):
        self._priv = priv
        self.public_bytes = priv.public_key().public_bytes_raw()

    @classmethod
    def from_seed(cls, seed32: bytes) -> "SigningKey":
        return cls(Ed25519PrivateKey.from_private_bytes(seed32))

    def private_bytes(self) -> bytes:
        return self._priv.private_bytes_raw()

    def sign(self, message: bytes) -> bytes:
        return self._priv.sign(message)


def keygen(rng_seed: Optional[bytes] = None) -> Tuple[SigningKey, bytes]:
    """Generate an Ed25519 keypair.

    A fixed rng_seed reproduces the same pair (test fixtures only); otherwise
    the private seed comes from the OS RNG.  Returns (signing_key, public key
    bytes).
    """
    if rng_seed is not None:
        seed = hashlib.sha256(b"acrp-keygen" + rng_seed).digest()
    else:
        seed = os.urandom(32)
    sk = SigningKey.from_seed(seed)
    return sk, sk.public_bytes


def verify(public_key: bytes, signature: bytes, message: bytes) -> bool:
    """True iff signature is a valid Ed25519 signature; never raises."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def load_key_file(path: str) -> SigningKey:
    with open(path, "r", encoding="utf-8") as f:
        seed = bytes.fromhex(f.read().strip())
    return SigningKey.from_seed(seed)


def save_key_file(path: str, sk: SigningKey) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(sk.private_bytes().hex() + "\n")
