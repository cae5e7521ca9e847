"""Tail-gather signing of complete data streams (CDS).

Only the last ``TAIL_BYTES`` decoded symbols of each CDS are signed, behind a
fresh nonce.  Any change to the compressed payload that alters decoding
propagates through the arithmetic decoder to the end of its CDS, where the
gathered tail picks it up.

Digest preimage: ``nonce || gathered`` hashed with SHA-224, signed with
deterministic ECDSA over P-256.
"""

from __future__ import annotations

import enum
import hashlib
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import Prehashed

from .errors import EmptyCdsList, EntropyUnavailable, KeyInvalid, MalformedSeal

TAIL_BYTES = 16
NONCE_BYTES = 16
SIGNER_ID_BYTES = 8
DEFAULT_CDS_CAP = 4096

HASH_ALG = "sha224"
SIG_ALG = "ecdsa-p256"

_HASHES = {"sha224": hashes.SHA224, "sha256": hashes.SHA256, "sha384": hashes.SHA384}


class Verdict(str, enum.Enum):
    AUTHENTIC = "Authentic"
    TAMPERED = "Tampered"
    UNKNOWN_SIGNER = "UnknownSigner"
    UNSEALED = "Unsealed"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CdsDescriptor:
    index: int
    uncompressed_len: int
    compressed_len: int
    tail: bytes

    @classmethod
    def from_symbols(cls, index: int, symbols, compressed_len: int = 0) -> "CdsDescriptor":
        data = bytes(bytearray(symbols))
        return cls(index, len(data), compressed_len, tail_of(data))


@dataclass(frozen=True)
class SealBlock:
    nonce: bytes
    digest_input_len: int
    signature: bytes
    signer_id: bytes
    hash_alg: str = HASH_ALG
    sig_alg: str = SIG_ALG


def tail_of(data: bytes) -> bytes:
    return bytes(data[-TAIL_BYTES:]) if data else b""


def gather_tails(cds_list: Sequence[CdsDescriptor]) -> bytes:
    if not cds_list or not any(c.uncompressed_len for c in cds_list):
        raise EmptyCdsList("need at least one non-empty CDS")
    ordered = sorted(cds_list, key=lambda c: c.index)
    return b"".join(c.tail for c in ordered)


def make_nonce() -> bytes:
    try:
        return os.urandom(NONCE_BYTES)
    except NotImplementedError as exc:  # pragma: no cover
        raise EntropyUnavailable("no OS randomness source") from exc


def digest(nonce: bytes, gathered: bytes, hash_alg: str = HASH_ALG) -> bytes:
    h = hashlib.new(hash_alg)
    h.update(nonce)
    h.update(gathered)
    return h.digest()


# -- keys --------------------------------------------------------------------

def generate_signing_key() -> ec.EllipticCurvePrivateKey:
    return ec.generate_private_key(ec.SECP256R1())


def signer_id(public_key) -> bytes:
    der = public_key.public_bytes(
        serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
    )
    return hashlib.sha256(der).digest()[:SIGNER_ID_BYTES]


def private_key_pem(key) -> bytes:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


def public_key_pem(key) -> bytes:
    return key.public_bytes(
        serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
    )


def load_private_key(pem: bytes) -> ec.EllipticCurvePrivateKey:
    try:
        key = serialization.load_pem_private_key(pem, password=None)
    except (ValueError, TypeError) as exc:
        raise KeyInvalid(f"cannot load private key: {exc}") from exc
    _check_curve(key)
    return key


def load_public_key(pem: bytes) -> ec.EllipticCurvePublicKey:
    try:
        key = serialization.load_pem_public_key(pem)
    except (ValueError, TypeError) as exc:
        raise KeyInvalid(f"cannot load public key: {exc}") from exc
    _check_curve(key)
    return key


def _check_curve(key):
    if not isinstance(key, (ec.EllipticCurvePrivateKey, ec.EllipticCurvePublicKey)):
        raise KeyInvalid("expected an elliptic-curve key")
    if key.curve.key_size != 256:
        raise KeyInvalid(f"expected a 256-bit curve, got {key.curve.name}")


# -- seal / verify -----------------------------------------------------------

def seal(gathered: bytes, nonce: bytes, private_key, hash_alg: str = HASH_ALG) -> SealBlock:
    """Sign ``hash(nonce || gathered)``; deterministic for fixed inputs."""
    if not isinstance(private_key, ec.EllipticCurvePrivateKey):
        raise KeyInvalid("private key must be an elliptic-curve signing key")
    _check_curve(private_key)
    if len(nonce) != NONCE_BYTES:
        raise MalformedSeal(f"nonce must be {NONCE_BYTES} bytes")
    if hash_alg not in _HASHES:
        raise KeyInvalid(f"unsupported hash {hash_alg}")
    d = digest(nonce, gathered, hash_alg)
    algo = ec.ECDSA(Prehashed(_HASHES[hash_alg]()), deterministic_signing=True)
    signature = private_key.sign(d, algo)
    return SealBlock(
        nonce=bytes(nonce),
        digest_input_len=len(nonce) + len(gathered),
        signature=signature,
        signer_id=signer_id(private_key.public_key()),
        hash_alg=hash_alg,
    )


def verify(gathered: bytes, seal_block: SealBlock, public_key) -> Verdict:
    if len(seal_block.nonce) != NONCE_BYTES or len(seal_block.signer_id) != SIGNER_ID_BYTES:
        raise MalformedSeal("seal has wrong nonce or signer id length")
    if seal_block.hash_alg not in _HASHES or seal_block.sig_alg != SIG_ALG:
        raise MalformedSeal(f"unknown algorithms {seal_block.hash_alg}/{seal_block.sig_alg}")
    _check_curve(public_key)
    if seal_block.signer_id != signer_id(public_key):
        return Verdict.UNKNOWN_SIGNER
    d = digest(seal_block.nonce, gathered, seal_block.hash_alg)
    algo = ec.ECDSA(Prehashed(_HASHES[seal_block.hash_alg]()))
    try:
        public_key.verify(seal_block.signature, d, algo)
    except InvalidSignature:
        return Verdict.TAMPERED
    return Verdict.AUTHENTIC


def split_cds(symbols: bytes, cap: int = DEFAULT_CDS_CAP) -> list[bytes]:
    """Cut a symbol stream into consecutive runs of at most ``cap`` symbols."""
    if cap < 1:
        raise ValueError("CDS cap must be >= 1")
    if not symbols:
        return [b""]
    return [bytes(symbols[i:i + cap]) for i in range(0, len(symbols), cap)]


def describe(cds_payloads: Iterable[bytes]) -> list[CdsDescriptor]:
    return [CdsDescriptor.from_symbols(i, p) for i, p in enumerate(cds_payloads)]
