"""The ACSF sealed-file format.

Layout (all integers big-endian)::

    magic          4s   b"ACSF"
    version        u8   1
    flags          u8   bit0 encrypted, bit1 forbidden symbol, bit2 sealed
    alphabet_size  u16
    freqs          u16 * alphabet_size   (unpermuted)
    forbidden_freq u16
    cds_count      u32
    cds_count times:
        uncompressed_len u32
        compressed_len   u32
        payload          compressed_len bytes
    if sealed:
        nonce     16s
        signer_id 8s
        sig_len   u16
        signature sig_len bytes

The permutation is never stored; it is re-derived from the key.  When sealed,
the signed preimage is ``nonce || model descriptor || tail_1 || ... || tail_k``
where the model descriptor is the ``alphabet_size .. forbidden_freq`` run of
the header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import security
from .coder import decode_stream, encode_stream
from .errors import (
    BadMagic,
    ForbiddenSymbolHit,
    InvalidDescriptor,
    KeyRequired,
    LengthMismatch,
    ModelError,
    TruncatedFile,
    UnexpectedEndOfData,
    UnsupportedVersion,
)
from .model import (
    MAX_TOTAL,
    PermutationKey,
    SymbolModel,
    add_forbidden,
    derive_permutation,
    permute_model,
)
from .security import SealBlock, Verdict

MAGIC = b"ACSF"
VERSION = 1

FLAG_ENCRYPTED = 0x01
FLAG_FORBIDDEN = 0x02
FLAG_SEALED = 0x04
_KNOWN_FLAGS = FLAG_ENCRYPTED | FLAG_FORBIDDEN | FLAG_SEALED


@dataclass(frozen=True)
class CdsRecord:
    uncompressed_len: int
    payload: bytes


@dataclass(frozen=True)
class SealedFile:
    flags: int
    freqs: tuple[int, ...]
    forbidden_freq: int
    cds: tuple[CdsRecord, ...]
    seal: Optional[SealBlock] = None
    version: int = VERSION

    @property
    def encrypted(self) -> bool:
        return bool(self.flags & FLAG_ENCRYPTED)

    @property
    def sealed(self) -> bool:
        return bool(self.flags & FLAG_SEALED)

    @property
    def model(self) -> SymbolModel:
        return SymbolModel(self.freqs, None, self.forbidden_freq)

    @property
    def uncompressed_len(self) -> int:
        return sum(c.uncompressed_len for c in self.cds)

    def descriptor_bytes(self) -> bytes:
        return model_descriptor(self.freqs, self.forbidden_freq)

    def payload_offsets(self) -> list[int]:
        """Byte offset of every CDS payload inside the serialized file."""
        pos = 4 + 1 + 1 + len(self.descriptor_bytes()) + 4
        offsets = []
        for rec in self.cds:
            pos += 8
            offsets.append(pos)
            pos += len(rec.payload)
        return offsets


@dataclass
class DecodeResult:
    payload: bytes
    verdict: Verdict
    file: SealedFile
    # (cds index, exception) for every CDS that failed to decode cleanly
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and self.verdict in (Verdict.AUTHENTIC, Verdict.UNSEALED)


def model_descriptor(freqs, forbidden_freq: int) -> bytes:
    return struct.pack(f">H{len(freqs)}HH", len(freqs), *freqs, forbidden_freq)


def _as_key(key, n: int) -> PermutationKey:
    if isinstance(key, PermutationKey):
        if key.size != n:
            return derive_permutation(key.seed, n)
        return key
    return derive_permutation(bytes(key), n)


def serialize(sf: SealedFile) -> bytes:
    if any(f > 0xFFFF for f in sf.freqs) or sf.forbidden_freq > 0xFFFF:
        raise InvalidDescriptor("frequencies must fit in 16 bits")
    parts = [MAGIC, struct.pack(">BB", sf.version, sf.flags), sf.descriptor_bytes()]
    parts.append(struct.pack(">I", len(sf.cds)))
    for rec in sf.cds:
        parts.append(struct.pack(">II", rec.uncompressed_len, len(rec.payload)))
        parts.append(rec.payload)
    if sf.flags & FLAG_SEALED:
        s = sf.seal
        parts.append(s.nonce + s.signer_id + struct.pack(">H", len(s.signature)))
        parts.append(s.signature)
    return b"".join(parts)


def write_sealed(
    model: SymbolModel,
    payload: bytes,
    key=None,
    forbidden_freq: int = 0,
    private_key=None,
    cds_cap: int = security.DEFAULT_CDS_CAP,
    nonce: Optional[bytes] = None,
) -> bytes:
    """Encode ``payload`` (one byte per symbol) into an ACSF file.

    ``key`` is a 32-byte permutation seed or a :class:`PermutationKey`;
    ``private_key`` turns on sealing.
    """
    if model.order != tuple(range(model.alphabet_size)):
        raise InvalidDescriptor("pass the unpermuted model; the key does the permuting")
    if forbidden_freq:
        model = add_forbidden(model, forbidden_freq)
    coding_model = model
    flags = 0
    if key is not None:
        coding_model = permute_model(model, _as_key(key, model.alphabet_size))
        flags |= FLAG_ENCRYPTED
    if model.forbidden_freq:
        flags |= FLAG_FORBIDDEN

    chunks = security.split_cds(bytes(payload), cds_cap)
    records = tuple(CdsRecord(len(c), encode_stream(coding_model, c)) for c in chunks)

    seal_block = None
    if private_key is not None:
        flags |= FLAG_SEALED
        nonce = security.make_nonce() if nonce is None else nonce
        gathered = model_descriptor(model.freqs, model.forbidden_freq) + security.gather_tails(
            security.describe(chunks)
        )
        seal_block = security.seal(gathered, nonce, private_key)

    sf = SealedFile(flags, model.freqs, model.forbidden_freq, records, seal_block)
    return serialize(sf)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n > len(self.data) - self.pos:
            raise TruncatedFile(f"need {n} bytes at offset {self.pos}, file ends at {len(self.data)}")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def parse_sealed(data: bytes) -> SealedFile:
    """Parse an ACSF file without decoding it.

    Accepts arbitrary bytes; every failure is a :class:`ContainerError`.
    """
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise BadMagic("not an ACSF file")
    version, flags = r.unpack(">BB")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if flags & ~_KNOWN_FLAGS:
        raise InvalidDescriptor(f"unknown flag bits 0x{flags:02x}")
    (n,) = r.unpack(">H")
    if n == 0:
        raise InvalidDescriptor("empty alphabet")
    freqs = r.unpack(f">{n}H")
    (forbidden_freq,) = r.unpack(">H")
    if min(freqs) == 0:
        raise InvalidDescriptor("zero frequency in model")
    if sum(freqs) + forbidden_freq > MAX_TOTAL:
        raise InvalidDescriptor("frequency total exceeds 2**16")
    if bool(flags & FLAG_FORBIDDEN) != (forbidden_freq > 0):
        raise InvalidDescriptor("forbidden flag disagrees with forbidden frequency")

    (cds_count,) = r.unpack(">I")
    if cds_count == 0:
        raise InvalidDescriptor("no CDS records")
    if cds_count * 8 > r.remaining:
        raise TruncatedFile(f"{cds_count} CDS records cannot fit in {r.remaining} bytes")
    records = []
    for _ in range(cds_count):
        ulen, clen = r.unpack(">II")
        records.append(CdsRecord(ulen, r.take(clen)))

    seal_block = None
    if flags & FLAG_SEALED:
        nonce = r.take(security.NONCE_BYTES)
        sid = r.take(security.SIGNER_ID_BYTES)
        (sig_len,) = r.unpack(">H")
        seal_block = SealBlock(
            nonce=nonce,
            digest_input_len=0,
            signature=r.take(sig_len),
            signer_id=sid,
        )
    if r.remaining:
        raise LengthMismatch(f"{r.remaining} trailing bytes after the last record")

    sf = SealedFile(flags, tuple(freqs), forbidden_freq, tuple(records), seal_block, version)
    if seal_block is not None:
        gathered_len = len(sf.descriptor_bytes()) + sum(
            min(security.TAIL_BYTES, c.uncompressed_len) for c in records
        )
        sf = SealedFile(
            flags,
            sf.freqs,
            forbidden_freq,
            sf.cds,
            SealBlock(nonce, security.NONCE_BYTES + gathered_len, seal_block.signature, sid),
            version,
        )
    return sf


def decode_file(sf: SealedFile, key=None) -> tuple[list[bytes], list]:
    """Decode every CDS; failures yield a zero-filled best-effort chunk."""
    try:
        model = sf.model
    except ModelError as exc:  # pragma: no cover - parse_sealed already checks
        raise InvalidDescriptor(str(exc)) from exc
    if sf.encrypted:
        if key is None:
            raise KeyRequired("file is encrypted; a permutation key is required")
        model = permute_model(model, _as_key(key, model.alphabet_size))
    if model.alphabet_size > 256:
        raise InvalidDescriptor("payload symbols are bytes; alphabet must be <= 256")
    chunks, errors = [], []
    for i, rec in enumerate(sf.cds):
        try:
            syms = decode_stream(model, rec.payload, rec.uncompressed_len)
        except (ForbiddenSymbolHit, UnexpectedEndOfData) as exc:
            errors.append((i, exc))
            syms = np.zeros(rec.uncompressed_len, dtype=np.int64)
            syms[: len(exc.decoded)] = exc.decoded
        chunks.append(syms.astype(np.uint8).tobytes())
    return chunks, errors


def open_sealed(data: bytes, key=None, public_key=None) -> DecodeResult:
    """Parse, decode and (if sealed) verify an ACSF file."""
    sf = parse_sealed(data)
    if sf.sealed and public_key is None:
        raise KeyRequired("file is sealed; a public key is required to verify it")
    chunks, errors = decode_file(sf, key)
    payload = b"".join(chunks)
    if not sf.sealed:
        verdict = Verdict.TAMPERED if errors else Verdict.UNSEALED
        return DecodeResult(payload, verdict, sf, errors)
    verdict = verify_chunks(sf, chunks, public_key)
    if errors and verdict is Verdict.AUTHENTIC:  # pragma: no cover - needs a hash collision
        verdict = Verdict.TAMPERED
    return DecodeResult(payload, verdict, sf, errors)


def verify_chunks(sf: SealedFile, chunks: list[bytes], public_key) -> Verdict:
    """Verify the seal of ``sf`` against already-decoded CDS chunks."""
    gathered = sf.descriptor_bytes() + security.gather_tails(security.describe(chunks))
    return security.verify(gathered, sf.seal, public_key)
