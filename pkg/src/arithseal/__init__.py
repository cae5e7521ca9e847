"""Arithmetic coding with keyed model permutation, forbidden-symbol error
detection and tail-gather signatures."""

from .coder import Decoder, Encoder, decode_stream, encode_stream, encode_stream_bits
from .container import open_sealed, parse_sealed, write_sealed
from .exact import exact_decode, exact_encode, exact_width_bits
from .model import (
    PermutationKey,
    SymbolModel,
    add_forbidden,
    build_model,
    derive_permutation,
    naive_swap_model,
    permute_model,
)
from .security import Verdict, gather_tails, make_nonce, seal, verify

__version__ = "0.1.0"

__all__ = [
    "Decoder",
    "Encoder",
    "PermutationKey",
    "SymbolModel",
    "Verdict",
    "add_forbidden",
    "build_model",
    "decode_stream",
    "derive_permutation",
    "encode_stream",
    "encode_stream_bits",
    "exact_decode",
    "exact_encode",
    "exact_width_bits",
    "gather_tails",
    "make_nonce",
    "naive_swap_model",
    "open_sealed",
    "parse_sealed",
    "permute_model",
    "seal",
    "verify",
    "write_sealed",
]
