"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 codec error,
5 verification failed (Tampered or UnknownSigner).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import analysis, security
from .coder import encode_stream_bits
from .container import (
    FLAG_ENCRYPTED,
    FLAG_FORBIDDEN,
    FLAG_SEALED,
    open_sealed,
    parse_sealed,
    write_sealed,
)
from .errors import ArithSealError, KeyRequired
from .model import MAX_TOTAL, SEED_BYTES, add_forbidden, build_model, fit_frequencies

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CODEC, EXIT_TAMPERED = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _summary(kind: str, **fields) -> str:
    parts = [kind]
    for k, v in fields.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        parts.append(f"{k}={v}")
    return " ".join(parts)


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write(path: str, data: bytes):
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _info_stream(args):
    return sys.stderr if getattr(args, "output", None) == "-" else sys.stdout


def parse_model_spec(spec: str) -> list[int]:
    """Inline ``1,2,3,4`` or a path to a file holding such a list."""
    text = Path(spec).read_text() if os.path.isfile(spec) else spec
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad model spec {spec!r}: {exc}") from None


def load_perm_key(path: str) -> bytes:
    raw = Path(path).read_bytes()
    text = raw.strip()
    if len(text) == 2 * SEED_BYTES:
        try:
            return bytes.fromhex(text.decode("ascii"))
        except (UnicodeDecodeError, ValueError):
            pass
    if len(raw) == SEED_BYTES:
        return raw
    raise UsageError(f"{path}: permutation key must be {SEED_BYTES} raw bytes or 64 hex digits")


def _information_bits(model, chunks) -> int:
    """Sum over CDSes of ceil(-log2 width) of the final interval."""
    logp = {s: -math.log2(model.freqs[s] / model.total) for s in range(model.alphabet_size)}
    total = 0
    for chunk in chunks:
        if chunk:
            counts = Counter(chunk)
            total += math.ceil(math.fsum(logp[s] * c for s, c in counts.items()) - 1e-9)
    return total


# -- subcommands --------------------------------------------------------------

def cmd_encode(args) -> int:
    if args.encrypt and not args.key:
        raise UsageError("--encrypt requires --key")
    if args.seal and not args.private_key:
        raise UsageError("--seal requires --private-key")
    if args.cds_cap < 1:
        raise UsageError("--cds-cap must be >= 1")
    if args.forbidden < 0:
        raise UsageError("--forbidden must be >= 0")

    payload = _read(args.input)
    if args.model:
        model = build_model(parse_model_spec(args.model))
    else:
        counts = np.bincount(np.frombuffer(payload, dtype=np.uint8), minlength=256)
        model = build_model(fit_frequencies(counts.tolist(), MAX_TOTAL - args.forbidden))
    key = load_perm_key(args.key) if args.encrypt else None
    private_key = (
        security.load_private_key(Path(args.private_key).read_bytes()) if args.seal else None
    )
    blob = write_sealed(
        model,
        payload,
        key=key,
        forbidden_freq=args.forbidden,
        private_key=private_key,
        cds_cap=args.cds_cap,
    )
    _write(args.output, blob)

    out = _info_stream(args)
    chunks = security.split_cds(payload, args.cds_cap)
    b_min = _information_bits(model, chunks)
    sf = parse_sealed(blob)
    print(
        _summary(
            "encode",
            input_bytes=len(payload),
            output_bytes=len(blob),
            payload_bytes=sum(len(c.payload) for c in sf.cds),
            cds=len(sf.cds),
            b_min=b_min,
            ratio=len(blob) / len(payload) if payload else 0.0,
            encrypted=int(bool(sf.flags & FLAG_ENCRYPTED)),
            forbidden=int(bool(sf.flags & FLAG_FORBIDDEN)),
            sealed=int(bool(sf.flags & FLAG_SEALED)),
        ),
        file=out,
    )
    if args.quality_report and payload:
        guarded = add_forbidden(model, args.forbidden)
        bits = sum(encode_stream_bits(guarded, c)[1] for c in chunks)
        print(
            _summary(
                "quality",
                entropy_bits_per_symbol=analysis.entropy_bits(model),
                coded_bits_per_symbol=bits / len(payload),
                coded_bits=bits,
                overhead_bits=bits - b_min,
            ),
            file=out,
        )
    return EXIT_OK


def _open(args):
    data = _read(args.input)
    key = load_perm_key(args.key) if args.key else None
    pub = (
        security.load_public_key(Path(args.public_key).read_bytes())
        if args.public_key
        else None
    )
    try:
        return open_sealed(data, key=key, public_key=pub)
    except KeyRequired as exc:
        raise UsageError(str(exc)) from None


def _report_decode(kind, args, res) -> int:
    out = _info_stream(args)
    print(
        _summary(
            kind,
            verdict=res.verdict,
            symbols=len(res.payload),
            cds=len(res.file.cds),
            decode_errors=len(res.errors),
        ),
        file=out,
    )
    for i, exc in res.errors:
        print(f"warning: CDS {i}: {exc}", file=sys.stderr)
    if res.verdict in (security.Verdict.TAMPERED, security.Verdict.UNKNOWN_SIGNER):
        print(f"warning: verification failed ({res.verdict})", file=sys.stderr)
        return EXIT_TAMPERED
    return EXIT_OK


def cmd_decode(args) -> int:
    if args.seal and not args.public_key:
        raise UsageError("--seal requires --public-key")
    res = _open(args)
    _write(args.output, res.payload)
    return _report_decode("decode", args, res)


def cmd_verify(args) -> int:
    res = _open(args)
    return _report_decode("verify", args, res)


def cmd_keygen(args) -> int:
    prefix = Path(args.out)
    if args.perm:
        target = prefix.with_name(prefix.name + ".perm")
        if target.exists() and not args.force:
            raise UsageError(f"{target} exists; use --force")
        target.write_text(os.urandom(SEED_BYTES).hex() + "\n")
        print(_summary("keygen", perm_key=target))
        return EXIT_OK
    priv_path = prefix.with_name(prefix.name + ".key")
    pub_path = prefix.with_name(prefix.name + ".pub")
    for p in (priv_path, pub_path):
        if p.exists() and not args.force:
            raise UsageError(f"{p} exists; use --force")
    key = security.generate_signing_key()
    fd = os.open(priv_path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(security.private_key_pem(key))
    pub_path.write_bytes(security.public_key_pem(key.public_key()))
    print(
        _summary(
            "keygen",
            private_key=priv_path,
            public_key=pub_path,
            signer_id=security.signer_id(key.public_key()).hex(),
        )
    )
    return EXIT_OK


def _write_dat(path, header, rows):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(str(v) for v in row) + "\n")


def cmd_experiment(args) -> int:
    seed = int(args.seed, 16)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if (args.plot or args.gnuplot) and out_dir is None:
        out_dir = Path(".")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    name = args.name

    if name == "redundancy":
        model = build_model(analysis.WIDE_DEMO_FREQS)
        sizes = args.n or [analysis.CODE_BLOCK_SYMBOLS]
        reports = [
            analysis.run_redundancy(model, args.epsilon, n, args.trials or 100, seed) for n in sizes
        ]
        for r in reports:
            print(
                _summary(
                    "redundancy",
                    epsilon=r.epsilon,
                    realized_epsilon=r.realized_epsilon,
                    n=r.n_symbols,
                    blocks=r.blocks,
                    predicted_extra_bits=f"{r.predicted_extra_bits:.4f}",
                    predicted_realized_bits=f"{r.predicted_realized_bits:.4f}",
                    measured_extra_bits=f"{r.measured_extra_bits:.4f}",
                    relative_error=r.relative_error,
                )
            )
        if out_dir:
            analysis.write_redundancy_csv(out_dir / "redundancy.csv", reports)
            if args.gnuplot:
                _write_dat(
                    out_dir / "redundancy.dat",
                    ["n", "predicted", "measured"],
                    [(r.n_symbols, r.predicted_realized_bits, r.measured_extra_bits) for r in reports],
                )
            if args.plot:
                from .plotting import plot_redundancy

                plot_redundancy(reports, out_dir / "redundancy.png")

    elif name == "expansion":
        r = analysis.run_expansion_counterexample()
        print(
            _summary(
                "expansion",
                message=r.message,
                original_width=r.original_width,
                naive_width=r.naive_width,
                naive_ratio=r.naive_ratio,
                permuted_ratio=r.permuted_ratio,
                original_bits=r.original_bits,
                naive_bits=r.naive_bits,
                extra_bits=r.extra_bits,
            )
        )
        if out_dir:
            (out_dir / "expansion.csv").write_text(
                "message,original_width,naive_width,permuted_width,naive_ratio,"
                "permuted_ratio,original_bits,naive_bits,permuted_bits\n"
                f"{r.message},{r.original_width},{r.naive_width},{r.permuted_width},"
                f"{r.naive_ratio},{r.permuted_ratio},{r.original_bits},{r.naive_bits},"
                f"{r.permuted_bits}\n"
            )
            if args.plot:
                from .plotting import plot_expansion

                plot_expansion(r, out_dir / "expansion.png")

    elif name == "avalanche":
        model = build_model(analysis.DEMO_FREQS)
        msg_len = args.msg_len
        reports = analysis.run_avalanche(model, msg_len, args.trials or 200, seed)
        flipped = [r for r in reports if r.first_corrupted_symbol_index < msg_len]
        print(
            _summary(
                "avalanche",
                msg_len=msg_len,
                trials=len(reports),
                prefix_intact=sum(r.prefix_intact for r in reports),
                mean_post_flip_ser=float(np.mean([r.symbol_error_rate for r in flipped]))
                if flipped
                else 0.0,
                collision_rate=analysis.collision_error_rate(model),
            )
        )
        if out_dir:
            analysis.write_avalanche_csv(out_dir / "avalanche.csv", reports)
            if args.gnuplot:
                _write_dat(
                    out_dir / "avalanche.dat",
                    ["flip_bit", "payload_bits", "first_corrupted", "ser"],
                    [
                        (r.flip_bit_position, r.payload_bits, r.first_corrupted_symbol_index, r.symbol_error_rate)
                        for r in reports
                    ],
                )
            if args.plot:
                from .plotting import plot_avalanche

                plot_avalanche(reports, out_dir / "avalanche.png")

    elif name == "cost-ratio":
        sizes = args.cds_sizes or [16, 256, 1540, 1720, 4096]
        reports = [analysis.run_cost_ratio([s] * 16, seed) for s in sizes]
        for r in reports:
            print(
                _summary(
                    "cost_ratio",
                    cds_bytes=r.mean_cds_bytes,
                    tail_bytes_hashed=r.tail_bytes_hashed,
                    whole_bytes_hashed=r.whole_bytes_hashed,
                    measured_ratio=r.measured_ratio,
                    expected_ratio=r.expected_ratio,
                    time_ratio=r.time_ratio,
                )
            )
        ref = analysis.reference_cost_ratios()
        print(_summary("cost_ratio_reference", **ref))
        if out_dir:
            import csv
            from dataclasses import asdict

            with open(out_dir / "cost_ratio.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(asdict(reports[0])) + ["time_ratio"])
                w.writeheader()
                for r in reports:
                    w.writerow({**asdict(r), "time_ratio": r.time_ratio})
            if args.gnuplot:
                _write_dat(
                    out_dir / "cost_ratio.dat",
                    ["cds_bytes", "expected", "measured", "time_ratio"],
                    [(r.mean_cds_bytes, r.expected_ratio, r.measured_ratio, r.time_ratio) for r in reports],
                )
            if args.plot:
                from .plotting import plot_cost_ratio

                plot_cost_ratio(reports, out_dir / "cost_ratio.png")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="arithseal",
        description="Arithmetic-coding compression with keyed encryption and tail signatures.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("encode", help="compress (and optionally encrypt/seal) a file")
    e.add_argument("input")
    e.add_argument("-o", "--output", required=True)
    e.add_argument("--model", help="frequency list like 1,2,3,4 or a file holding one")
    e.add_argument("--key", help="permutation key file (64 hex digits)")
    e.add_argument("--encrypt", action="store_true", help="permute the model with --key")
    e.add_argument("--forbidden", type=int, default=0, metavar="FREQ")
    e.add_argument("--seal", action="store_true", help="sign tails with --private-key")
    e.add_argument("--private-key")
    e.add_argument("--cds-cap", type=int, default=security.DEFAULT_CDS_CAP, metavar="BYTES")
    e.add_argument("--quality-report", action="store_true")
    e.set_defaults(func=cmd_encode)

    for name, func, helptext in (
        ("decode", cmd_decode, "decompress and verify a file"),
        ("verify", cmd_verify, "decode and verify without writing the payload"),
    ):
        d = sub.add_parser(name, help=helptext)
        d.add_argument("input")
        if name == "decode":
            d.add_argument("-o", "--output", required=True)
            d.add_argument("--seal", action="store_true", help="require a seal check")
        d.add_argument("--key", help="permutation key file")
        d.add_argument("--public-key")
        d.set_defaults(func=func)

    k = sub.add_parser("keygen", help="create a signing key pair or a permutation key")
    k.add_argument("-o", "--out", required=True, metavar="PREFIX")
    k.add_argument("--perm", action="store_true", help="write PREFIX.perm instead")
    k.add_argument("--force", action="store_true")
    k.set_defaults(func=cmd_keygen)

    x = sub.add_parser("experiment", help="run an analysis experiment")
    x.add_argument("name", choices=["redundancy", "expansion", "avalanche", "cost-ratio"])
    x.add_argument("--seed", default="0", help="experiment seed (hex)")
    x.add_argument("--trials", type=int)
    x.add_argument("--epsilon", type=float, default=analysis.MQ_EPSILON)
    x.add_argument("--n", type=int, nargs="+", help="block sizes for redundancy")
    x.add_argument("--msg-len", type=int, default=1000)
    x.add_argument("--cds-sizes", type=int, nargs="+")
    x.add_argument("--out-dir")
    x.add_argument("--plot", action="store_true", help="render PNG figures")
    x.add_argument("--gnuplot", action="store_true", help="also write .dat column files")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "experiment":
        try:
            int(args.seed, 16)
        except ValueError:
            parser.error(f"--seed must be hex, got {args.seed!r}")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"arithseal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"arithseal: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArithSealError as exc:
        print(f"arithseal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CODEC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
