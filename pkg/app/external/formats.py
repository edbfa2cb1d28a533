"""On-disk codecs for polynomials, Boolean functions and network checkpoints"""
import struct
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import structlog

from app.core.errors import ConfigError
from app.models.boolean import BooleanFn
from app.models.nets import MLP
from app.models.polynomial import MultiPoly, graded_lex
from app.services.nets import net_service

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]


def _floats(text: str) -> Optional[List[float]]:
    return None if text == "none" else [float(v) for v in text.split(",")]


def _header(fields: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in fields.items()) + "\n"


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise ConfigError("missing '#' header line")
    return dict(item.split("=", 1) for item in line[1:].split())


# Polynomials: "# dim=.. degree=.. basis=.. box_lo=.. box_hi=.." then "e1 ... en coef" per term


def dump_polynomial(p: MultiPoly) -> str:
    box = lambda v: "none" if v is None else ",".join(repr(float(x)) for x in v)  # noqa: E731
    lines = [
        _header(
            {"dim": p.dim, "degree": p.degree, "basis": p.basis, "box_lo": box(p.box_lo), "box_hi": box(p.box_hi)}
        )
    ]
    terms = p.terms
    for e in graded_lex(p.dim, p.degree):
        if e in terms:
            lines.append(" ".join(str(v) for v in e) + f" {float(terms[e])!r}\n")
    return "".join(lines)


def load_polynomial(text: str) -> MultiPoly:
    rows = text.splitlines()
    meta = _parse_header(rows[0])
    dim = int(meta["dim"])
    terms = {}
    for number, row in enumerate(rows[1:], start=2):
        if not row.strip():
            continue
        parts = row.split()
        if len(parts) != dim + 1:
            raise ConfigError(f"line {number}: expected {dim} exponents and a coefficient")
        terms[tuple(int(v) for v in parts[:dim])] = float(parts[dim])
    return MultiPoly.from_terms(
        terms,
        dim,
        int(meta["degree"]),
        meta.get("basis", "monomial"),
        _floats(meta.get("box_lo", "none")),
        _floats(meta.get("box_hi", "none")),
    )


# Boolean functions: sparse "bitmask coefficient" text, dense little-endian float64 table


def dump_fourier_sparse(f: BooleanFn) -> str:
    lines = [_header({"n": f.n})]
    for mask, c in sorted(f.fourier.items()):
        lines.append(f"{mask} {c!r}\n")
    return "".join(lines)


def load_fourier_sparse(text: str) -> BooleanFn:
    rows = text.splitlines()
    n = int(_parse_header(rows[0])["n"])
    coefficients = {}
    for row in rows[1:]:
        if row.strip():
            mask, value = row.split()
            coefficients[int(mask)] = float(value)
    return BooleanFn.from_fourier(n, coefficients)


def dump_table_binary(f: BooleanFn) -> bytes:
    if f.table is None:
        raise ValueError("value table not computed")
    return struct.pack("<Q", f.n) + np.asarray(f.table, dtype="<f8").tobytes()


def load_table_binary(data: bytes) -> BooleanFn:
    (n,) = struct.unpack("<Q", data[:8])
    table = np.frombuffer(data[8:], dtype="<f8").astype(float)
    if table.size != 1 << n:
        raise ConfigError(f"dense table holds {table.size} values, expected 2^{n}")
    return BooleanFn(n=n, table=table)


# Network checkpoints: one text header line, then the flat float64 parameter vector


def save_checkpoint(m: MLP, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"mlp sizes={','.join(str(s) for s in m.sizes)} activation={m.activation}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(net_service.flatten(m).astype("<f8").tobytes())
    logger.debug("checkpoint_saved", path=str(path), n_params=m.n_params)
    return path


def load_checkpoint(path: PathLike) -> MLP:
    data = Path(path).read_bytes()
    newline = data.index(b"\n")
    tag, *fields = data[:newline].decode("ascii").split()
    if tag != "mlp":
        raise ConfigError(f"{path} is not a network checkpoint")
    meta = dict(item.split("=", 1) for item in fields)
    sizes = [int(s) for s in meta["sizes"].split(",")]
    template = net_service.init_mlp(sizes, meta["activation"], seed=0)
    theta = np.frombuffer(data[newline + 1 :], dtype="<f8").astype(float)
    return net_service.unflatten(template, theta)
