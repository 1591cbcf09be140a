"""Binary serialization of secret keys, ciphertexts and rotation keys.

Every file starts with a 16-byte little-endian header::

    offset  size  field
    0       4     magic  b"OMRS" (secret key) | b"OMRC" (ciphertext) | b"OMRK" (rotation key)
    4       2     format version: 1 = 64-bit words, 2 = bit-packed residues
    6       2     flags: bit 0 = NTT domain
    8       4     n
    12      4     limb count L

followed by L u64 limb primes, a u32 count of u64 metadata words, the
metadata words, and the polynomial data, limb-major (all n residues of limb
0, then limb 1, ...). Polynomials follow one another in a fixed order:
ciphertext c0 then c1; rotation key k0_0, k1_0, k0_1, k1_1, ...; the secret
key is one polynomial over QP in coefficient form.

Version 1 stores each residue as a u64 word. Version 2 stores each residue
of a limb with prime q in ``q.bit_length()`` bits, little-endian bit order,
each limb padded to a whole byte.
"""
from __future__ import annotations

import struct

import numpy as np

from ..modring import COEFF, NTT, RnsBasis
from .core import Ciphertext, RnsPoly, RotationKey, SecretKey, context

HEADER = struct.Struct("<4sHHII")
WORDS = 1
PACKED = 2
_KINDS = {SecretKey: b"OMRS", Ciphertext: b"OMRC", RotationKey: b"OMRK"}


def _pack_limb(row, bits):
    shifts = np.arange(bits, dtype=np.uint64)
    b = ((row[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(b.ravel(), bitorder="little").tobytes()


def _unpack_limb(buf, n, bits):
    b = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")[: n * bits]
    b = b.reshape(n, bits).astype(np.uint64)
    return (b << np.arange(bits, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)


def _limb_nbytes(n, q, version):
    return n * 8 if version == WORDS else -(-n * q.bit_length() // 8)


def _poly_bytes(data, qs, version):
    if version == WORDS:
        return data.astype("<u8").tobytes()
    return b"".join(_pack_limb(row, q.bit_length()) for row, q in zip(data, qs))


def _read_poly(buf, off, n, qs, version):
    rows = []
    for q in qs:
        size = _limb_nbytes(n, q, version)
        chunk = buf[off:off + size]
        if len(chunk) != size:
            raise ValueError("truncated polynomial data")
        if version == WORDS:
            rows.append(np.frombuffer(chunk, dtype="<u8").astype(np.uint64))
        else:
            rows.append(_unpack_limb(chunk, n, q.bit_length()))
        off += size
    return np.stack(rows), off


def dumps(obj, version=WORDS):
    if version not in (WORDS, PACKED):
        raise ValueError(f"unknown format version {version}")
    kind = _KINDS[type(obj)]
    params = obj.params
    n = params.n
    if isinstance(obj, SecretKey):
        basis = context(params).qp_basis
        polys, meta, ntt = [basis.from_signed(obj.coeffs.astype(np.int64))], [], False
    elif isinstance(obj, Ciphertext):
        basis = obj.basis
        polys = [obj.c0.data, obj.c1.data]
        meta, ntt = [obj.pending_galois or 0], obj.domain == NTT
    else:
        basis = context(params).qp_basis
        polys = [p.data for pair in obj.digits for p in pair]
        meta, ntt = [obj.galois_element, len(obj.digits), obj.shift or 0], True
    out = [HEADER.pack(kind, version, int(ntt), n, len(basis))]
    out.append(np.array(basis.qs, dtype="<u8").tobytes())
    out.append(struct.pack("<I", len(meta)) + np.array(meta, dtype="<u8").tobytes())
    out.extend(_poly_bytes(p, basis.qs, version) for p in polys)
    return b"".join(out)


def serialized_size(obj, version=WORDS):
    """Byte length of :func:`dumps` output, computed without materialising it."""
    if isinstance(obj, SecretKey):
        qs, npoly, nmeta = obj.params.q_limbs + obj.params.p_limbs, 1, 0
    elif isinstance(obj, Ciphertext):
        qs, npoly, nmeta = obj.basis.qs, 2, 1
    else:
        qs, npoly, nmeta = obj.params.q_limbs + obj.params.p_limbs, 2 * len(obj.digits), 3
    n = obj.params.n
    body = npoly * sum(_limb_nbytes(n, q, version) for q in qs)
    return HEADER.size + 8 * len(qs) + 4 + 8 * nmeta + body


def loads(buf, params):
    magic, version, flags, n, L = HEADER.unpack_from(buf, 0)
    if n != params.n:
        raise ValueError(f"file ring dimension {n} does not match parameters ({params.n})")
    if version not in (WORDS, PACKED):
        raise ValueError(f"unsupported format version {version}")
    off = HEADER.size
    qs = tuple(int(q) for q in np.frombuffer(buf, dtype="<u8", count=L, offset=off))
    off += 8 * L
    (nmeta,) = struct.unpack_from("<I", buf, off)
    off += 4
    meta = [int(x) for x in np.frombuffer(buf, dtype="<u8", count=nmeta, offset=off)]
    off += 8 * nmeta
    basis = RnsBasis.from_primes(qs, n)
    domain = NTT if flags & 1 else COEFF
    if magic == b"OMRS":
        data, _ = _read_poly(buf, off, n, qs, version)
        row, q = data[0].astype(np.int64), qs[0]
        return SecretKey(np.where(row == q - 1, -1, row).astype(np.int8), params)
    if magic == b"OMRC":
        c0, off = _read_poly(buf, off, n, qs, version)
        c1, off = _read_poly(buf, off, n, qs, version)
        return Ciphertext(RnsPoly(c0, basis, domain), RnsPoly(c1, basis, domain), params, "derived", meta[0] or None)
    if magic == b"OMRK":
        g, dnum, shift = meta
        digits = []
        for _ in range(dnum):
            k0, off = _read_poly(buf, off, n, qs, version)
            k1, off = _read_poly(buf, off, n, qs, version)
            digits.append((RnsPoly(k0, basis, NTT), RnsPoly(k1, basis, NTT)))
        return RotationKey(g, tuple(digits), params, shift or None)
    raise ValueError(f"unknown magic {magic!r}")


def save(path, obj, version=WORDS):
    with open(path, "wb") as fh:
        fh.write(dumps(obj, version))


def load(path, params):
    with open(path, "rb") as fh:
        return loads(fh.read(), params)
