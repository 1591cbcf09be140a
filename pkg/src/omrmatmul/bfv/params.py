"""BFV parameter sets and the ``.cfg`` parameter-file format.

Parameter file schema (INI, one ``[params]`` section)::

    [params]
    n = 4096            # ring dimension, power of two
    t = 786433          # plaintext modulus, prime, t = 1 (mod 2n)
    q_bits = 60         # bit size of each ciphertext-modulus limb
    q_count = 3         # number of ciphertext-modulus limbs
    p_bits = 60         # bit size of each special-modulus limb
    p_count = 2         # number of special-modulus limbs
    dnum = 2            # key-switching digits
    seed = 0            # default seed for key generation / encryption

Explicit primes may be given instead of generated ones with
``q_limbs = q0, q1, ...`` and ``p_limbs = p0, ...``. An optional
``[matmul]`` section carries ``gtilde``, ``btilde`` and ``k``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from sympy import isprime

from ..modring import ConfigurationError, generate_ntt_primes

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
PRESETS = {"desk": DATA_DIR / "params" / "desk.cfg", "full": DATA_DIR / "params" / "full.cfg"}


@dataclass(frozen=True)
class HeParams:
    n: int
    t: int
    q_limbs: tuple
    p_limbs: tuple
    dnum: int = 2
    seed: int = 0
    matmul: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "q_limbs", tuple(int(q) for q in self.q_limbs))
        object.__setattr__(self, "p_limbs", tuple(int(p) for p in self.p_limbs))
        n = self.n
        if n < 4 or n & (n - 1):
            raise ConfigurationError(f"n={n} must be a power of two >= 4")
        if not isprime(self.t) or (self.t - 1) % (2 * n):
            raise ConfigurationError(f"t={self.t} must be a prime with t = 1 (mod {2 * n}) for slot encoding")
        limbs = self.q_limbs + self.p_limbs
        if len(set(limbs)) != len(limbs):
            raise ConfigurationError("limb primes must be distinct")
        for q in limbs:
            if (q - 1) % (2 * n) or not isprime(q):
                raise ConfigurationError(f"limb {q} is not an NTT-friendly prime at n={n}")
        if self.q_limbs and self.t >= min(self.q_limbs):
            raise ConfigurationError("t must be smaller than every ciphertext limb")
        if not self.q_limbs or not self.p_limbs:
            raise ConfigurationError("need at least one ciphertext limb and one special limb")
        if not 1 <= self.dnum <= len(self.q_limbs):
            raise ConfigurationError(f"dnum={self.dnum} must lie in [1, {len(self.q_limbs)}]")

    @classmethod
    def generate(cls, n, t, q_bits, q_count, p_bits, p_count, dnum=2, seed=0, matmul=None):
        q = generate_ntt_primes(q_bits, q_count, n)
        p = generate_ntt_primes(p_bits, p_count, n, exclude=q)
        return cls(n, t, tuple(q), tuple(p), dnum, seed, dict(matmul or {}))

    @property
    def slot_count(self):
        return self.n // 2

    @property
    def Q(self):
        return math.prod(self.q_limbs)

    @property
    def P(self):
        return math.prod(self.p_limbs)

    @property
    def log_q(self):
        return math.ceil(math.log2(self.Q))

    @property
    def log_pq(self):
        return math.ceil(math.log2(self.Q * self.P))

    @cached_property
    def digits(self):
        """Contiguous row-index groups of the Q limbs, one per key-switching digit."""
        L = len(self.q_limbs)
        size = -(-L // self.dnum)
        return tuple(tuple(range(i, min(i + size, L))) for i in range(0, L, size))


def _ints(text):
    return [int(x) for x in text.replace(",", " ").split()]


def load_params(source):
    """Read a parameter file (path or preset name ``desk`` / ``full``)."""
    path = PRESETS.get(str(source), Path(source))
    if not path.exists():
        raise FileNotFoundError(f"parameter file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from exc
    if "params" not in cp:
        raise ConfigurationError(f"{path}: missing [params] section")
    sec = cp["params"]
    try:
        n = sec.getint("n")
        t = sec.getint("t")
        dnum = sec.getint("dnum", 2)
        seed = sec.getint("seed", 0)
        matmul = {k: int(v) for k, v in cp["matmul"].items()} if "matmul" in cp else {}
        if "q_limbs" in sec:
            return HeParams(n, t, _ints(sec["q_limbs"]), _ints(sec["p_limbs"]), dnum, seed, matmul)
        return HeParams.generate(
            n, t, sec.getint("q_bits"), sec.getint("q_count"), sec.getint("p_bits"), sec.getint("p_count"),
            dnum, seed, matmul,
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{path}: {exc}") from exc
