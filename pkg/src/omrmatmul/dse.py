"""Analytic latency/resource models for a MatMul accelerator and a grid search over them.

Latency of one MatMul with PI parallel PCmul cores::

    IL' = max{(btilde/PI) * L_M' + L_A', L_R'} + L_A'
    TL' = (btilde - 1) * L_R' + gtilde * IL'

DSP usage: D = (PI + 1) * d_CCadd + PI * d_PCmul + d_Rot.

Fixture file format (line-based INI)::

    [ccadd pc=16]          # one section per measured operator configuration
    latency_ms = 0.80
    dsp = 1
    bram = 0               # 36 Kb blocks
    uram = 0               # 288 Kb blocks

    [rot pc=16 pb=64]      # Rot entries are keyed by PC and PB
    ...

    [meta]
    rot_ntt_latency_share = 0.8
    rot_ntt_dsp_share = 0.8
    matrix_buffer_uram_total = 262
    transfer_buffer_count = 3

A grid point with a fixture entry uses it as is. Other points are scaled
from the operator's anchor (the entry with the largest PC, then PB):
CCadd/PCmul latency goes as 1/PC and resources as PC; Rot latency and DSP
split into an NTT share scaled by 1/PB (resp. PB) and a remainder scaled by
1/PC (resp. PC), with BRAM proportional to PB.
"""
from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path

from .modring import ConfigurationError

DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_FIXTURE = DATA_DIR / "fixtures" / "u55c_anchor.cfg"
DEFAULT_BUDGET = DATA_DIR / "budgets" / "u55c.cfg"

PC_GRID = (1, 2, 4, 8, 16)
PB_GRID = (8, 16, 32, 64)
PI_GRID = (1, 2, 4, 8, 16)
PC_CAP = 16
URAM_BITS = 288 * 1024
OPERATORS = ("ccadd", "pcmul", "rot")


class FixtureError(ConfigurationError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


def _pow2(x):
    return isinstance(x, int) and x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class DesignPoint:
    pc_ccadd: int
    pc_pcmul: int
    pi: int
    pc_rot: int
    pb: int
    wide_buffers: bool = False

    def __post_init__(self):
        for name in ("pc_ccadd", "pc_pcmul", "pi", "pc_rot", "pb"):
            if not _pow2(getattr(self, name)):
                raise ValueError(f"{name}={getattr(self, name)} must be a power of two >= 1")
        if not self.wide_buffers and max(self.pc_ccadd, self.pc_pcmul, self.pc_rot) > PC_CAP:
            raise ValueError(f"PC above {PC_CAP} needs wide_buffers=True")

    def as_tuple(self):
        return (self.pc_ccadd, self.pc_pcmul, self.pi, self.pc_rot, self.pb)


@dataclass(frozen=True)
class OperatorCost:
    latency_ms: float
    dsp: int
    bram: int = 0
    uram: int = 0

    def __post_init__(self):
        if min(self.latency_ms, self.dsp, self.bram, self.uram) < 0:
            raise ValueError("operator costs must be nonnegative")


@dataclass(frozen=True)
class CostInputs:
    """One cost figure per operator class at a fixed configuration."""

    ccadd: OperatorCost
    pcmul: OperatorCost
    rot: OperatorCost

    @classmethod
    def from_latencies(cls, l_a, l_m, l_r):
        return cls(OperatorCost(l_a, 0), OperatorCost(l_m, 0), OperatorCost(l_r, 0))


@dataclass(frozen=True)
class FpgaBudget:
    dsp_total: int
    bram_total: int
    uram_total: int
    lut_total: int = 0
    ff_total: int = 0

    def __post_init__(self):
        if min(self.dsp_total, self.bram_total, self.uram_total) < 0:
            raise ValueError("budget totals must be nonnegative")

    def fits(self, dsp, bram, uram):
        return dsp <= self.dsp_total and bram <= self.bram_total and uram <= self.uram_total


@dataclass(frozen=True)
class CostResult:
    il_prime_ms: float
    tl_prime_ms: float
    dsp_used: int
    bram_used: int
    uram_used: int
    feasible: bool

    @property
    def resource_score(self):
        return self.dsp_used + -(-self.bram_used // 2) + self.uram_used


@dataclass(frozen=True)
class BufferInventory:
    """On-chip buffers counted by :func:`memory_usage`."""

    rot: bool = True
    matrix_buffer_uram_total: int = 0
    transfer_buffers: int = 0


# -- formulas -------------------------------------------------------------------


def iteration_latency(costs, gtilde, btilde, pi):
    if pi < 1 or btilde < 1 or gtilde < 1:
        raise ValueError("gtilde, btilde and pi must be >= 1")
    if pi > btilde:
        warnings.warn(f"pi={pi} exceeds btilde={btilde}; {pi - btilde} PCmul cores stay idle", stacklevel=2)
    l_a, l_m, l_r = costs.ccadd.latency_ms, costs.pcmul.latency_ms, costs.rot.latency_ms
    return max(btilde / pi * l_m + l_a, l_r) + l_a


def total_latency(costs, gtilde, btilde, pi):
    return (btilde - 1) * costs.rot.latency_ms + gtilde * iteration_latency(costs, gtilde, btilde, pi)


def dsp_usage(pi, d_ccadd, d_pcmul, d_rot):
    if min(pi, d_ccadd, d_pcmul, d_rot) < 0:
        raise ValueError("dsp_usage inputs must be nonnegative")
    return (pi + 1) * d_ccadd + pi * d_pcmul + d_rot


def transfer_buffer_uram(n, limb_bits, width_factor=1):
    """URAMs for one double-buffered single-limb buffer; each half rounds up separately."""
    return 2 * math.ceil(n * limb_bits * width_factor / URAM_BITS)


def memory_usage(point, params, costs, inventory=None):
    """(BRAM, URAM) of the accelerator. ``costs`` is the resolved :class:`CostInputs`."""
    inv = inventory if inventory is not None else BufferInventory()
    bram = uram = 0
    if inv.rot:
        bram += costs.rot.bram
        uram += costs.rot.uram
    bram += point.pi * costs.pcmul.bram + (point.pi + 1) * costs.ccadd.bram
    uram += point.pi * costs.pcmul.uram + (point.pi + 1) * costs.ccadd.uram
    if inv.matrix_buffer_uram_total:
        uram += point.pi * -(-inv.matrix_buffer_uram_total // point.pi)
    if inv.transfer_buffers:
        limb_bits = max(q.bit_length() for q in params.q_limbs)
        widen = max(1, max(point.pc_ccadd, point.pc_pcmul, point.pc_rot) // PC_CAP)
        uram += transfer_buffer_uram(params.n, limb_bits, widen)  # ct_b carries the extra bandwidth
        uram += (inv.transfer_buffers - 1) * transfer_buffer_uram(params.n, limb_bits)
    return bram, uram


# -- fixtures -------------------------------------------------------------------

_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)((?:\s+[a-z]+\s*=\s*\d+)*)\s*\]$")
_KV = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(\S+)$")
_ENTRY_KEYS = {"latency_ms": Fraction, "dsp": int, "bram": int, "uram": int}
_META_KEYS = {
    "rot_ntt_latency_share": Fraction,
    "rot_ntt_dsp_share": Fraction,
    "matrix_buffer_uram_total": int,
    "transfer_buffer_count": int,
}


def _strip(line):
    return re.split(r"\s[#;]|^[#;]", line, maxsplit=1)[0].strip()


def _parse_blocks(text, path):
    """Yield (header, header_line, {key: (value, line)}) for each section."""
    blocks, cur = [], None
    for no, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("["):
            m = _SECTION.match(line)
            if not m:
                raise FixtureError(path, no, f"malformed section header {line!r}")
            cur = (m.group(1).lower(), m.group(2), no, {})
            blocks.append(cur)
            continue
        m = _KV.match(line)
        if not m:
            raise FixtureError(path, no, f"expected 'key = value', got {line!r}")
        if cur is None:
            raise FixtureError(path, no, "key outside any section")
        if m.group(1) in cur[3]:
            raise FixtureError(path, no, f"duplicate key {m.group(1)!r}")
        cur[3][m.group(1)] = (m.group(2), no)
    return blocks


def _convert(path, items, schema, no):
    out = {}
    for key, (val, line) in items.items():
        if key not in schema:
            raise FixtureError(path, line, f"unknown key {key!r}")
        try:
            out[key] = schema[key](val)
        except (ValueError, ZeroDivisionError):
            raise FixtureError(path, line, f"bad value {val!r} for {key}") from None
        if out[key] < 0:
            raise FixtureError(path, line, f"{key} must be nonnegative")
    return out


@dataclass(frozen=True)
class CostFixture:
    """Measured operator entries keyed by (operator, pc) or ('rot', pc, pb)."""

    entries: dict
    rot_ntt_latency_share: Fraction = Fraction(4, 5)
    rot_ntt_dsp_share: Fraction = Fraction(4, 5)
    matrix_buffer_uram_total: int = 0
    transfer_buffer_count: int = 3
    source: str = "<memory>"

    def anchor(self, op):
        keys = [k for k in self.entries if k[0] == op]
        if not keys:
            raise ConfigurationError(f"{self.source}: no entry for operator {op!r}")
        return max(keys, key=lambda k: k[1:])

    def inventory(self):
        return BufferInventory(True, self.matrix_buffer_uram_total, self.transfer_buffer_count)

    def _scaled(self, op, pc):
        key = (op, pc)
        if key in self.entries:
            return _as_float(self.entries[key])
        a = self.anchor(op)
        e = self.entries[a]
        r = Fraction(pc, a[1])
        return OperatorCost(
            float(e.latency_ms / r), math.ceil(e.dsp * r), math.ceil(e.bram * r), math.ceil(e.uram * r)
        )

    def _rot(self, pc, pb):
        key = ("rot", pc, pb)
        if key in self.entries:
            return _as_float(self.entries[key])
        a = self.anchor("rot")
        e = self.entries[a]
        rc, rb = Fraction(pc, a[1]), Fraction(pb, a[2])
        sl, sd = self.rot_ntt_latency_share, self.rot_ntt_dsp_share
        lat = e.latency_ms * (sl / rb + (1 - sl) / rc)
        dsp = e.dsp * (sd * rb + (1 - sd) * rc)
        return OperatorCost(float(lat), math.ceil(dsp), math.ceil(e.bram * rb), e.uram)

    def costs(self, point):
        return CostInputs(
            self._scaled("ccadd", point.pc_ccadd), self._scaled("pcmul", point.pc_pcmul), self._rot(point.pc_rot, point.pb)
        )


def _as_float(e):
    return OperatorCost(float(e.latency_ms), e.dsp, e.bram, e.uram)


def _entry(values):
    v = dict(values)
    return OperatorCost(v.get("latency_ms", Fraction(0)), v.get("dsp", 0), v.get("bram", 0), v.get("uram", 0))


def load_fixture(path=DEFAULT_FIXTURE):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"fixture file not found: {path}")
    entries, meta = {}, {}
    for name, attrs, no, items in _parse_blocks(path.read_text(), path):
        if name == "meta":
            if attrs.strip():
                raise FixtureError(path, no, "[meta] takes no attributes")
            meta.update(_convert(path, items, _META_KEYS, no))
            continue
        if name not in OPERATORS:
            raise FixtureError(path, no, f"unknown operator {name!r}")
        kv = dict(re.findall(r"([a-z]+)\s*=\s*(\d+)", attrs))
        want = {"pc", "pb"} if name == "rot" else {"pc"}
        if set(kv) != want:
            raise FixtureError(path, no, f"[{name}] needs attributes {sorted(want)}")
        key = (name, int(kv["pc"])) + ((int(kv["pb"]),) if name == "rot" else ())
        if not all(_pow2(x) for x in key[1:]):
            raise FixtureError(path, no, "pc and pb must be powers of two")
        if key in entries:
            raise FixtureError(path, no, f"duplicate entry {key}")
        missing = {"latency_ms", "dsp"} - set(items)
        if missing:
            raise FixtureError(path, no, f"[{name}] is missing {sorted(missing)}")
        entries[key] = _entry(_convert(path, items, _ENTRY_KEYS, no))
    for share in ("rot_ntt_latency_share", "rot_ntt_dsp_share"):
        if share in meta and meta[share] > 1:
            raise ConfigurationError(f"{path}: {share} must lie in [0, 1]")
    fx = CostFixture(entries, source=str(path), **meta)
    for op in OPERATORS:
        fx.anchor(op)
    return fx


def load_budget(path=DEFAULT_BUDGET):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"budget file not found: {path}")
    blocks = _parse_blocks(path.read_text(), path)
    if [b[0] for b in blocks] != ["budget"]:
        raise ConfigurationError(f"{path}: expected a single [budget] section")
    keys = {"dsp": int, "bram": int, "uram": int, "lut": int, "ff": int}
    vals = _convert(path, blocks[0][3], keys, blocks[0][2])
    missing = {"dsp", "bram", "uram"} - set(vals)
    if missing:
        raise ConfigurationError(f"{path}: budget is missing {sorted(missing)}")
    return FpgaBudget(vals["dsp"], vals["bram"], vals["uram"], vals.get("lut", 0), vals.get("ff", 0))


# -- exploration ----------------------------------------------------------------


def evaluate(point, fixture, budget, params, gtilde, btilde):
    costs = fixture.costs(point)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        il = iteration_latency(costs, gtilde, btilde, point.pi)
        tl = total_latency(costs, gtilde, btilde, point.pi)
    dsp = dsp_usage(point.pi, costs.ccadd.dsp, costs.pcmul.dsp, costs.rot.dsp)
    bram, uram = memory_usage(point, params, costs, fixture.inventory())
    return CostResult(il, tl, dsp, bram, uram, budget.fits(dsp, bram, uram))


def grid(pc=PC_GRID, pb=PB_GRID, pi=PI_GRID):
    for c_a, c_m, p_i, c_r, b in product(pc, pc, pi, pc, pb):
        yield DesignPoint(c_a, c_m, p_i, c_r, b, wide_buffers=max(c_a, c_m, c_r) > PC_CAP)


def rank_key(item):
    pt, res = item
    return (round(res.tl_prime_ms, 9), res.resource_score, -pt.pc_pcmul, -pt.pc_ccadd, -pt.pc_rot, -pt.pb, pt.pi)


@dataclass
class DseReport:
    ranked: list
    evaluated: int
    gtilde: int
    btilde: int
    budget: FpgaBudget
    message: str = ""
    infeasible: list = field(default_factory=list)

    @property
    def empty(self):
        return not self.ranked

    def top(self, count=4):
        return self.ranked[:count]

    def to_dict(self, limit=None):
        rows = []
        for order, (pt, res) in enumerate(self.ranked[:limit], 1):
            rows.append({
                "order": order,
                "ccadd_pc": pt.pc_ccadd,
                "pcmul_pc": pt.pc_pcmul,
                "pcmul_pi": pt.pi,
                "rot_pc": pt.pc_rot,
                "rot_pb": pt.pb,
                "il_prime_ms": round(res.il_prime_ms, 6),
                "tl_prime_ms": round(res.tl_prime_ms, 6),
                "dsp": res.dsp_used,
                "bram": res.bram_used,
                "uram": res.uram_used,
                "feasible": res.feasible,
            })
        return {
            "gtilde": self.gtilde,
            "btilde": self.btilde,
            "budget": asdict(self.budget),
            "evaluated": self.evaluated,
            "feasible": len(self.ranked),
            "message": self.message,
            "ranked": rows,
        }

    def to_json(self, limit=None):
        return json.dumps(self.to_dict(limit), indent=2, sort_keys=True) + "\n"

    def table(self, limit=10):
        head = f"{'order':>5} {'CCadd PC':>8} {'PCmul PC':>8} {'PI':>3} {'Rot PC':>6} {'PB':>3} {'TL (ms)':>10} {'DSP':>6} {'BRAM':>5} {'URAM':>5} feasible"
        lines = [head, "-" * len(head)]
        for r in self.to_dict(limit)["ranked"]:
            lines.append(
                f"{r['order']:>5} {r['ccadd_pc']:>8} {r['pcmul_pc']:>8} {r['pcmul_pi']:>3} {r['rot_pc']:>6} {r['rot_pb']:>3} "
                f"{r['tl_prime_ms']:>10.2f} {r['dsp']:>6} {r['bram']:>5} {r['uram']:>5} {'yes' if r['feasible'] else 'no'}"
            )
        if self.empty:
            lines.append(self.message)
        return "\n".join(lines) + "\n"


def enumerate_and_rank(budget, fixture, params, gtilde=None, btilde=None, points=None):
    """Evaluate every grid point and rank the feasible ones.

    Sort order: TL' ascending, then DSP + ceil(BRAM/2) + URAM ascending, then
    larger PCmul PC first. Remaining ties fall back to the point's fields so
    the order is total.
    """
    gtilde = gtilde or params.matmul.get("gtilde", 23)
    btilde = btilde or params.matmul.get("btilde", 46)
    ok, bad = [], []
    count = 0
    for pt in points if points is not None else grid():
        count += 1
        res = evaluate(pt, fixture, budget, params, gtilde, btilde)
        (ok if res.feasible else bad).append((pt, res))
    ok.sort(key=rank_key)
    msg = "" if ok else f"budget too small: none of the {count} design points fits"
    return DseReport(ok, count, gtilde, btilde, budget, msg, bad)
