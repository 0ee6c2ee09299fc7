"""Closed-form flop and work model for residuals, products and AD assembly.

All relative works are expressed in units of one residual assembly. The
assembled matrix-vector products are tabulated in raw flops relative to the
residual; they run about three times faster per flop, so that divisor is
applied wherever products are compared with residual-type work.
"""

from __future__ import annotations

import argparse
import csv
import sys
import threading
from decimal import ROUND_HALF_EVEN, Decimal

FORWARD_PRODUCT = 2.25  # 1.25 + k with k = 1
REVERSE_PRODUCT = 3.5  # 1.25 + 2.25 k with k = 1
SECOND_ORDER_PRODUCT = REVERSE_PRODUCT * FORWARD_PRODUCT  # 7.875
MATVEC_SPEEDUP = 3.0
PRECONDITIONER_FACTOR = 2.0  # ILUT with fill ratio 2 has twice the nonzeros


def _check(p, d):
    if d not in (2, 3):
        raise ValueError(f"unsupported dimension {d}")
    if p < 1:
        raise ValueError("degree must be >= 1")


def round_half_even(value, digits):
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_EVEN))


def matrix_free_constants():
    return {"forward": FORWARD_PRODUCT, "reverse": REVERSE_PRODUCT, "second_order": SECOND_ORDER_PRODUCT}


def residual_work(p, d):
    """Flops ``(volume, face, total)`` to assemble one cell's residual."""
    _check(p, d)
    n_p = (p + 1) ** d
    n_f = (p + 1) ** (d - 1)
    if d == 2:
        vol = 32 * n_p ** 2 + 45 * n_p
        face = 32 * n_p * n_f + 227 * n_f
    else:
        vol = 58 * n_p ** 2 + 121 * n_p
        face = 48 * n_p * n_f + 299 * n_f
    return vol, face, vol + d * face


def matvec_work(operator, p, d):
    """Flops and raw relative work of an assembled product per cell block-row.

    ``operator`` is one of ``R_u``, ``R_x`` or ``R_xx``; ``lam^T R_uu`` shares
    the ``R_u`` pattern and ``lam^T R_ux`` the ``R_x`` pattern.
    """
    _check(p, d)
    n = (p + 1) ** (2 * d)
    if operator in ("R_u", "R_uu"):
        flops = (4 * d ** 3 + 18 * d ** 2 + 24 * d + 8) * n
    elif operator in ("R_x", "R_ux", "R_xu"):
        flops = (2 * d ** 2 + 4 * d) * n
    elif operator == "R_xx":
        flops = (2 * d ** 2 + 4 * d) * n * d // (d + 2)
    else:
        raise ValueError(f"unknown operator {operator!r}")
    return flops, flops / residual_work(p, d)[2]


def ad_assembly_relwork(target, p, d):
    """Relative work to form ``target`` explicitly with forward-mode AD."""
    _check(p, d)
    vol, face, total = residual_work(p, d)
    k = (d + 2) * (p + 1) ** d
    ru = (vol * (1.25 + k) + d * face * (1.25 + 2 * k)) / total
    rx = 1.25 + d * (p + 1) ** d
    table = {"R_u": ru, "R_x": rx, "R_uu": REVERSE_PRODUCT * ru,
             "R_ux": REVERSE_PRODUCT * rx, "R_xu": REVERSE_PRODUCT * rx, "R_xx": REVERSE_PRODUCT * rx}
    if target not in table:
        raise ValueError(f"unknown target {target!r}")
    return table[target]


def breakeven_value(target, p, d):
    """Products needed before assembling ``target`` beats on-the-fly AD products."""
    if target == "R_x":
        cost, free, op = ad_assembly_relwork("R_x", p, d) / 2.0, FORWARD_PRODUCT, "R_x"
    elif target == "R_uu":
        cost, free, op = ad_assembly_relwork("R_uu", p, d), SECOND_ORDER_PRODUCT, "R_u"
    elif target == "R_ux":
        cost, free, op = ad_assembly_relwork("R_ux", p, d) / 2.0, SECOND_ORDER_PRODUCT, "R_x"
    elif target == "R_xx":
        cost, free, op = ad_assembly_relwork("R_xx", p, d), SECOND_ORDER_PRODUCT, "R_xx"
    else:
        raise ValueError(f"unknown target {target!r}")
    return cost / (free - matvec_work(op, p, d)[1] / MATVEC_SPEEDUP)


def breakeven_count(target, p, d):
    return int(round_half_even(breakeven_value(target, p, d), 0))


TABLES = {
    "residual": ("volume", "face", "total"),
    "vmult-ru": ("flops", "relative"),
    "vmult-rx": ("flops", "relative"),
    "vmult-rxx": ("flops", "relative"),
    "assembly-ru": ("relative",),
    "assembly-rx": ("relative",),
    "assembly-uu": ("relative",),
    "assembly-ux": ("relative",),
    "breakeven-rx": ("count",),
    "breakeven-uu": ("count",),
    "breakeven-ux": ("count",),
    "breakeven-xx": ("count",),
}


def table_row(name, p, d):
    """One row of a named cost table, rounded as tabulated."""
    if name == "residual":
        return residual_work(p, d)
    if name.startswith("vmult-"):
        op = {"ru": "R_u", "rx": "R_x", "rxx": "R_xx"}[name[6:]]
        flops, rel = matvec_work(op, p, d)
        return flops, round_half_even(rel, 1 if op == "R_u" else 2)
    if name.startswith("assembly-"):
        t = {"ru": "R_u", "rx": "R_x", "uu": "R_uu", "ux": "R_ux"}[name[9:]]
        return (round_half_even(ad_assembly_relwork(t, p, d), 1),)
    if name.startswith("breakeven-"):
        t = {"rx": "R_x", "uu": "R_uu", "ux": "R_ux", "xx": "R_xx"}[name[10:]]
        return (breakeven_count(t, p, d),)
    raise ValueError(f"unknown table {name!r}")


class CostLedger:
    """Thread-safe event counters converted to work in residual-assembly units.

    Linear-solver iterations cost one assembled ``R_u`` product plus one ILUT
    application at twice that product. Products of assembled matrices use
    the tabulated relative flops divided by the matvec speed-up.
    """

    def __init__(self, p, d=2):
        _check(p, d)
        self.p, self.d = p, d
        mv = {op: matvec_work(op, p, d)[1] / MATVEC_SPEEDUP for op in ("R_u", "R_x", "R_xx")}
        self.unit_cost = {
            "residual": 1.0,
            "assemble_R_u": ad_assembly_relwork("R_u", p, d),
            "assemble_R_x": ad_assembly_relwork("R_x", p, d),
            "assemble_R_uu": ad_assembly_relwork("R_uu", p, d),
            "assemble_R_ux": ad_assembly_relwork("R_ux", p, d),
            "assemble_R_xx": ad_assembly_relwork("R_xx", p, d),
            "matvec_R_u": mv["R_u"],
            "matvec_R_x": mv["R_x"],
            "matvec_R_uu": mv["R_u"],
            "matvec_R_ux": mv["R_x"],
            "matvec_R_xx": mv["R_xx"],
            "precond_apply": PRECONDITIONER_FACTOR * mv["R_u"],
            "forward_iteration": (1.0 + PRECONDITIONER_FACTOR) * mv["R_u"],
            "adjoint_iteration": (1.0 + PRECONDITIONER_FACTOR) * mv["R_u"],
            "forward_solve": 0.0,
            "adjoint_solve": 0.0,
        }
        self.counts = {k: 0 for k in self.unit_cost}
        self._lock = threading.Lock()

    def charge(self, event, count=1):
        if event not in self.counts:
            raise KeyError(f"unknown ledger event {event!r}")
        if count < 0:
            raise ValueError("ledger counts cannot decrease")
        with self._lock:
            self.counts[event] += count

    def solve(self, kind, iterations):
        """Record one forward or adjoint linear solve and its iterations."""
        self.charge(f"{kind}_solve")
        self.charge(f"{kind}_iteration", iterations)

    @property
    def total_work(self):
        with self._lock:
            return sum(self.counts[k] * self.unit_cost[k] for k in self.counts)

    def snapshot(self):
        with self._lock:
            return dict(self.counts)

    def work_of(self, counts):
        return sum(counts.get(k, 0) * self.unit_cost[k] for k in self.unit_cost)

    def work_by_category(self):
        """Work split into residual, assembly, matvec, solve and preconditioner parts."""
        out = {"residual": 0.0, "assembly": 0.0, "matvec": 0.0, "solve": 0.0, "precond": 0.0}
        for k, c in self.snapshot().items():
            cat = ("residual" if k == "residual" else "assembly" if k.startswith("assemble")
                   else "matvec" if k.startswith("matvec") else "precond" if k == "precond_apply"
                   else "solve")
            out[cat] += c * self.unit_cost[k]
        return out


def _parse_range(text):
    if "-" in text:
        a, b = text.split("-", 1)
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",")]


def main(argv=None):
    parser = argparse.ArgumentParser(prog="costmodel", description="Print cost tables as CSV.")
    sub = parser.add_subparsers(dest="command", required=True)
    t = sub.add_parser("table", help="emit one cost table")
    t.add_argument("name", choices=sorted(TABLES))
    t.add_argument("--p", default="1-4", help="degree range, e.g. 1-4 or 1,3")
    t.add_argument("--d", default="2,3", help="dimensions, e.g. 2 or 2,3")
    args = parser.parse_args(argv)
    try:
        ps, ds = _parse_range(args.p), _parse_range(args.d)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["p", "d", *TABLES[args.name]])
        for p in ps:
            for d in ds:
                w.writerow([p, d, *table_row(args.name, p, d)])
    except ValueError as exc:
        parser.error(str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
