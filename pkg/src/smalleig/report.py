"""Structured run reports: communication counters plus accuracy summary.

The report is a self-describing JSON document with a versioned schema.
Counter sections mirror the solver's phase labels:

* "trd" -- Send Piv, Send yt, Send xt, MatVec Reduce, Matvec, Update,
  Other (Matvec and Update are compute phases and always show zeros);
* "hit" -- Send Piv, HIT Ker, Other (HIT Ker is compute-only);
* "setup" -- everything outside those stages (matrix distribution etc.).

Counter values come verbatim from the fabric's accounting; totals are
cross-checked against the per-section sums when the report is built.
"""

import json
import time

SCHEMA_VERSION = 1

TRD_CATEGORIES = ("Send Piv", "Send yt", "Send xt", "MatVec Reduce", "Matvec", "Update", "Other")
HIT_CATEGORIES = ("Send Piv", "HIT Ker", "Other")

_FIELDS = ("calls", "msgs", "bytes", "delivered_bytes")


def _zero():
    return {f: 0 for f in _FIELDS}


def _cat_dict(cat):
    return {f: getattr(cat, f) for f in _FIELDS}


def _section(stats, prefix, names):
    """Fixed-name table for one stage; unknown labels fold into Other."""
    table = {name: _zero() for name in names}
    for key, cat in stats.by_category.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix) :]
        if name not in table:
            name = "Other"
        for f in _FIELDS:
            table[name][f] += getattr(cat, f)
    return table


def build_report(config, stats, accuracy_report=None, eigenvalues=None, wall_time_s=None):
    """Assemble the report document for one finished solve."""
    setup = {}
    for key, cat in sorted(stats.by_category.items()):
        if not (key.startswith("trd:") or key.startswith("hit:")):
            setup[key] = _cat_dict(cat)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "created_unix": time.time(),
        "config": {
            "n": config.n,
            "p_x": config.p_x,
            "p_y": config.p_y,
            "trd_pivot_send": config.trd_variant.pivot_send,
            "trd_presend_frac": config.trd_variant.presend_frac,
            "trd_reduce": config.trd_variant.reduce_impl,
            "hit_gather": config.hit_variant.gather,
            "hit_mblk": config.hit_variant.mblk,
            "ml": config.mems.ml,
            "el": config.mems.el,
            "tol": config.mems.tol,
        },
        "counters": {
            "trd": _section(stats, "trd:", TRD_CATEGORIES),
            "hit": _section(stats, "hit:", HIT_CATEGORIES),
            "setup": setup,
            "total": {f: stats.total(f) for f in _FIELDS},
        },
        "wall_time_s": wall_time_s,
    }
    tally = {f: 0 for f in _FIELDS}
    for table in (doc["counters"]["trd"], doc["counters"]["hit"], setup):
        for cat in table.values():
            for f in _FIELDS:
                tally[f] += cat[f]
    if tally != doc["counters"]["total"]:
        raise RuntimeError(f"counter sections do not tally: {tally} vs {doc['counters']['total']}")

    if eigenvalues is not None:
        doc["eigenvalues"] = [float(v) for v in eigenvalues]
    if accuracy_report is not None:
        doc["accuracy"] = {
            "max_residual": accuracy_report.max_residual,
            "max_orth_dev": accuracy_report.max_orth_dev,
            "norm_a_fro": accuracy_report.norm_a_fro,
        }
    return doc


def save_report(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
