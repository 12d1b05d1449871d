"""Text artifact writers: CSV, PGM, and JSON renderings of result objects.

Everything here is deterministic down to the byte. Floats go through
``%.17g`` so round-tripping loses nothing, line endings are LF on every
platform, JSON keys are sorted, and complex numbers are spelled as
``{"re": ..., "im": ...}`` objects.
"""

import dataclasses
import enum
import json

import numpy as np

from .geometry import angles_of_point

PGM_MAXVAL = 5
_PGM_LINE_LIMIT = 68


def fmt_float(x):
    """Shortest float text that round-trips through a 64-bit read."""
    return format(float(x), ".17g")


def write_text(path, text):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def region_map_csv(rm):
    lines = ["ix,iy,x,y,label"]
    for iy in range(rm.n):
        y = fmt_float(rm.centers[iy])
        for ix in range(rm.n):
            lines.append(f"{ix},{iy},{fmt_float(rm.centers[ix])},{y},{int(rm.labels[iy, ix])}")
    return "\n".join(lines) + "\n"


def region_map_pgm(rm):
    """Plain (P2) PGM of the label raster, 5 as the brightest class.

    Image rows run top to bottom, so the raster is emitted with the
    frequency y axis pointing up: the last label row comes first.
    """
    lines = ["P2", f"{rm.n} {rm.n}", str(PGM_MAXVAL)]
    for iy in range(rm.n - 1, -1, -1):
        tokens = [str(int(v)) for v in rm.labels[iy]]
        line = ""
        for tok in tokens:
            if line and len(line) + 1 + len(tok) > _PGM_LINE_LIMIT:
                lines.append(line)
                line = tok
            else:
                line = tok if not line else line + " " + tok
        lines.append(line)
    return "\n".join(lines) + "\n"


def fourier_field_csv(field):
    d = field.points.shape[1]
    coords = {2: "x,y", 3: "x,y,z"}.get(d)
    if coords is None:
        coords = ",".join(f"x{i}" for i in range(d))
    lines = [f"{coords},re,im,status"]
    for i in range(len(field.points)):
        pt = ",".join(fmt_float(c) for c in field.points[i])
        v = field.values[i]
        lines.append(f"{pt},{fmt_float(v.real)},{fmt_float(v.imag)},{field.statuses[i].value}")
    return "\n".join(lines) + "\n"


def measurements_csv(measurements):
    lines = ["eta_angles,sigma_angles,re,im,branch"]
    for m in measurements:
        ea = ";".join(fmt_float(a) for a in angles_of_point(m.eta))
        sa = ";".join(fmt_float(a) for a in angles_of_point(m.sigma))
        lines.append(f"{ea},{sa},{fmt_float(m.value.real)},{fmt_float(m.value.imag)},{m.branch.value}")
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.complexfloating):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def to_json(data):
    """Sorted-key, indented JSON with one trailing newline."""
    return json.dumps(_jsonable(data), sort_keys=True, indent=2, allow_nan=True) + "\n"


def component_dict(comp, system=None):
    out = {
        "anchor": list(np.asarray(comp.anchor, dtype=float)),
        "vertices": [list(np.asarray(v, dtype=float)) for v in comp.vertices],
        "edges": [
            {
                "i": e.i,
                "j": e.j,
                "eta": list(np.asarray(e.eta, dtype=float)),
                "sigma": list(np.asarray(e.sigma, dtype=float)),
            }
            for e in comp.edges
        ],
        "shape": comp.shape.value,
        "case_fired": comp.case_fired,
        "case_rep": {
            "eta": list(np.asarray(comp.case_rep[0], dtype=float)),
            "sigma": list(np.asarray(comp.case_rep[1], dtype=float)),
        },
        "boundary": comp.boundary,
        "candidate_shapes": [s.value for s in comp.candidate_shapes],
    }
    if system is not None:
        out["system"] = {
            "matrix": [[_jsonable(complex(v)) for v in row] for row in np.asarray(system.matrix)],
            "kernel_dim": len(system.kernel),
            "kernel": [[_jsonable(complex(v)) for v in vec] for vec in system.kernel],
        }
    return out


def witness_dict(witness, audit=None, agreement=None):
    out = {
        "support": [list(np.asarray(p, dtype=float)) for p in witness.support],
        "values": [_jsonable(complex(v)) for v in witness.values],
        "match_radius": float(witness.match_radius),
    }
    if audit is not None:
        out["audit"] = {
            "equation_count": int(audit.equations),
            "max_residual": float(audit.max_residual),
        }
    if agreement is not None:
        out["forward_agreement"] = {
            "pairs": int(agreement.pairs),
            "max_difference": float(agreement.max_difference),
            "passed": bool(agreement.passed),
        }
    return out
