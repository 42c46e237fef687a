"""Flat key=value run configuration with a strict schema.

Grammar: one `key = value` per line, `#` starts a comment, blank lines
ignored. Unknown keys are errors. Entry-perturbation modes use the dynamic
family `g.mode.<m> = <amplitude>` giving g = sum amplitude * cos(m x2).
"""

import re
from dataclasses import dataclass, field as dc_field

from .errors import ParseError, RangeError, UnknownKeyError

_G_MODE_RE = re.compile(r"^g\.mode\.(\d+)$")


def _positive(v):
    return v > 0


def _int_pos(v):
    return v > 0


_SCHEMA = {
    # key: (type, default, validator, description)
    "gas.gamma": (float, 1.4, lambda v: v > 1.0, "adiabatic exponent, > 1"),
    "gas.kappa": (float, 1.0, _positive, "pressure constant in p = kappa rho^gamma"),
    "gas.c0": (float, None, _positive,
               "energy constant; default derived from rho* = 1"),
    "nozzle.n0": (float, 1.0, _positive, "throat radius"),
    "nozzle.a_quad": (float, 0.1, _positive, "quadratic profile coefficient"),
    "solver.n1": (int, 257, lambda v: v >= 9 and v % 2 == 1,
                  "x1 nodes on [-1,1], odd"),
    "solver.n2": (int, 32, lambda v: v >= 8 and (v & (v - 1)) == 0,
                  "periodic x2 nodes, power of two"),
    "solver.mu": (float, 0.05, _positive, "multiplier rate in h = exp(-mu x1)"),
    "solver.l_ext": (float, 1.0, _positive, "extension length"),
    "solver.delta_floor": (float, 0.1, _positive,
                           "floor for the extended-exit k target"),
    "solver.eps_schedule": ("floatlist", (1e-2, 3e-3, 1e-3, 3e-4),
                            lambda v: len(v) > 0 and all(e > 0 for e in v)
                            and list(v) == sorted(v, reverse=True),
                            "decreasing positive viscosity schedule"),
    "solver.linear_tol": (float, 1e-10, _positive, "direct-solve residual gate"),
    "solver.cv": (float, 48.0, _positive,
                  "grid-scaled terminal viscosity factor (eps = cv dx^2)"),
    "iter.tol": (float, 1e-8, _positive, "Picard stop tolerance (H^3 step)"),
    "iter.max_iter": (int, 50, _int_pos, "Picard iteration cap"),
    "iter.relax": (float, 1.0, lambda v: 0.0 < v <= 1.0, "under-relaxation"),
    "iter.eps0": (float, 2e-2, _positive, "admissible ||g||_5 bound"),
    "iter.kappa0": (float, None, _positive,
                    "containment ball radius; default 10 * eps0"),
    "run.out_dir": (str, "out", lambda v: len(v) > 0, "output directory"),
    "run.workers": (int, 1, _int_pos, "sweep fan-out bound"),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict
    g_modes: dict
    defaulted: tuple

    def __getitem__(self, key):
        return self.values[key]

    def as_lines(self):
        """Emit in the same grammar; defaulted keys are annotated."""
        out = []
        for key in sorted(self.values):
            val = self.values[key]
            if key == "solver.eps_schedule":
                sval = ",".join(repr(float(e)) for e in val)
            elif isinstance(val, float):
                sval = repr(val)
            else:
                sval = str(val)
            note = "  # defaulted" if key in self.defaulted else ""
            out.append(f"{key} = {sval}{note}")
        for m in sorted(self.g_modes):
            out.append(f"g.mode.{m} = {self.g_modes[m]!r}")
        return out


def _convert(key, raw, typ, lineno):
    try:
        if typ is float:
            return float(raw)
        if typ is int:
            v = float(raw)
            if v != int(v):
                raise ValueError("not an integer")
            return int(v)
        if typ == "floatlist":
            return tuple(float(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError as exc:
        raise ParseError(lineno, f"cannot parse value for {key}: {raw!r} ({exc})")


def parse_config_text(text):
    """Parse config text into a RunConfig with defaults applied."""
    seen = {}
    g_modes = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(lineno, f"expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key or not raw:
            raise ParseError(lineno, "empty key or value")
        mode_match = _G_MODE_RE.match(key)
        if mode_match:
            m = int(mode_match.group(1))
            g_modes[m] = _convert(key, raw, float, lineno)
            continue
        if key not in _SCHEMA:
            raise UnknownKeyError(f"unknown config key {key!r} (line {lineno})")
        typ, _, validator, _ = _SCHEMA[key]
        val = _convert(key, raw, typ, lineno)
        if validator is not None and not validator(val):
            raise RangeError(f"value {val!r} out of range for {key} (line {lineno})")
        seen[key] = val

    values = {}
    defaulted = []
    for key, (typ, default, validator, _) in _SCHEMA.items():
        if key in seen:
            values[key] = seen[key]
        else:
            values[key] = default
            defaulted.append(key)

    # derived defaults
    if values["gas.c0"] is None:
        g, kp = values["gas.gamma"], values["gas.kappa"]
        values["gas.c0"] = kp * g * (g + 1.0) / (2.0 * (g - 1.0))
        # stays marked defaulted
    if values["iter.kappa0"] is None:
        values["iter.kappa0"] = 10.0 * values["iter.eps0"]

    # mode sanity against n2
    n2 = values["solver.n2"]
    for m in g_modes:
        if m > n2 // 2:
            raise RangeError(f"g.mode.{m} beyond Nyquist for n2 = {n2}")

    return RunConfig(values=values, g_modes=dict(sorted(g_modes.items())),
                     defaulted=tuple(sorted(defaulted)))


def parse_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_schema():
    """(key, type-name, default, description) rows for --help output."""
    rows = []
    for key, (typ, default, _, desc) in _SCHEMA.items():
        tname = typ if isinstance(typ, str) else typ.__name__
        rows.append((key, tname, default, desc))
    rows.append(("g.mode.<m>", "float", 0.0,
                 "cosine amplitude of entry-perturbation mode m"))
    return rows
