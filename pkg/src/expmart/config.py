"""Run configuration: defaults, INI files, presets, and the spec mini-grammars.

Element templates: terms joined by " + ", each term "c0,c1,...@exponent"
(coefficients low degree first, complex literals as Python: 1, -0.5, 1j,
1+1j).  Examples: "1@0" is the constant 1, "0,1@0" is X, "1@1" is the
exponential martingale with exponent 1, "1,0,2@0.5j" is (1 + 2 X^2) E(0.5j).

Centerings: "zero", "const:<v>", or "pw:<t>:<v>,<t>:<v>,...".
Time changes: "identity", "power:<alpha>", or "pw:<t>:<v>,...".
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .processes import TimeChange
from .verify import CenteringFunction

__all__ = [
    "RunConfig",
    "PRESETS",
    "SUITES",
    "ConfigError",
    "load_ini",
    "apply_preset",
    "parse_complex",
    "parse_complex_list",
    "parse_element_template",
    "parse_centering",
    "parse_time_change",
    "parse_h1_case",
    "parse_h2_case",
    "parse_isometry_case",
]

SUITES = ("check-algebra", "lemma2", "isometry", "h1", "h2", "pde", "l2limit")


class ConfigError(ValueError):
    """Bad configuration file, preset name, or spec string."""


@dataclass(frozen=True)
class RunConfig:
    """All knobs of a verification run; every suite reads only what it needs."""

    seed: int = 20260815
    workers: int = 1
    out_dir: str = "reports"
    horizon: float = 1.0
    grid_steps: int = 256
    paths: int = 20000
    time_change: str = "identity"
    # suites to run when the command line names none; empty means "show usage"
    suites: tuple[str, ...] = ()
    # check-algebra
    algebra_n_random: int = 1000
    # lemma2 (two-point exponential formula)
    lemma2_paths: int = 1_000_000
    lemma2_exponents: tuple[str, ...] = ("1", "-1", "1j")
    # isometry
    isometry_cases: tuple[str, ...] = ("one", "x")
    # h1
    h1_cases: tuple[str, ...] = (
        "one-equality",
        "coordinate",
        "exp-energy",
        "exp-equality",
    )
    h1_n_random: int = 500
    h1_tol: float = 1e-9
    # h2
    h2_cases: tuple[str, ...] = ("brownian-equality", "brownian-strict")
    h2_k_sigma: float = 4.0
    h2_disc_factor: float = 10.0
    # pde
    pde_exponents: tuple[str, ...] = ("0", "1", "1j", "1+1j")
    pde_step: float = 1e-4
    # l2limit
    l2_exponents: tuple[str, ...] = ("0", "1", "1j")
    l2_k_max: int = 13

    def validated(self) -> "RunConfig":
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.grid_steps < 1 or self.paths < 2 or self.lemma2_paths < 2:
            raise ConfigError("grid_steps must be >= 1 and path counts >= 2")
        if self.horizon <= 0:
            raise ConfigError("horizon must be > 0")
        if self.l2_k_max < 2:
            raise ConfigError("l2_k_max must be >= 2")
        if self.pde_step <= 0:
            raise ConfigError("pde_step must be > 0")
        if self.h1_tol <= 0:
            raise ConfigError("h1_tol must be > 0")
        for s in self.suites:
            if s not in SUITES and s != "all":
                raise ConfigError(
                    f"unknown suite {s!r}; expected one of {', '.join(SUITES)} or all"
                )
        parse_time_change(self.time_change)
        for s in self.lemma2_exponents + self.pde_exponents + self.l2_exponents:
            parse_complex(s)
        for name in self.h2_cases:
            parse_h2_case(name)
        for name in self.isometry_cases:
            parse_isometry_case(name)
        for name in self.h1_cases:
            parse_h1_case(name)
        return self


# named parameterizations; acceptance-scale sizes where a criterion pins them
PRESETS: dict[str, dict] = {
    "default": {},
    "acceptance": dict(paths=100_000, grid_steps=512, lemma2_paths=1_000_000),
    "commutators": dict(algebra_n_random=1000),
    "lemma2-grid": dict(lemma2_paths=1_000_000),
    "brownian-equality": dict(
        paths=100_000, grid_steps=512, h2_cases=("brownian-equality",)
    ),
    "brownian-strict": dict(
        paths=100_000, grid_steps=512, h2_cases=("brownian-strict",)
    ),
    "isometry-basic": dict(paths=100_000, grid_steps=512),
    "h1-random": dict(h1_n_random=500),
    "pde-box": {},
    "l2limit-dyadic": {},
}


def apply_preset(cfg: RunConfig, name: str) -> RunConfig:
    try:
        overrides = PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
    return dataclasses.replace(cfg, **overrides)


# ---------------------------------------------------------------------------
# spec-string parsers

def parse_complex(s: str) -> complex:
    try:
        return complex(s.strip().replace(" ", ""))
    except ValueError:
        raise ConfigError(f"bad complex literal {s!r}") from None


def parse_complex_list(s: str) -> tuple[str, ...]:
    return tuple(tok for tok in s.replace(",", " ").split() if tok)


def parse_element_template(s: str) -> tuple[tuple[complex, tuple[complex, ...]], ...]:
    terms = []
    for chunk in s.split("+++") if "+++" in s else s.split(" + "):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "@" not in chunk:
            raise ConfigError(f"element term {chunk!r} needs 'coeffs@exponent'")
        coeff_part, _, exp_part = chunk.rpartition("@")
        coeffs = tuple(parse_complex(tok) for tok in coeff_part.split(","))
        terms.append((parse_complex(exp_part), coeffs))
    if not terms:
        raise ConfigError(f"empty element template {s!r}")
    return tuple(terms)


def _parse_knots(body: str) -> tuple[tuple[float, float], ...]:
    toks = body.split(",")
    knots = []
    for tok in toks:
        t, _, v = tok.partition(":")
        try:
            knots.append((float(t), float(v)))
        except ValueError:
            raise ConfigError(f"bad knot {tok!r}; expected t:v") from None
    return tuple(knots)


def parse_centering(s: str) -> CenteringFunction:
    s = s.strip()
    if s == "zero":
        return CenteringFunction.zero()
    if s.startswith("const:"):
        try:
            return CenteringFunction.constant(float(s[6:]))
        except ValueError:
            raise ConfigError(f"bad centering {s!r}") from None
    if s.startswith("pw:"):
        return CenteringFunction.piecewise_linear(_parse_knots(s[3:]))
    raise ConfigError(f"unknown centering {s!r}")


def parse_time_change(s: str) -> TimeChange:
    s = s.strip()
    if s == "identity":
        return TimeChange.identity()
    if s.startswith("power:"):
        try:
            return TimeChange.power(float(s[6:]))
        except ValueError:
            raise ConfigError(f"bad time change {s!r}") from None
    if s.startswith("pw:"):
        return TimeChange.piecewise_linear(_parse_knots(s[3:]))
    raise ConfigError(f"unknown time change {s!r}")


def parse_h2_case(s: str) -> dict:
    """An h2 case: a named one or 'template:<element>[;g=<cen>][;gt=<cen>]'."""
    s = s.strip()
    if s == "brownian-equality":
        return dict(
            name=s,
            template=parse_element_template("1@0"),
            g=CenteringFunction.zero(),
            g_tilde=CenteringFunction.zero(),
            target_lhs=0.5,
        )
    if s == "brownian-strict":
        return dict(
            name=s,
            template=parse_element_template("0,1@0"),
            g=CenteringFunction.zero(),
            g_tilde=CenteringFunction.zero(),
            target_lhs=1.0,
        )
    if s.startswith("template:"):
        body = s[len("template:") :]
        parts = body.split(";")
        g = CenteringFunction.zero()
        g_tilde = CenteringFunction.zero()
        for extra in parts[1:]:
            key, _, val = extra.partition("=")
            if key == "g":
                g = parse_centering(val)
            elif key == "gt":
                g_tilde = parse_centering(val)
            else:
                raise ConfigError(f"unknown h2 case option {extra!r}")
        return dict(
            name=f"template[{parts[0]}]",
            template=parse_element_template(parts[0]),
            g=g,
            g_tilde=g_tilde,
            target_lhs=None,
        )
    raise ConfigError(f"unknown h2 case {s!r}")


def parse_h1_case(s: str) -> dict:
    """A fixed-time inequality case: named, or 'template:<el>;c=..;ct=..;q=..'.

    Named cases (all at q = 1): 'one-equality' (Y = 1, c = ct = 0, an equality
    case), 'coordinate' (Y = X, c = ct = 0), 'exp-energy' (Y = E(1),
    c = ct = 0, right side e), 'exp-equality' (Y = E(0.5), c = 2*0.5*q = 1,
    ct = 0, an equality case).
    """
    s = s.strip()
    named = {
        "one-equality": ("1@0", 0.0, 0.0, 1.0),
        "coordinate": ("0,1@0", 0.0, 0.0, 1.0),
        "exp-energy": ("1@1", 0.0, 0.0, 1.0),
        "exp-equality": ("1@0.5", 1.0, 0.0, 1.0),
    }
    if s in named:
        tpl, c, ct, q = named[s]
        return dict(name=s, template=parse_element_template(tpl), c=c, ct=ct, q=q)
    if s.startswith("template:"):
        body = s[len("template:") :]
        parts = body.split(";")
        c = ct = 0.0
        q = 1.0
        for extra in parts[1:]:
            key, _, val = extra.partition("=")
            try:
                if key == "c":
                    c = float(val)
                elif key == "ct":
                    ct = float(val)
                elif key == "q":
                    q = float(val)
                else:
                    raise ConfigError(f"unknown h1 case option {extra!r}")
            except ValueError:
                raise ConfigError(f"bad h1 case option {extra!r}") from None
        if q < 0:
            raise ConfigError("h1 case variance must be >= 0")
        return dict(
            name=f"template[{parts[0]};c={c:g};ct={ct:g};q={q:g}]",
            template=parse_element_template(parts[0]),
            c=c,
            ct=ct,
            q=q,
        )
    raise ConfigError(f"unknown h1 case {s!r}")


def parse_isometry_case(s: str) -> tuple[str, tuple]:
    s = s.strip()
    if s == "one":
        return "one", parse_element_template("1@0")
    if s == "x":
        return "x", parse_element_template("0,1@0")
    if s.startswith("template:"):
        return s, parse_element_template(s[len("template:") :])
    raise ConfigError(f"unknown isometry case {s!r}")


# ---------------------------------------------------------------------------
# INI loading

def _parse_names(s: str) -> tuple[str, ...]:
    return tuple(t for t in s.split() if t)


_RUN_KEYS = {
    "seed": int,
    "workers": int,
    "out_dir": str,
    "horizon": float,
    "grid_steps": int,
    "paths": int,
    "time_change": str,
    "suites": _parse_names,
}

_SECTION_KEYS = {
    "algebra": {"n_random": ("algebra_n_random", int)},
    "lemma2": {
        "paths": ("lemma2_paths", int),
        "exponents": ("lemma2_exponents", parse_complex_list),
    },
    "isometry": {"cases": ("isometry_cases", _parse_names)},
    "h1": {
        "cases": ("h1_cases", _parse_names),
        "n_random": ("h1_n_random", int),
        "tol": ("h1_tol", float),
    },
    "h2": {
        "cases": ("h2_cases", _parse_names),
        "k_sigma": ("h2_k_sigma", float),
        "disc_factor": ("h2_disc_factor", float),
    },
    "pde": {
        "exponents": ("pde_exponents", parse_complex_list),
        "step": ("pde_step", float),
    },
    "l2limit": {
        "exponents": ("l2_exponents", parse_complex_list),
        "k_max": ("l2_k_max", int),
    },
}


def load_ini(path: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    updates: dict = {}
    for section in parser.sections():
        if section == "run":
            for key, value in parser.items("run"):
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown [run] key {key!r}")
                try:
                    updates[key] = _RUN_KEYS[key](value)
                except ValueError:
                    raise ConfigError(f"bad value for [run] {key}: {value!r}") from None
        elif section in _SECTION_KEYS:
            table = _SECTION_KEYS[section]
            for key, value in parser.items(section):
                if key not in table:
                    raise ConfigError(f"unknown [{section}] key {key!r}")
                field, conv = table[key]
                try:
                    updates[field] = conv(value)
                except ConfigError:
                    raise
                except ValueError:
                    raise ConfigError(
                        f"bad value for [{section}] {key}: {value!r}"
                    ) from None
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return dataclasses.replace(cfg, **updates).validated()
