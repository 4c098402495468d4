"""Scenario files: sectioned ``key = value`` text parsed with :mod:`configparser`.

Grammar (``#`` or ``;`` start a comment line)::

    [plant]
    n = 2                      # optional, checked against len(a)
    a = 2, -1                  # comma or whitespace separated

    [reference]
    a_m = 1, 2
    Q = 1 0; 0 1               # rows separated by ';', default identity

    [l1]
    k = 4
    gamma = 10
    projection_radius = 5      # optional

    [init]                     # whole section optional
    x0 = 1, 0                  # default e_1
    u0 = 0
    xhat0 = 0, 0
    thetahat0 = 0, 0
    v0 = 0                     # default u0 + k * x0[n]

    [integrator]
    dt = 1e-3
    t_end = 20
    sample_every = 10          # default 1
    blowup_threshold = 1e6     # default 1e6
"""
import configparser
import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, L1EquivError
from .models import L1Config, PlantParams, ReferenceModel
from .simulator import InitialConditions, IntegratorConfig

__all__ = ["Scenario", "ScenarioError", "load_scenario", "parse_scenario"]


class ScenarioError(InvalidInputError):
    def __init__(self, message, path="<scenario>", line=None):
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


@dataclass(eq=False)
class Scenario:
    plant: PlantParams
    ref: ReferenceModel
    l1: L1Config
    init: InitialConditions
    integrator: IntegratorConfig


def _line_index(text):
    index, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), lineno)
            continue
        m = re.match(r"^([A-Za-z_][\w]*)\s*[=:]", line)
        if m and section is not None:
            index.setdefault((section, m.group(1).lower()), lineno)
    return index


def parse_scenario(text: str, path="<scenario>") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("content before the first [section] header", path, exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ScenarioError(f"cannot parse {line!r}", path, lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ScenarioError(exc.message.split(":")[-1].strip(), path, exc.lineno) from None
    lines = _line_index(text)

    def fail(msg, section, key=None):
        raise ScenarioError(msg, path, lines.get((section, key), lines.get((section, None))))

    def raw(section, key, required=True):
        if not cp.has_section(section):
            if required:
                fail(f"missing section [{section}]", section)
            return None
        if not cp.has_option(section, key):
            if required:
                fail(f"missing key '{key}' in [{section}]", section)
            return None
        return cp.get(section, key).strip()

    def number(section, key, required=True, default=None):
        s = raw(section, key, required)
        if s is None:
            return default
        try:
            return float(s)
        except ValueError:
            fail(f"[{section}] {key}: expected a number, got {s!r}", section, key)

    def vector(section, key, required=True):
        s = raw(section, key, required)
        if s is None:
            return None
        try:
            v = np.array([float(tok) for tok in re.split(r"[,\s]+", s) if tok])
        except ValueError:
            fail(f"[{section}] {key}: expected numbers, got {s!r}", section, key)
        if v.size == 0:
            fail(f"[{section}] {key}: empty vector", section, key)
        return v

    def matrix(section, key):
        s = raw(section, key, required=False)
        if s is None:
            return None
        try:
            rows = [[float(tok) for tok in re.split(r"[,\s]+", r.strip()) if tok] for r in s.split(";")]
        except ValueError:
            fail(f"[{section}] {key}: expected numbers, got {s!r}", section, key)
        if len({len(r) for r in rows}) != 1:
            fail(f"[{section}] {key}: ragged matrix rows", section, key)
        return np.array(rows)

    def build(factory, section, key):
        try:
            return factory()
        except ScenarioError:
            raise
        except L1EquivError as exc:
            fail(str(exc), section, key)

    a = vector("plant", "a")
    n_decl = number("plant", "n", required=False)
    if n_decl is not None and n_decl != a.size:
        fail(f"[plant] n = {n_decl:g} but a has {a.size} entries", "plant", "n")
    plant = build(lambda: PlantParams(a), "plant", "a")
    a_m = vector("reference", "a_m")
    if a_m.size != plant.n:
        fail(f"[reference] a_m has {a_m.size} entries, plant order is {plant.n}", "reference", "a_m")
    Q = matrix("reference", "q")
    ref = build(lambda: ReferenceModel(a_m), "reference", "a_m")
    if Q is not None:
        ref = build(lambda: ReferenceModel(a_m, Q), "reference", "q")
    k = number("l1", "k")
    gamma = number("l1", "gamma")
    radius = number("l1", "projection_radius", required=False)
    l1 = build(lambda: L1Config(k, gamma, radius), "l1", "k")

    init = InitialConditions(
        x0=vector("init", "x0", False),
        u0=number("init", "u0", False, 0.0),
        xhat0=vector("init", "xhat0", False),
        thetahat0=vector("init", "thetahat0", False),
        v0=number("init", "v0", False),
    )
    build(lambda: init.resolve(plant.n, k), "init", None)

    integ = build(
        lambda: IntegratorConfig(
            dt=number("integrator", "dt"),
            t_end=number("integrator", "t_end"),
            sample_every=int(number("integrator", "sample_every", False, 1)),
            blowup_threshold=number("integrator", "blowup_threshold", False, 1e6),
        ),
        "integrator",
        None,
    )
    return Scenario(plant, ref, l1, init, integ)


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", path) from None
    return parse_scenario(text, path)
