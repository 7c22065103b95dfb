"""Run configuration: TOML parsing, validation and seeded stream derivation.

The file schema mirrors the model objects: ``dimension``, ``types`` (lists
of 0/1 bits), a parallel ``q`` list, a ``[region]`` table with ``origin``
and ``sides``, a ``[boundary]`` table selecting ``closed``,
``all_facilitating`` (optional ``sites``) or ``frozen`` (a ``frame`` list of
site/state pairs), an optional ``seed`` and an optional ``[initial]`` state.
Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:       # Python 3.10
    import tomli as tomllib

from .lattice import (
    NEUTRAL,
    AllFacilitating,
    Closed,
    Configuration,
    Frozen,
    Region,
    SpecError,
    check_boundary,
    sample_config,
    validate_params,
)

_TOP_KEYS = {"dimension", "types", "q", "region", "boundary", "seed", "initial"}
_REGION_KEYS = {"origin", "sides"}
_BOUNDARY_KEYS = {"kind", "sites", "frame"}
_INITIAL_KEYS = {"states", "fill", "set", "sample"}


@dataclass
class RunConfig:
    spec: object
    region: Region
    boundary: object
    seed: int
    initial: Configuration | None = None
    sample_initial: bool = False

    def initial_configuration(self, rng=None):
        if self.initial is not None:
            return self.initial.copy()
        if rng is None:
            rng = stream(self.seed, 0)
        return sample_config(self.spec, self.region, self.boundary, rng)


def stream(seed, index):
    """Independent generator number ``index`` of a counter-based family."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def _reject_unknown(table, allowed, where):
    extra = set(table) - allowed
    if extra:
        raise SpecError(f"unknown keys in {where}: {sorted(extra)}")


def parse_state(spec, label):
    if isinstance(label, str):
        return spec.code_of_label(label)
    return spec.code(tuple(label))


def load_config(path=None, text=None):
    if (path is None) == (text is None):
        raise SpecError("pass exactly one of path or text")
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        data = tomllib.loads(text)
    return build_config(data)


def build_config(data):
    _reject_unknown(data, _TOP_KEYS, "config")
    for key in ("dimension", "types", "q", "region", "boundary"):
        if key not in data:
            raise SpecError(f"config is missing required key {key!r}")
    spec = validate_params(int(data["dimension"]), data["types"], data["q"])

    rtab = data["region"]
    _reject_unknown(rtab, _REGION_KEYS, "[region]")
    region = Region.box(tuple(rtab["origin"]), tuple(rtab["sides"]))

    btab = data["boundary"]
    _reject_unknown(btab, _BOUNDARY_KEYS, "[boundary]")
    kind = btab.get("kind", "closed")
    if kind == "closed":
        boundary = Closed()
    elif kind == "all_facilitating":
        sites = btab.get("sites")
        boundary = AllFacilitating(
            None if sites is None else frozenset(tuple(s) for s in sites)
        )
    elif kind == "frozen":
        frame = {}
        for entry in btab.get("frame", []):
            frame[tuple(entry["site"])] = parse_state(spec, entry["state"])
        boundary = Frozen(frame)
    else:
        raise SpecError(f"unknown boundary kind {kind!r}")
    check_boundary(spec, region, boundary)

    seed = int(data.get("seed", 0))
    initial = None
    sample_initial = False
    if "initial" in data:
        itab = data["initial"]
        _reject_unknown(itab, _INITIAL_KEYS, "[initial]")
        if itab.get("sample", False):
            sample_initial = True
        else:
            states = np.full(region.size, NEUTRAL, dtype=np.uint8)
            if "states" in itab:
                labels = itab["states"]
                if len(labels) != region.size:
                    raise SpecError("initial.states must list every site")
                for i, lab in enumerate(labels):
                    states[i] = parse_state(spec, lab)
            else:
                fill = itab.get("fill", "*")
                states[:] = parse_state(spec, fill)
                for entry in itab.get("set", []):
                    states[region.index(tuple(entry["site"]))] = parse_state(
                        spec, entry["state"]
                    )
            initial = Configuration(region, states, boundary)
    return RunConfig(spec, region, boundary, seed, initial, sample_initial)
