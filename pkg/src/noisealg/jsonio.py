"""JSON scenario format.

::

    {"probs": [...], "outcomes": [...],
     "fields": {"name": [[block], ...]}, "rvs": {"name": [values]},
     "algebra": {"atoms": ["name", ...], "elements": ["name", ...]?},
     "chain": [["name", ...], ...], "meta": {...}}

Blocks are 0-based outcome indices and need not be canonical on input.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .noisebool import NoiseBooleanAlgebra, from_fields, from_independency
from .probspace import FiniteProbabilitySpace, RandomVariable, SigmaField, make_space
from .scenarios import Scenario


class ScenarioLoadError(ValueError):
    """The scenario document is malformed or references unknown names."""


def _to_json_label(x):
    if isinstance(x, tuple):
        return [_to_json_label(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _from_json_label(x):
    if isinstance(x, list):
        return tuple(_from_json_label(v) for v in x)
    return x


def scenario_to_dict(scn: Scenario) -> dict:
    fields = dict(scn.named_fields)
    names_of = {}
    for name, x in fields.items():
        names_of.setdefault(x, name)
    atom_names = []
    for i, a in enumerate(scn.algebra.atoms):
        if a not in names_of:
            name = f"a{i}"
            while name in fields:
                name += "_"
            fields[name] = a
            names_of[a] = name
        atom_names.append(names_of[a])
    chain = []
    for b in scn.chain:
        level = []
        for a in b.atoms:
            if a not in names_of:
                raise ValueError("every chain atom needs a name")
            level.append(names_of[a])
        chain.append(level)
    out = {
        "probs": scn.space.probs.tolist(),
        "outcomes": [_to_json_label(o) for o in scn.space.outcomes],
        "fields": {name: [list(b) for b in x.blocks] for name, x in fields.items()},
        "rvs": {name: f.values.tolist() for name, f in scn.named_rvs.items()},
        "algebra": {"atoms": atom_names},
        "meta": scn.meta,
    }
    if chain:
        out["chain"] = chain
    return out


def _lookup(fields: dict, name: str) -> SigmaField:
    try:
        return fields[name]
    except KeyError:
        raise ScenarioLoadError(f"unknown field {name!r}") from None


def scenario_from_dict(doc: dict, strict: bool = True, tol: float | None = None) -> Scenario:
    """Rebuild a scenario. With ``strict`` the algebra axioms are enforced;
    otherwise the atoms are taken as given (for later verification)."""
    try:
        kwargs = {} if tol is None else {"tol": tol}
        space = make_space(doc["probs"], **kwargs)
        outcomes = doc.get("outcomes")
        if outcomes is not None:
            space = FiniteProbabilitySpace(space.probs, tuple(_from_json_label(o) for o in outcomes),
                                           space.tol)
        fields = {name: SigmaField.from_blocks(space, blocks)
                  for name, blocks in doc.get("fields", {}).items()}
        rvs = {name: RandomVariable(np.asarray(v, dtype=float), space)
               for name, v in doc.get("rvs", {}).items()}
        alg = doc["algebra"]
        atoms = [_lookup(fields, n) for n in alg["atoms"]]
        elements = [_lookup(fields, n) for n in alg.get("elements", [])]
        chain_atoms = [[_lookup(fields, n) for n in level] for level in doc.get("chain", [])]
        meta = dict(doc.get("meta", {}))
    except ScenarioLoadError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioLoadError(f"malformed scenario: {exc}") from exc
    if strict:
        B = from_fields(space, elements) if elements else from_independency(atoms, cap=max(12, len(atoms)))
        chain = tuple(from_independency(lv, cap=max(12, len(lv))) for lv in chain_atoms)
    else:
        B = NoiseBooleanAlgebra(space, atoms)
        chain = tuple(NoiseBooleanAlgebra(space, lv) for lv in chain_atoms)
    return Scenario(space, B, chain, rvs, fields, meta)


def dumps(scn: Scenario) -> str:
    return json.dumps(scenario_to_dict(scn), sort_keys=True)


def loads(text: str, strict: bool = True, tol: float | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioLoadError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioLoadError("scenario must be a JSON object")
    return scenario_from_dict(doc, strict, tol)


def save(scn: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(scn) + "\n")


def load(path: str | Path, strict: bool = True, tol: float | None = None) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioLoadError(f"cannot read {path}: {exc}") from exc
    return loads(text, strict, tol)
