"""Structure files: JSON in, canonical JSON out."""

import json
import logging
import os

import numpy as np

from libs.errors import StructureFormatError
from libs.kripke import ValidationReport, validate_s5


def write_json(obj, path=None):
    """Serialize with stable key order; write to path when given, return the text."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        with open(path, "w", newline="\n") as f:
            f.write(text)
    return text


def read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise StructureFormatError(f"Cannot read {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise StructureFormatError(f"{path}: {e}") from e


def structure_from_dict(data, strict=False):
    """
    Build a validated S5Structure from the JSON layout.

    Returns:
        tuple: (S5Structure | ValidationReport, covering block or None)
    """
    try:
        agents = list(data["agents"])
        n_worlds = int(data["worlds"])
        edges = {a: [tuple(p) for p in data.get("edges", {}).get(a, [])] for a in agents}
        props = data.get("props", {})
    except (KeyError, TypeError, ValueError) as e:
        raise StructureFormatError(f"Malformed structure: {e}") from e
    unknown = set(data.get("edges", {})) - set(agents)
    if unknown:
        raise StructureFormatError(f"Edges for undeclared agents: {sorted(unknown)}")
    prop_names = sorted(props, key=_prop_sort_key)
    result = validate_s5(edges, n_worlds, props, agents=agents, prop_names=prop_names, strict=strict)
    return result, data.get("covering")


def load_structure(path, strict=False):
    """
    Load and validate a structure file.

    Raises:
        ValidationError: When the relations are not equivalence relations.
    """
    data = read_json(path)
    result, _ = structure_from_dict(data, strict=strict)
    if isinstance(result, ValidationReport):
        raise result.to_error()
    logging.info(f"Loaded {os.path.basename(path)}: {result.n_worlds} worlds, agents {list(result.agents)}")
    return result


def _prop_sort_key(name):
    if name.startswith("p") and name[1:].isdigit():
        return (0, int(name[1:]), name)
    return (1, 0, name)


def structure_to_dict(m):
    """Canonical JSON form: all block pairs i<j sorted, loops only if the source had them."""
    edges = {}
    for a, name in enumerate(m.agents):
        labels = m.partitions[a]
        pairs = []
        for block in range(int(labels.max()) + 1 if m.n_worlds else 0):
            members = [int(w) for w in np.flatnonzero(labels == block)]
            for i, w in enumerate(members):
                if m.loops:
                    pairs.append([w, w])
                for v in members[i + 1:]:
                    pairs.append([w, v])
        edges[name] = sorted(pairs)
    props = {name: [int(w) for w in np.flatnonzero(m.valuation[i])] for i, name in enumerate(m.prop_names)}
    return {"agents": list(m.agents), "worlds": m.n_worlds, "edges": edges, "props": props}


def dump_structure(m, path=None, covering=None):
    data = structure_to_dict(m)
    if covering is not None:
        data["covering"] = covering
    return write_json(data, path)


def ensure_structure(result):
    """Unwrap a validation result, raising its error when invalid."""
    if isinstance(result, ValidationReport):
        raise result.to_error()
    return result


__all__ = [
    'write_json', 'read_json', 'structure_from_dict', 'load_structure',
    'structure_to_dict', 'dump_structure', 'ensure_structure',
]
