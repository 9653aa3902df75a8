"""TOML scenario files.

A scenario bundles an observable, named measurement families, their
contextual-value specifications, a state, a postselection vector, a ``g``
grid and an optional list of expected results. See ``README.md`` for the
full schema and :mod:`cvlab.scenarios` for the bundled examples.
"""

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .contextual import CvFamily, parse_pin_spec
from .exceptions import CvlabError, ScenarioError
from .expr import parse
from .measurement import MeasurementFamily, povm
from .validation import check_density, check_hermitian

__all__ = ["Scenario", "bundled_scenarios", "load_scenario", "parse_matrix", "resolve_state", "resolve_vector"]

STATE_ALIASES = {"+": "plus", "++": "plus", "+i": "plus_i", "-": "minus", "0": "e1", "1": "e2"}


def _scalar(x, where):
    if isinstance(x, bool):
        raise ScenarioError(f"{where}: booleans are not numbers")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, str):
        try:
            e = parse(x)
        except CvlabError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        if not e.is_constant:
            raise ScenarioError(f"{where}: {x!r} depends on g")
        return complex(e.eval(0.0))
    raise ScenarioError(f"{where}: cannot read {x!r} as a number")


def parse_matrix(rows, dim=None, where="matrix"):
    """Matrix from nested lists of numbers or complex literal strings like ``"1-2i"``."""
    if isinstance(rows, str):
        rows = [r.split(",") for r in rows.split(";")]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ScenarioError(f"{where}: expected a list of rows")
    m = np.array([[_scalar(x.strip() if isinstance(x, str) else x, where) for x in r] for r in rows], dtype=complex)
    if m.ndim != 2 or (dim is not None and m.shape != (dim, dim)):
        raise ScenarioError(f"{where}: expected a {dim}x{dim} matrix, got shape {m.shape}")
    return m


def _named_vector(name, dim):
    key = STATE_ALIASES.get(name, name)
    s = 1 / math.sqrt(2)
    if key == "plus" and dim == 2:
        return np.array([s, s], dtype=complex)
    if key == "minus" and dim == 2:
        return np.array([s, -s], dtype=complex)
    if key == "plus_i" and dim == 2:
        return np.array([s, 1j * s], dtype=complex)
    if key == "plus":
        return np.ones(dim, dtype=complex) / math.sqrt(dim)
    m = re.fullmatch(r"e(\d+)", key)
    if m and 1 <= int(m.group(1)) <= dim:
        v = np.zeros(dim, dtype=complex)
        v[int(m.group(1)) - 1] = 1.0
        return v
    return None


def resolve_vector(spec, dim, where="vector"):
    """Unit vector from a shorthand name, a list of entries, or ``"a,b"`` text."""
    if isinstance(spec, str):
        v = _named_vector(spec.strip(), dim)
        if v is not None:
            return v
        spec = spec.split(",")
    if not isinstance(spec, list):
        raise ScenarioError(f"{where}: cannot read {spec!r} as a vector")
    v = np.array([_scalar(x.strip() if isinstance(x, str) else x, where) for x in spec], dtype=complex)
    if v.shape != (dim,):
        raise ScenarioError(f"{where}: expected {dim} entries, got {v.size}")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ScenarioError(f"{where}: zero vector")
    return v / nrm


def resolve_state(spec, dim, where="state"):
    """Density matrix from a shorthand name, a vector, or a matrix (rows)."""
    if isinstance(spec, str) and spec.strip() == "mixed":
        return np.eye(dim, dtype=complex) / dim
    if isinstance(spec, str) and ";" in spec:
        spec = parse_matrix(spec, dim, where)
    if isinstance(spec, list) and spec and all(isinstance(r, list) for r in spec):
        spec = parse_matrix(spec, dim, where)
    if isinstance(spec, np.ndarray) and spec.ndim == 2:
        try:
            return check_density(spec, dim)
        except CvlabError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    v = resolve_vector(spec, dim, where)
    return np.outer(v, v.conj())


def parse_grid(spec):
    """Grid from ``{g0, ratio, count}``, ``{values}``, or ``"g0:ratio:n"`` text."""
    if isinstance(spec, str):
        try:
            g0, ratio, n = spec.split(":")
            spec = {"g0": float(g0), "ratio": float(ratio), "count": int(n)}
        except ValueError as exc:
            raise ScenarioError(f"grid {spec!r}: expected g0:ratio:n") from exc
    if "values" in spec:
        vals = [float(g) for g in spec["values"]]
    else:
        try:
            g0, ratio, n = float(spec["g0"]), float(spec.get("ratio", 0.5)), int(spec["count"])
        except KeyError as exc:
            raise ScenarioError(f"grid: missing key {exc}") from exc
        vals = [g0 * ratio**k for k in range(n)]
    if not vals or not all(math.isfinite(g) for g in vals):
        raise ScenarioError("grid: need at least one finite g")
    return vals


@dataclass
class Scenario:
    name: str
    dim: int
    observable: np.ndarray
    families: dict
    cv_specs: dict
    default_family: str
    state: np.ndarray = None
    postselect: np.ndarray = None
    grid: list = field(default_factory=lambda: [0.1 * 0.5**k for k in range(14)])
    tolerances: dict = field(default_factory=dict)
    expectations: list = field(default_factory=list)
    counterexample: dict = field(default_factory=dict)
    path: str = ""

    def family(self, name=None):
        name = name or self.default_family
        if name not in self.families:
            raise ScenarioError(f"unknown family {name!r}; have {sorted(self.families)}")
        return self.families[name]

    def cv_family(self, name=None):
        name = name or self.default_family
        fam = self.family(name)
        kind, payload = self.cv_specs.get(name, ("min-norm", None))
        if kind == "exprs":
            return CvFamily(fam, self.observable, alpha_exprs=payload)
        if kind == "pinned":
            return CvFamily(fam, self.observable, pins=payload)
        return CvFamily(fam, self.observable)

    def tol(self, key, default):
        return float(self.tolerances.get(key, default))


def _parse_cv(spec, n, where):
    if isinstance(spec, list):
        if len(spec) != n:
            raise ScenarioError(f"{where}: {len(spec)} contextual values for {n} outcomes")
        try:
            return "exprs", tuple(parse(str(x)) for x in spec)
        except CvlabError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    if isinstance(spec, str) and spec.strip() == "min-norm":
        return "min-norm", None
    if isinstance(spec, str) and spec.strip().startswith("pinned"):
        try:
            pins = parse_pin_spec(spec)
        except CvlabError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        for idx, _ in pins:
            if idx >= n:
                raise ScenarioError(f"{where}: pinned index {idx + 1} out of range for {n} outcomes")
        return "pinned", pins
    raise ScenarioError(f"{where}: expected 'min-norm', 'pinned: [...]' or a list of expressions")


def _parse_family(name, spec, dim):
    where = f"families.{name}"
    if "outcomes" not in spec:
        raise ScenarioError(f"{where}: missing key 'outcomes'")
    outcomes = []
    for j, ops in enumerate(spec["outcomes"]):
        if not isinstance(ops, list) or not ops:
            raise ScenarioError(f"{where}.outcomes[{j}]: expected a list of operator tables")
        # a bare table (list of rows of scalars) is a single operator
        if all(isinstance(r, list) and r and not isinstance(r[0], list) for r in ops):
            ops = [ops]
        outcomes.append(ops)
    try:
        fam = MeasurementFamily(outcomes, label=spec.get("label", name), g_range=spec.get("g_range"))
    except CvlabError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    if fam.dim != dim:
        raise ScenarioError(f"{where}: operators are {fam.dim}x{fam.dim}, scenario dim is {dim}")
    return fam


def _locate(path):
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = p.name if p.suffix else f"{p.name}.toml"
    res = resources.files("cvlab.scenarios") / name
    if res.is_file():
        return res.read_text(), f"<bundled>/{name}"
    raise ScenarioError(f"scenario {path!r} not found (bundled: {', '.join(bundled_scenarios())})")


def bundled_scenarios():
    return sorted(r.name for r in resources.files("cvlab.scenarios").iterdir() if r.name.endswith(".toml"))


def load_scenario(path):
    """Load and validate a scenario.

    ``path`` may name a file or a bundled scenario (``"pryde.toml"``). Every
    expression is parsed up front and each family's completeness is checked
    at both ends of the grid.

    Raises
    ------
    ScenarioError
        With the file and line for TOML syntax errors, the offending key for
        validation errors, and the defect norm for incomplete families.
    """
    text, where = _locate(path)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    return _build(data, where)


def _build(data, where):
    def need(key):
        if key not in data:
            raise ScenarioError(f"{where}: missing key {key!r}")
        return data[key]

    dim = need("dim")
    if not isinstance(dim, int) or dim < 1:
        raise ScenarioError(f"{where}: 'dim' must be a positive integer")
    observable = parse_matrix(need("observable"), dim, "observable")
    try:
        observable = check_hermitian(observable, "observable")
    except CvlabError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    fam_specs = need("families")
    if not isinstance(fam_specs, dict) or not fam_specs:
        raise ScenarioError(f"{where}: 'families' must be a non-empty table")
    families = {name: _parse_family(name, spec, dim) for name, spec in fam_specs.items()}
    cv_specs = {}
    for name, spec in data.get("cv", {}).items():
        if name not in families:
            raise ScenarioError(f"{where}: cv.{name} refers to an unknown family")
        cv_specs[name] = _parse_cv(spec, families[name].n_outcomes, f"cv.{name}")
    default = data.get("family", next(iter(families)))
    if default not in families:
        raise ScenarioError(f"{where}: 'family' = {default!r} is not defined")
    grid = parse_grid(data["grid"]) if "grid" in data else [0.1 * 0.5**k for k in range(14)]
    sc = Scenario(
        name=data.get("name", Path(where).stem),
        dim=dim,
        observable=observable,
        families=families,
        cv_specs=cv_specs,
        default_family=default,
        state=resolve_state(data["state"], dim) if "state" in data else None,
        postselect=resolve_vector(data["postselect"], dim, "postselect") if "postselect" in data else None,
        grid=grid,
        tolerances=dict(data.get("tolerances", {})),
        expectations=list(data.get("expect", [])),
        counterexample=dict(data.get("counterexample", {})),
        path=where,
    )
    for k, exp in enumerate(sc.expectations):
        for key in ("command", "quantity", "value"):
            if key not in exp:
                raise ScenarioError(f"{where}: expect[{k}] is missing {key!r}")
    for name, fam in families.items():
        for g in {max(grid), min(grid)}:
            try:
                povm(fam, g)
            except CvlabError as exc:
                raise ScenarioError(f"{where}: family {name!r} at g={g!r}: {exc}") from exc
    return sc
