"""
Contact scenario documents.

A scenario is a YAML mapping with the sections below; every section is
optional and falls back to the dataclass defaults. Unknown keys are
rejected with the line and column of the offending key.

    name: demo
    mesh: {length, height, nx, ny, rotation_deg}
    material: {theta1, theta2, lame_lambda, lame_mu, kappa, tau_r}
    laws: {friction_bound, friction_growth, damper_min, damper_max,
           compliance_max, compliance_cap, friction_coefficient, gap}
    loads:
      body: [fx, fy]                 # N/m^3, body frame
      traction: {top: [fx, fy], right: [fx, fy]}   # N/m^2 on gamma2
      nodal: [{nodes: [ids], force: [fx, fy]}]     # point loads
      profile: [[t, factor], ...]    # piecewise-linear load factor, default 1
    initial_displacement: {slope: [a, b]}          # u0(x, y) = x*(a, b)
    time: {T, N}
    solver: {SolveConfig fields}
    evolution: {picard_tol, max_picard, workers}
"""

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import yaml

from ..core.errors import MeshError, ScenarioError
from ..history.grid import TimeGrid
from ..solvers.elliptic import SolveConfig
from .laws import BoundaryLaws, Material
from .mesh import RectMesh

logger = logging.getLogger(__name__)

TRACTION_SIDES = ("top", "right")


@dataclass(frozen=True, eq=False)
class LoadSpec:
    """Reference loads in the body frame, scaled in time by a piecewise-linear profile."""

    body: np.ndarray = field(default_factory=lambda: np.zeros(2))
    traction: Dict[str, np.ndarray] = field(default_factory=dict)
    nodal: Tuple[Tuple[Tuple[int, ...], np.ndarray], ...] = ()
    profile: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        body = _vector2(self.body, "loads.body")
        traction = {}
        for side, value in dict(self.traction).items():
            if side not in TRACTION_SIDES:
                raise ValueError(f"traction side must be one of {TRACTION_SIDES}, got {side!r}")
            traction[side] = _vector2(value, f"loads.traction.{side}")
        nodal = tuple(
            (tuple(int(n) for n in nodes), _vector2(force, "loads.nodal.force"))
            for nodes, force in self.nodal
        )
        profile = np.asarray(self.profile, dtype=float).reshape(-1, 2)
        if profile.size and np.any(np.diff(profile[:, 0]) <= 0):
            raise ValueError("load profile times must be strictly increasing")
        if not np.all(np.isfinite(profile)):
            raise ValueError("load profile must be finite")
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "traction", traction)
        object.__setattr__(self, "nodal", nodal)
        object.__setattr__(self, "profile", profile)

    def factor(self, t: float) -> float:
        if not self.profile.size:
            return 1.0
        return float(np.interp(t, self.profile[:, 0], self.profile[:, 1]))

    @property
    def magnitude(self) -> float:
        """Largest reference load component times the largest profile factor."""
        parts = [np.abs(self.body).max()]
        parts += [np.abs(v).max() for v in self.traction.values()]
        parts += [np.abs(f).max() for _, f in self.nodal]
        peak = float(np.abs(self.profile[:, 1]).max()) if self.profile.size else 1.0
        return float(max(parts)) * peak

    def scaled(self, factor: float) -> "LoadSpec":
        return LoadSpec(
            self.body * factor,
            {k: v * factor for k, v in self.traction.items()},
            tuple((nodes, f * factor) for nodes, f in self.nodal),
            self.profile,
        )

    def to_dict(self) -> Dict:
        return {
            "body": self.body.tolist(),
            "traction": {k: v.tolist() for k, v in self.traction.items()},
            "nodal": [{"nodes": list(n), "force": f.tolist()} for n, f in self.nodal],
            "profile": self.profile.tolist(),
        }


def _vector2(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be a finite pair [x, y]")
    return arr


@dataclass(frozen=True, eq=False)
class ContactScenario:
    name: str = "scenario"
    mesh: RectMesh = field(default_factory=RectMesh)
    material: Material = field(default_factory=Material)
    laws: BoundaryLaws = field(default_factory=BoundaryLaws)
    loads: LoadSpec = field(default_factory=LoadSpec)
    u0_slope: np.ndarray = field(default_factory=lambda: np.zeros(2))
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(1.0, 40))
    solver: SolveConfig = field(default_factory=SolveConfig)
    evolution: Dict[str, float] = field(default_factory=dict)
    source: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "u0_slope", _vector2(self.u0_slope, "initial_displacement.slope"))

    @property
    def load_scale(self) -> float:
        m = self.loads.magnitude
        return m if m > 0 else 1.0

    def with_laws(self, **changes) -> "ContactScenario":
        return replace(self, laws=replace(self.laws, **changes))

    def with_material(self, **changes) -> "ContactScenario":
        return replace(self, material=replace(self.material, **changes))

    def with_mesh(self, **changes) -> "ContactScenario":
        return replace(self, mesh=replace(self.mesh, **changes))

    def with_grid(self, grid: TimeGrid) -> "ContactScenario":
        return replace(self, grid=grid)

    def with_solver(self, **changes) -> "ContactScenario":
        return replace(self, solver=replace(self.solver, **changes))

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "mesh": self.mesh.to_dict(),
            "material": self.material.to_dict(),
            "laws": self.laws.to_dict(),
            "loads": self.loads.to_dict(),
            "initial_displacement": {"slope": self.u0_slope.tolist()},
            "time": self.grid.to_dict(),
            "solver": self.solver.to_dict(),
            "evolution": dict(self.evolution),
        }


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

LEAF = None

SCHEMA = {
    "name": LEAF,
    "mesh": {k: LEAF for k in ("length", "height", "nx", "ny", "rotation_deg")},
    "material": {f.name: LEAF for f in fields(Material)},
    "laws": {f.name: LEAF for f in fields(BoundaryLaws)},
    "loads": {
        "body": LEAF,
        "traction": {side: LEAF for side in TRACTION_SIDES},
        "nodal": [{"nodes": LEAF, "force": LEAF}],
        "profile": LEAF,
    },
    "initial_displacement": {"slope": LEAF},
    "time": {"T": LEAF, "N": LEAF},
    "solver": {f.name: LEAF for f in fields(SolveConfig)},
    "evolution": {"picard_tol": LEAF, "max_picard": LEAF, "workers": LEAF},
}


def _mark(node) -> Tuple[int, int]:
    return node.start_mark.line + 1, node.start_mark.column + 1


def _validate(node, schema, path: str, where: str, marks: Dict[str, Tuple[int, int]]):
    """Walk the composed node tree against the schema, recording section marks."""
    if schema is LEAF:
        return
    if isinstance(schema, list):
        if not isinstance(node, yaml.SequenceNode):
            raise ScenarioError(f"{where} must be a list", *_mark(node), path)
        for i, item in enumerate(node.value):
            _validate(item, schema[0], path, f"{where}[{i}]", marks)
        return
    if not isinstance(node, yaml.MappingNode):
        raise ScenarioError(f"{where or 'document'} must be a mapping", *_mark(node), path)
    seen = set()
    for key_node, value_node in node.value:
        key = key_node.value
        dotted = f"{where}.{key}" if where else key
        if key not in schema:
            raise ScenarioError(f"unknown key {dotted!r}", *_mark(key_node), path)
        if key in seen:
            raise ScenarioError(f"duplicate key {dotted!r}", *_mark(key_node), path)
        seen.add(key)
        marks[dotted] = _mark(key_node)
        _validate(value_node, schema[key], path, dotted, marks)


def parse_scenario(text: str, path: str = "<string>") -> ContactScenario:
    """Parse a scenario document; all failures raise ScenarioError with a location."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ScenarioError(f"malformed YAML: {exc.problem}", line, col, path) from exc
    if root is None:
        raise ScenarioError("scenario document is empty", path=path)
    marks: Dict[str, Tuple[int, int]] = {}
    _validate(root, SCHEMA, path, "", marks)
    data = yaml.safe_load(text) or {}

    def section(name: str):
        value = data.get(name)
        return {} if value is None else value

    def build(name: str, fn):
        try:
            return fn()
        except (ValueError, TypeError, KeyError, MeshError) as exc:
            line, col = marks.get(name, (None, None))
            raise ScenarioError(f"invalid {name}: {exc}", line, col, path) from exc

    mesh = build("mesh", lambda: RectMesh(**section("mesh")))
    build("mesh", mesh.check_partition)
    material = build("material", lambda: Material.from_dict(section("material")))
    laws = build("laws", lambda: BoundaryLaws.from_dict(section("laws")))
    loads = build("loads", lambda: _parse_loads(section("loads"), mesh))
    slope = build(
        "initial_displacement",
        lambda: _vector2(section("initial_displacement").get("slope", [0.0, 0.0]), "slope"),
    )
    grid = build("time", lambda: TimeGrid(**{"T": 1.0, "N": 40, **section("time")}))
    solver = build("solver", lambda: SolveConfig.from_dict(section("solver")))
    evolution = build("evolution", lambda: {k: v for k, v in section("evolution").items()})
    scenario = ContactScenario(
        name=str(data.get("name", Path(path).stem)),
        mesh=mesh,
        material=material,
        laws=laws,
        loads=loads,
        u0_slope=slope,
        grid=grid,
        solver=solver,
        evolution=evolution,
        source=path,
    )
    logger.info(f"Loaded scenario {scenario.name!r} from {path}")
    return scenario


def _parse_loads(data: Dict, mesh: RectMesh) -> LoadSpec:
    nodal = []
    for entry in data.get("nodal") or []:
        nodes = [int(n) for n in entry["nodes"]]
        bad = [n for n in nodes if not 0 <= n < mesh.n_nodes]
        if bad:
            raise ValueError(f"nodal load on unknown node(s) {bad}")
        nodal.append((tuple(nodes), entry["force"]))
    return LoadSpec(
        body=data.get("body", [0.0, 0.0]),
        traction=data.get("traction") or {},
        nodal=tuple(nodal),
        profile=data.get("profile") or np.zeros((0, 2)),
    )


def load_scenario(path: Union[str, Path]) -> ContactScenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", path=str(path)) from exc
    return parse_scenario(text, str(path))
