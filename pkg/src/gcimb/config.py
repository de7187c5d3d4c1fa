"""Scenario configuration: schema, validation, YAML loading and presets."""

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from .fusion import TruncationConfig
from .mbfilter import FilterConfig, MotionModel
from .metrics import OspaParams
from .tbd import GroundTruth, SensorModel

MODES = ("M1", "M2")
OMEGA_POLICIES = ("metropolis", "uniform")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class ParallelTargets:
    """Two targets moving side by side, ``d_e`` metres apart."""

    d_e: float = 8.0
    start: tuple = (10.0, 25.0)
    velocity: tuple = (1.0, 0.0)

    def initial_states(self):
        vx, vy = self.velocity
        # offset perpendicular to the direction of motion
        nx, ny = np.array([-vy, vx]) / np.hypot(vx, vy)
        half = 0.5 * self.d_e
        x0, y0 = self.start
        return np.array([
            [x0 - half * nx, y0 - half * ny, vx, vy],
            [x0 + half * nx, y0 + half * ny, vx, vy],
        ])


@dataclass(frozen=True)
class Topology:
    """Undirected sensor graph; node ids are arbitrary integers."""

    nodes: tuple = (1,)
    edges: tuple = ()

    def __post_init__(self):
        nodes = tuple(int(n) for n in self.nodes)
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        if not nodes or len(set(nodes)) != len(nodes):
            raise ConfigError("topology.nodes", "node ids must be unique and nonempty")
        for a, b in edges:
            if a == b:
                raise ConfigError("topology.edges", f"self-loop at node {a}")
            if a not in nodes or b not in nodes:
                raise ConfigError("topology.edges", f"edge ({a}, {b}) references an unknown node")
        if not self._connected():
            raise ConfigError("topology", "sensor graph must be connected")

    @property
    def adjacency(self):
        adj = {n: set() for n in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def _connected(self):
        adj = self.adjacency
        seen, stack = {self.nodes[0]}, [self.nodes[0]]
        while stack:
            for nb in adj[stack.pop()] - seen:
                seen.add(nb)
                stack.append(nb)
        return len(seen) == len(self.nodes)

    @classmethod
    def chain(cls, n):
        return cls(tuple(range(1, n + 1)), tuple((i, i + 1) for i in range(1, n)))


@dataclass(frozen=True)
class ScenarioConfig:
    sensor: SensorModel
    targets: object
    name: str = "scenario"
    steps: int = 30
    motion: MotionModel = field(default_factory=MotionModel)
    filter: FilterConfig = field(default_factory=FilterConfig)
    fusion: TruncationConfig = field(default_factory=TruncationConfig)
    topology: Topology = field(default_factory=Topology)
    mode: str = "M1"
    omega: str = "metropolis"
    ospa: OspaParams = field(default_factory=OspaParams)
    efficiency_threshold: float = None
    runs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"expected one of {MODES}, got {self.mode!r}")
        if self.omega not in OMEGA_POLICIES:
            raise ConfigError("omega", f"expected one of {OMEGA_POLICIES}, got {self.omega!r}")
        if self.steps < 1:
            raise ConfigError("steps", "must be at least 1")
        if self.runs < 1:
            raise ConfigError("runs", "must be at least 1")
        if self.efficiency_threshold is None:
            object.__setattr__(self, "efficiency_threshold", self.ospa.cutoff / 2)

    def truth(self):
        if isinstance(self.targets, ParallelTargets):
            initial = self.targets.initial_states()
        else:
            initial = np.asarray(self.targets, dtype=float)
        return GroundTruth.constant_velocity(initial, self.steps, self.motion.period)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        if isinstance(self.targets, ParallelTargets):
            d["targets"] = {"parallel": dataclasses.asdict(self.targets)}
        else:
            d["targets"] = {"initial_states": np.asarray(self.targets).tolist()}
        return _plain(d)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(cls, data, path, required=()):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}", "unknown field")
    for key in required:
        if key not in data:
            raise ConfigError(f"{path}.{key}", "required field missing")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _targets(data):
    if not isinstance(data, dict) or len(data) != 1:
        raise ConfigError("targets", "expected exactly one of 'parallel' or 'initial_states'")
    (kind, value), = data.items()
    if kind == "parallel":
        t = _build(ParallelTargets, value, "targets.parallel", required=("d_e",))
        return dataclasses.replace(t, start=tuple(t.start), velocity=tuple(t.velocity))
    if kind == "initial_states":
        arr = np.asarray(value, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ConfigError("targets.initial_states", "expected a list of [px, py, vx, vy] rows")
        return tuple(map(tuple, arr.tolist()))
    raise ConfigError(f"targets.{kind}", "unknown target specification")


def config_from_dict(data):
    """Validate a nested mapping and build a :class:`ScenarioConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    top = {f.name for f in dataclasses.fields(ScenarioConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(key, "unknown field")
    for key in ("sensor", "targets"):
        if key not in data:
            raise ConfigError(key, "required section missing")
    kwargs = {k: v for k, v in data.items() if k not in (
        "sensor", "targets", "motion", "filter", "fusion", "topology", "ospa")}
    kwargs["sensor"] = _build(SensorModel, data["sensor"], "sensor", required=("snr_db",))
    kwargs["targets"] = _targets(data["targets"])
    kwargs["motion"] = _build(MotionModel, data.get("motion"), "motion")
    kwargs["filter"] = _build(FilterConfig, data.get("filter"), "filter")
    kwargs["fusion"] = _build(TruncationConfig, data.get("fusion"), "fusion")
    kwargs["topology"] = _build(Topology, data.get("topology"), "topology")
    kwargs["ospa"] = _build(OspaParams, data.get("ospa"), "ospa")
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("<root>", str(exc)) from None


def load_config(path):
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}" if mark else "<file>"
            raise ConfigError(where, f"YAML syntax error: {exc}") from None
    return config_from_dict(data)


def scenario1(d_e=8.0, snr_db=15.0, steps=30, mode="M1", runs=50, seed=0):
    """Two sensors watching two parallel targets ``d_e`` metres apart.

    Track merging is disabled: the tracks are initialized on the true targets
    and nothing is born, so merging could only fuse the two real tracks when
    the targets are closer than the merge distance.
    """
    return ScenarioConfig(
        name=f"scenario1_de{d_e:g}",
        sensor=SensorModel(snr_db=snr_db, blur=1.0, template_radius=1),
        targets=ParallelTargets(d_e=d_e),
        steps=steps,
        filter=FilterConfig(merge_distance=0.0),
        topology=Topology((1, 2), ((1, 2),)),
        mode=mode,
        runs=runs,
        seed=seed,
    )


SCENARIO2_TARGETS = (
    (5.0, 10.0, 1.0, 0.2),
    (45.0, 25.0, -1.0, 0.0),
    (5.0, 40.0, 1.0, -0.2),
)


def scenario2(n_sensors=3, mode="M1", snr_db=15.0, steps=30, runs=50, seed=0):
    """Three crossing-free targets watched by a chain of ``n_sensors`` nodes."""
    return ScenarioConfig(
        name=f"scenario2_{n_sensors}sensors_{mode}",
        sensor=SensorModel(snr_db=snr_db, blur=1.0, template_radius=2),
        targets=SCENARIO2_TARGETS,
        steps=steps,
        topology=Topology.chain(n_sensors),
        mode=mode,
        runs=runs,
        seed=seed,
    )
