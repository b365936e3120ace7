"""
JSON file formats: events, grid and model configuration.

Every record class rejects unknown keys. Files carry a schema version that must match
the one this release writes.
"""

import json
from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from typing import Any, Dict, List, Optional, Union, get_args, get_origin

import numpy as np
from dataclasses_json import Undefined, dataclass_json
from dataclasses_json.undefined import UndefinedParameterError

from Ansteckung.errors import SchemaError, ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.geometry import Polygon
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.model_spec import ModelSpec
from utils.config import config
from utils.globals import AppInfo, InterceptMode, SourceLabel, TieBreakingScheme
from utils.logging_setup import get_logger
from utils.utils import Utils

logger = get_logger(__name__)


def _decode(cls, data: Any, what: str):
    if not isinstance(data, dict):
        raise SchemaError(f"{what}: expected a JSON object, got {type(data).__name__}")
    try:
        return cls.from_dict(data)
    except UndefinedParameterError as e:
        raise SchemaError(f"{what}: unknown keys ({e})") from e
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemaError(f"{what}: {e}") from e


def _check_version(version: int, what: str):
    if version != AppInfo.SCHEMA_VERSION:
        raise SchemaError(f"{what}: schema version {version} is not supported (expected {AppInfo.SCHEMA_VERSION})")


def read_document(path) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        logger.debug(f"Read {path}")
        return data
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise ValidationError(f"{path}: cannot be read ({e.strerror})") from e


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class EventRecord:
    t: float
    x: float
    y: float
    type: str
    marks: Dict[str, float] = field(default_factory=dict)
    source: Optional[Union[int, str]] = None


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class EventsFile:
    types: List[str]
    events: List[EventRecord]
    version: int = AppInfo.SCHEMA_VERSION
    origin_date: Optional[str] = None

    @staticmethod
    def parse(data: Dict, what: str = "events file") -> "EventsFile":
        if isinstance(data, dict) and isinstance(data.get("events"), list):
            # Decode records one by one so errors name the event
            records = []
            for k, record in enumerate(data["events"]):
                records.append(_decode(EventRecord, record, f"{what}: event {k}"))
            head = _decode(EventsFile, {**data, "events": []}, what)
            head.events = records
        else:
            head = _decode(EventsFile, data, what)
        _check_version(head.version, what)
        head.validate(what)
        return head

    def validate(self, what: str = "events file"):
        if len(self.types) == 0 or len(set(self.types)) != len(self.types):
            raise SchemaError(f"{what}: types must be a non-empty list of unique names")
        declared = set(self.types)
        mark_names = set(self.events[0].marks) if self.events else set()
        for k, e in enumerate(self.events):
            if e.type not in declared:
                raise ValidationError(f"{what}: event {k} has type {e.type!r}, not declared in {self.types}")
            if not all(np.isfinite([e.t, e.x, e.y])):
                raise ValidationError(f"{what}: event {k} has a non-finite time or location")
            if e.t <= 0:
                raise ValidationError(f"{what}: event {k} at t={e.t:g} lies outside the observation period (0, T]")
            if set(e.marks) != mark_names:
                raise ValidationError(f"{what}: event {k} has marks {sorted(e.marks)}, expected {sorted(mark_names)}")
            if e.source is not None and e.source != SourceLabel.ENDEMIC_NAME:
                if isinstance(e.source, bool) or not isinstance(e.source, int) or not 0 <= e.source < len(self.events):
                    raise ValidationError(f"{what}: event {k} has invalid source {e.source!r}")
                if self.events[e.source].t >= e.t:
                    raise ValidationError(f"{what}: event {k} names source {e.source}, which is not earlier")

    def to_history(self, bin_width: Optional[float] = None) -> EventHistory:
        type_index = {name: k for k, name in enumerate(self.types)}
        mark_names = sorted(self.events[0].marks) if self.events else []
        has_sources = any(e.source is not None for e in self.events)
        sources = None
        if has_sources:
            sources = [SourceLabel.ENDEMIC if e.source in (None, SourceLabel.ENDEMIC_NAME) else int(e.source) for e in self.events]
        return EventHistory(
            [e.t for e in self.events],
            [[e.x, e.y] for e in self.events],
            [type_index[e.type] for e in self.events],
            self.types,
            marks={name: [e.marks[name] for e in self.events] for name in mark_names},
            sources=sources,
            bin_width=bin_width,
        )

    @staticmethod
    def from_history(history: EventHistory, origin_date: Optional[str] = None, with_sources: Optional[bool] = None) -> "EventsFile":
        with_sources = history.has_sources if with_sources is None else with_sources
        records = []
        for k in range(len(history)):
            source = None
            if with_sources:
                parent = int(history.sources[k])
                source = SourceLabel.ENDEMIC_NAME if parent == SourceLabel.ENDEMIC else parent
            records.append(EventRecord(
                t=float(history.times[k]),
                x=float(history.xy[k, 0]),
                y=float(history.xy[k, 1]),
                type=history.type_names[int(history.types[k])],
                marks={name: float(col[k]) for name, col in history.marks.items()},
                source=source,
            ))
        return EventsFile(types=list(history.type_names), events=records, origin_date=origin_date)

    def to_json_dict(self) -> Dict:
        out = {"version": self.version, "origin_date": self.origin_date, "types": list(self.types), "events": []}
        for e in self.events:
            record = {"t": e.t, "x": e.x, "y": e.y, "type": e.type, "marks": dict(sorted(e.marks.items()))}
            if e.source is not None:
                record["source"] = e.source
            out["events"].append(record)
        return out


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class TileRecord:
    id: str
    rings: List[List[List[float]]]
    population: Optional[float] = None


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class IntervalRecord:
    start: float
    end: float


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class GridFile:
    tiles: List[TileRecord]
    intervals: List[IntervalRecord]
    offset: List[List[float]]
    covariates: Dict[str, List[List[float]]] = field(default_factory=dict)
    version: int = AppInfo.SCHEMA_VERSION

    @staticmethod
    def parse(data: Dict, what: str = "grid file") -> "GridFile":
        grid_file = _decode(GridFile, data, what)
        _check_version(grid_file.version, what)
        return grid_file

    def to_grid(self) -> SpaceTimeGrid:
        tiles = [Polygon.from_rings(tile.rings, name=f"tile {tile.id}") for tile in self.tiles]
        try:
            offset = np.asarray(self.offset, dtype=float)
        except ValueError as e:
            raise SchemaError(f"offset table is ragged: {e}") from e
        covariates = {}
        for name, table in self.covariates.items():
            try:
                covariates[name] = np.asarray(table, dtype=float)
            except ValueError as e:
                raise SchemaError(f"covariate {name} is ragged: {e}") from e
        populations = None
        if any(tile.population is not None for tile in self.tiles):
            populations = [tile.population for tile in self.tiles]
        return SpaceTimeGrid.build(
            [(i.start, i.end) for i in self.intervals],
            tiles,
            offset,
            covariates=covariates,
            tile_ids=[tile.id for tile in self.tiles],
            populations=populations,
        )

    @staticmethod
    def from_grid(grid: SpaceTimeGrid) -> "GridFile":
        data = grid.to_dict()
        data["version"] = AppInfo.SCHEMA_VERSION
        return GridFile.parse(data)

    def to_json_dict(self) -> Dict:
        tiles = []
        for tile in self.tiles:
            entry = {"id": tile.id, "rings": tile.rings}
            if tile.population is not None:
                entry["population"] = tile.population
            tiles.append(entry)
        return {
            "version": self.version,
            "tiles": tiles,
            "intervals": [{"start": i.start, "end": i.end} for i in self.intervals],
            "offset": self.offset,
            "covariates": dict(self.covariates),
        }


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class InteractionRecord:
    temporal: str = "constant"
    spatial: str = "constant"
    eps: float = 30.0
    delta: float = 200.0
    temporal_sharing: str = "shared"
    spatial_sharing: str = "shared"


@dataclass_json(undefined=Undefined.RAISE)
@dataclass
class ConfigFile:
    types: List[str] = field(default_factory=lambda: ["1"])
    endemic_terms: List[str] = field(default_factory=list)
    intercept: str = str(InterceptMode.SHARED)
    epidemic: bool = True
    epidemic_terms: List[str] = field(default_factory=list)
    interaction: InteractionRecord = field(default_factory=InteractionRecord)
    transmission: Optional[List[List[int]]] = None
    mark_cuts: Dict[str, List[float]] = field(default_factory=dict)
    tie_breaking: str = str(TieBreakingScheme.EPSILON_SHIFT)
    seed: int = 0
    cubature: Dict[str, Any] = field(default_factory=dict)
    optimizer: Dict[str, Any] = field(default_factory=dict)
    version: int = AppInfo.SCHEMA_VERSION

    @staticmethod
    def parse(data: Dict, what: str = "config file") -> "ConfigFile":
        config_file = _decode(ConfigFile, data, what)
        _check_version(config_file.version, what)
        for section, allowed in (("cubature", config.cubature), ("optimizer", config.optimizer)):
            unknown = sorted(set(getattr(config_file, section)) - set(allowed))
            if unknown:
                raise SchemaError(f"{what}: unknown {section} settings {unknown}; allowed are {sorted(allowed)}")
        return config_file

    def to_spec(self) -> ModelSpec:
        try:
            return ModelSpec.from_dict({
                "types": self.types,
                "endemic_terms": self.endemic_terms,
                "intercept": self.intercept,
                "epidemic": self.epidemic,
                "epidemic_terms": self.epidemic_terms,
                "interaction": self.interaction.to_dict(),
                "transmission": self.transmission,
                "mark_cuts": self.mark_cuts,
                "tie_breaking": self.tie_breaking,
                "seed": self.seed,
                "cubature": self.cubature,
                "optimizer": self.optimizer,
            })
        except (KeyError, TypeError) as e:
            raise SchemaError(f"config file: {e}") from e

    @staticmethod
    def from_spec(spec: ModelSpec) -> "ConfigFile":
        data = spec.to_dict()
        data["version"] = AppInfo.SCHEMA_VERSION
        return ConfigFile.parse(data)

    def to_json_dict(self) -> Dict:
        out = self.to_dict()
        return {"version": out.pop("version"), **out}


def read_events(path) -> EventsFile:
    return EventsFile.parse(read_document(path), what=str(path))


def read_grid(path) -> GridFile:
    return GridFile.parse(read_document(path), what=str(path))


def read_config(path) -> ConfigFile:
    return ConfigFile.parse(read_document(path), what=str(path))


def write_events(path, events_file: EventsFile):
    return Utils.write_json(path, events_file.to_json_dict())


def write_grid(path, grid_file: GridFile):
    return Utils.write_json(path, grid_file.to_json_dict())


def write_config(path, config_file: ConfigFile):
    return Utils.write_json(path, config_file.to_json_dict())


def _type_name(tp) -> str:
    origin = get_origin(tp)
    if origin is None:
        if is_dataclass(tp):
            return "object"
        return {float: "number", int: "integer", str: "string", bool: "boolean"}.get(tp, "any")
    args = [a for a in get_args(tp) if a is not type(None)]
    if origin is Union:
        names = [_type_name(a) for a in args]
        return names[0] if len(names) == 1 else " | ".join(names)
    if origin in (list, List):
        return f"array of {_type_name(args[0])}"
    if origin in (dict, Dict):
        return f"object of {_type_name(args[1])}"
    return "any"


def describe(cls) -> Dict:
    """Field table of a record class: type, whether required, nested records expanded."""
    out = {}
    for f in fields(cls):
        entry = {"type": _type_name(f.type), "required": _required(f)}
        nested = _nested_record(f.type)
        if nested is not None:
            entry["fields"] = describe(nested)
        out[f.name] = entry
    return out


def _required(f) -> bool:
    return f.default is MISSING and f.default_factory is MISSING


def _nested_record(tp):
    if is_dataclass(tp):
        return tp
    for arg in get_args(tp):
        nested = _nested_record(arg)
        if nested is not None:
            return nested
    return None


SCHEMAS = {
    "events": EventsFile,
    "grid": GridFile,
    "config": ConfigFile,
}


def schema(name: str) -> Dict:
    if name not in SCHEMAS:
        raise ValidationError(f"Unknown schema {name!r}; choose from {sorted(SCHEMAS)}")
    return {"schema": name, "version": AppInfo.SCHEMA_VERSION, "unknown_keys": "rejected", "fields": describe(SCHEMAS[name])}
