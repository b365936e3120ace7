"""Tests for the JSON file formats, input validation and synthetic data."""

import json

import numpy as np
import pytest

from Ansteckung.errors import DimensionError, OutOfRegionError, SchemaError, ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.formats import (ConfigFile, EventsFile, GridFile, read_config, read_events, read_grid, schema,
                                write_config, write_events, write_grid)
from Ansteckung.grid import regular_grid
from Ansteckung.loader import check_events, load_validate
from Ansteckung.mark_sampler import FixedMarkSampler
from Ansteckung.model_spec import ModelSpec
from Ansteckung.residuals import break_ties
from Ansteckung.synth import parameters_for, synth
from utils.globals import AppInfo, SourceLabel


def events_document(events, types=("1",)):
    return {"version": AppInfo.SCHEMA_VERSION, "types": list(types), "events": events}


def write_triple(directory, grid, spec, history):
    write_grid(directory / "grid.json", GridFile.from_grid(grid))
    write_config(directory / "config.json", ConfigFile.from_spec(spec))
    write_events(directory / "events.json", EventsFile.from_history(history))
    return directory / "events.json", directory / "grid.json", directory / "config.json"


class TestEventsFile:
    """Parsing and validation of events files."""

    def test_parse(self):
        """Test a minimal valid events document."""
        events_file = EventsFile.parse(events_document([{"t": 1.5, "x": 0.2, "y": 0.3, "type": "1", "marks": {"age": 4}}]))
        history = events_file.to_history()
        assert len(history) == 1
        assert history.marks["age"][0] == 4.0

    def test_unknown_key_is_rejected(self):
        """Test that an unexpected key in an event record names the event."""
        with pytest.raises(SchemaError, match="event 0"):
            EventsFile.parse(events_document([{"t": 1.0, "x": 0, "y": 0, "type": "1", "weight": 2}]))

    def test_unknown_top_level_key(self):
        """Test that an unexpected top-level key is rejected."""
        with pytest.raises(SchemaError):
            EventsFile.parse({**events_document([]), "comment": "x"})

    def test_time_zero_names_the_event(self):
        """Test that t=0 is outside (0, T] and the message names event 1."""
        document = events_document([{"t": 1.0, "x": 0, "y": 0, "type": "1"}, {"t": 0.0, "x": 0, "y": 0, "type": "1"}])
        with pytest.raises(ValidationError, match="event 1 at t=0"):
            EventsFile.parse(document)

    def test_undeclared_type(self):
        """Test that an event type must be declared."""
        with pytest.raises(ValidationError, match="not declared"):
            EventsFile.parse(events_document([{"t": 1.0, "x": 0, "y": 0, "type": "2"}]))

    def test_inconsistent_marks(self):
        """Test that every event carries the same marks."""
        document = events_document([{"t": 1.0, "x": 0, "y": 0, "type": "1", "marks": {"age": 1}},
                                    {"t": 2.0, "x": 0, "y": 0, "type": "1"}])
        with pytest.raises(ValidationError, match="event 1"):
            EventsFile.parse(document)

    def test_source_must_be_earlier(self):
        """Test that a parent reference must point to an earlier event."""
        document = events_document([{"t": 1.0, "x": 0, "y": 0, "type": "1", "source": 1},
                                    {"t": 2.0, "x": 0, "y": 0, "type": "1", "source": "endemic"}])
        with pytest.raises(ValidationError, match="not earlier"):
            EventsFile.parse(document)

    def test_wrong_version(self):
        """Test that another schema version is refused."""
        with pytest.raises(SchemaError, match="version"):
            EventsFile.parse({**events_document([]), "version": AppInfo.SCHEMA_VERSION + 1})

    def test_invalid_json_reports_position(self, temp_dir):
        """Test that a syntax error reports its line."""
        path = temp_dir / "events.json"
        path.write_text('{"types": ["1"],\n "events": [}\n', encoding="utf-8")
        with pytest.raises(SchemaError, match="line 2"):
            read_events(path)

    def test_missing_file(self, temp_dir):
        """Test that an unreadable file is a validation error."""
        with pytest.raises(ValidationError):
            read_events(temp_dir / "missing.json")

    def test_sources_written_as_endemic_or_index(self, temp_dir):
        """Test the source attribution in written files."""
        history = EventHistory([1.0, 2.0], [[0, 0], [0.5, 0.5]], [0, 0], ["1"], sources=[SourceLabel.ENDEMIC, 0])
        write_events(temp_dir / "events.json", EventsFile.from_history(history))
        data = json.loads((temp_dir / "events.json").read_text(encoding="utf-8"))
        assert [e["source"] for e in data["events"]] == ["endemic", 0]
        again = read_events(temp_dir / "events.json").to_history()
        np.testing.assert_array_equal(again.sources, [SourceLabel.ENDEMIC, 0])


class TestGridAndConfigFiles:
    """Grid and model config files."""

    def test_grid_file_round_trip(self, temp_dir, square_grid):
        """Test that a written grid reads back with the same tables."""
        write_grid(temp_dir / "grid.json", GridFile.from_grid(square_grid))
        grid = read_grid(temp_dir / "grid.json").to_grid()
        np.testing.assert_array_equal(grid.offset, square_grid.offset)
        np.testing.assert_array_equal(grid.covariates["density"], square_grid.covariates["density"])
        assert grid.tile_ids == square_grid.tile_ids

    def test_covariate_dimension_error(self):
        """Test that a covariate with the wrong number of intervals names the covariate."""
        data = GridFile.from_grid(regular_grid(1, 1, 1.0, 1.0, 2)).to_json_dict()
        data["covariates"] = {"rain": [[1.0]]}
        with pytest.raises(DimensionError, match="rain"):
            GridFile.parse(data).to_grid()

    def test_config_round_trip(self, temp_dir, two_type_spec):
        """Test that a written config reads back to the same model specification."""
        write_config(temp_dir / "config.json", ConfigFile.from_spec(two_type_spec))
        assert read_config(temp_dir / "config.json").to_spec().to_dict() == two_type_spec.to_dict()

    def test_unknown_cubature_setting(self):
        """Test that an unknown cubature setting is refused."""
        with pytest.raises(SchemaError, match="cubature"):
            ConfigFile.parse({"cubature": {"cells": 3}})

    def test_unknown_config_key(self):
        """Test that an unknown config key is refused."""
        with pytest.raises(SchemaError):
            ConfigFile.parse({"endemic": ["trend"]})

    def test_schema_lists_required_fields(self):
        """Test the schema description of the events file."""
        described = schema("events")
        assert described["fields"]["events"]["fields"]["t"] == {"type": "number", "required": True}
        assert described["fields"]["origin_date"]["required"] is False
        with pytest.raises(ValidationError):
            schema("fit")


class TestLoader:
    """Loading and cross-checking an events, grid and config triple."""

    def test_load_validate(self, temp_dir, square_grid, two_type_spec, two_type_history):
        """Test that a consistent triple loads into a bundle."""
        bundle = load_validate(*write_triple(temp_dir, square_grid, two_type_spec, two_type_history))
        assert (bundle.n, bundle.D, bundle.M, bundle.K) == (60, 10, 9, 2)
        np.testing.assert_allclose(bundle.history.times, two_type_history.times)

    def test_tied_times_are_broken_on_load(self, temp_dir, square_grid, two_type_spec, two_type_history):
        """Test that same-day events come back strictly increasing, shifted by the config's scheme."""
        tied = two_type_history.with_times(np.ceil(two_type_history.times))
        assert not tied.strictly_increasing
        bundle = load_validate(*write_triple(temp_dir, square_grid, two_type_spec, tied))
        assert bundle.history.strictly_increasing
        expected = break_ties(tied, two_type_spec.tie_breaking, seed=two_type_spec.seed)
        np.testing.assert_allclose(bundle.history.times, expected.times)

    def test_untied_times_are_kept(self, temp_dir, square_grid, two_type_spec, two_type_history):
        """Test that a history without ties loads with its times unchanged."""
        bundle = load_validate(*write_triple(temp_dir, square_grid, two_type_spec, two_type_history), tie_seed=5)
        np.testing.assert_array_equal(bundle.history.times, two_type_history.times)

    def test_event_outside_region(self, temp_dir, square_grid, two_type_spec):
        """Test that an event outside W names the event."""
        history = EventHistory([1.0, 2.0], [[1.0, 1.0], [45.0, 1.0]], [0, 1], ["B", "C"], marks={"age": [1.0, 2.0]})
        with pytest.raises(OutOfRegionError, match="event 1"):
            load_validate(*write_triple(temp_dir, square_grid, two_type_spec, history))

    def test_event_after_T(self, square_grid, two_type_spec):
        """Test that an event after the grid end is rejected."""
        events_file = EventsFile.parse(events_document([{"t": 101.0, "x": 1, "y": 1, "type": "B", "marks": {"age": 1}}], ["B", "C"]))
        with pytest.raises(ValidationError, match="event 0"):
            check_events(events_file, square_grid, two_type_spec)

    def test_types_must_match_config(self, square_grid, two_type_spec):
        """Test that the events and the config declare the same types."""
        events_file = EventsFile.parse(events_document([], ["B"]))
        with pytest.raises(ValidationError, match="types"):
            check_events(events_file, square_grid, two_type_spec)

    def test_unknown_covariate_term(self, temp_dir, square_grid, two_type_spec, two_type_history):
        """Test that an endemic term without a covariate fails at load time."""
        spec = two_type_spec.copy_with(endemic_terms=["rain"])
        with pytest.raises(ValidationError, match="rain"):
            load_validate(*write_triple(temp_dir, square_grid, spec, two_type_history))


class TestSynth:
    """Synthetic events files from named parameters."""

    def test_named_parameters(self, square_grid, two_type_spec):
        """Test that every parameter must be named exactly once."""
        sampler = FixedMarkSampler({"age": 10.0})
        values = {"endemic.intercept": -5.0, "endemic.density": 0.2, "epidemic.intercept": -3.0,
                  "epidemic.type.C": 0.1, "epidemic.age": 0.0, "log_sigma": 0.0}
        with pytest.raises(ValidationError, match="missing"):
            parameters_for(two_type_spec, square_grid, values, sampler)
        with pytest.raises(ValidationError, match="Unknown"):
            parameters_for(two_type_spec, square_grid, {**values, "log_alpha": 0.0, "rate": 1.0}, sampler)
        theta = parameters_for(two_type_spec, square_grid, {**values, "log_alpha": -1.0}, sampler)
        assert theta.to_dict()["log_alpha"] == -1.0

    def test_synth_is_reproducible_and_loadable(self, square_grid, two_type_spec):
        """Test that one seed gives the same file and that it passes the loader checks."""
        sampler = FixedMarkSampler({"age": 10.0})
        values = {"endemic.intercept": -5.0, "endemic.density": 0.2, "epidemic.intercept": -3.0,
                  "epidemic.type.C": 0.1, "epidemic.age": 0.0, "log_sigma": 0.0, "log_alpha": -1.0}
        theta = parameters_for(two_type_spec, square_grid, values, sampler)
        a = synth(two_type_spec, square_grid, theta, seed=8, mark_sampler=sampler)
        b = synth(two_type_spec, square_grid, theta, seed=8, mark_sampler=sampler)
        assert a.to_json_dict() == b.to_json_dict()
        check_events(a, square_grid, two_type_spec)
        assert all(e.source is not None for e in a.events)
