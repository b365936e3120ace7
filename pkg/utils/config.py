import json
import os

from utils.logging_setup import get_logger

logger = get_logger("config")

root_dir = os.path.dirname(os.path.dirname(os.path.realpath(__file__)))


class Config:
    CONFIGS_DIR_LOC = os.path.join(root_dir, "configs")

    def __init__(self, config_path=None):
        self.dict = {}

        # Logging
        self.log_level = "INFO"
        self.log_to_file = True

        # Worker threads for likelihood blocks and replicate simulation
        self.threads = 1

        # Midpoint cubature over interaction regions
        self.cubature = {
            "disc_vertices": 64,
            "cells_per_radius": 40,
            "refinement_tolerance": 1e-4,
            "max_refinements": 3,
            "inscribed_disc": False,
        }

        # Quasi-Newton fitting
        self.optimizer = {
            "max_iterations": 500,
            "gradient_tolerance": 1e-6,
            "relative_loglik_tolerance": 1e-10,
        }

        self.simulation = {
            "max_rejection_draws": 1000000,
        }

        self.bootstrap_samples = 999
        self.envelope_simulations = 100
        self.output_float_format = "%.10g"

        self.config_path = config_path if config_path is not None else Config.find_config_path()

        if self.config_path is not None:
            try:
                with open(self.config_path, "r", encoding="utf-8") as f:
                    self.dict = json.load(f)
            except Exception as e:
                logger.error(e)
                logger.warning("Unable to load config. Ensure config.json file settings are correct.")

        self.set_values(str,
            "log_level",
            "output_float_format",
        )

        self.set_values(int,
            "threads",
            "bootstrap_samples",
            "envelope_simulations",
        )

        self.set_values(bool,
            "log_to_file",
        )

        self.set_sections(
            "cubature",
            "optimizer",
            "simulation",
        )

        env_threads = os.environ.get("ANSTECKUNG_THREADS")
        if env_threads:
            try:
                self.threads = int(env_threads)
            except ValueError:
                logger.warning(f"Ignoring invalid ANSTECKUNG_THREADS value: {env_threads}")

        if self.threads < 1:
            logger.warning(f"threads must be at least 1, got {self.threads}")
            self.threads = 1

    @staticmethod
    def find_config_path():
        if not os.path.isdir(Config.CONFIGS_DIR_LOC):
            return None
        configs = [f.path for f in os.scandir(Config.CONFIGS_DIR_LOC) if f.is_file() and f.path.endswith(".json")]
        config_path = None
        for c in sorted(configs):
            if os.path.basename(c) == "config.json":
                return c
            elif os.path.basename(c) != "config_example.json":
                config_path = c
        if config_path is None:
            example = os.path.join(Config.CONFIGS_DIR_LOC, "config_example.json")
            if os.path.exists(example):
                config_path = example
        return config_path

    def set_values(self, type, *names):
        for name in names:
            if name not in self.dict:
                continue
            try:
                setattr(self, name, type(self.dict[name]))
            except Exception as e:
                logger.error(e)
                logger.warning(f"Failed to set {name} from config.json file. Ensure the value is set and of the correct type.")

    def set_sections(self, *names):
        """Merge nested sections key by key so partial overrides keep the remaining defaults."""
        for name in names:
            if name not in self.dict:
                continue
            section = getattr(self, name)
            overrides = self.dict[name]
            if not isinstance(overrides, dict):
                logger.warning(f"Section {name} in config.json must be an object, ignoring it.")
                continue
            for key, value in overrides.items():
                if key not in section:
                    logger.warning(f"Unknown key {name}.{key} in config.json, ignoring it.")
                    continue
                try:
                    section[key] = type(section[key])(value)
                except Exception as e:
                    logger.error(e)
                    logger.warning(f"Failed to set {name}.{key} from config.json file. Ensure the value is of the correct type.")


config = Config()
