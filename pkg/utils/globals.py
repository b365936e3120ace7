from enum import Enum


class AppInfo:
    APP_IDENTIFIER = "Ansteckung"
    VERSION = "0.4.0"
    SCHEMA_VERSION = 1


class Globals:
    DAYS_PER_YEAR = 365.0
    # Tie-breaking shift for the epsilon scheme, in days
    TIE_EPSILON_DAYS = 0.01
    KS_BAND_CONSTANT = 1.358
    # Below this many residuals the exact Kolmogorov distribution replaces the asymptotic band
    KS_EXACT_BELOW = 35
    INCIDENCE_PER = 100000.0


class TieBreakingScheme(Enum):
    EPSILON_SHIFT = "epsilon_shift"
    UNIFORM_SUBDAILY = "uniform_subdaily"

    def __str__(self):
        return self.value

    @staticmethod
    def get(name):
        for value in TieBreakingScheme:
            if value.value == name or value.name == str(name).upper():
                return value
        raise ValueError(f"Not a valid tie-breaking scheme: {name}")


class InterceptMode(Enum):
    SHARED = "shared"
    TYPE = "type"

    def __str__(self):
        return self.value

    @staticmethod
    def get(name):
        for value in InterceptMode:
            if value.value == name or value.name == str(name).upper():
                return value
        raise ValueError(f"Not a valid endemic intercept mode: {name}")


class ParameterSharing(Enum):
    SHARED = "shared"
    TYPE = "type"

    def __str__(self):
        return self.value

    @staticmethod
    def get(name):
        for value in ParameterSharing:
            if value.value == name or value.name == str(name).upper():
                return value
        raise ValueError(f"Not a valid parameter sharing mode: {name}")


class SourceLabel:
    """Source attribution of simulated events: -1 means endemic, otherwise the parent index."""
    ENDEMIC = -1
    ENDEMIC_NAME = "endemic"
