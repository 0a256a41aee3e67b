"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command line layer
can translate failures without a lookup table.
"""

from __future__ import annotations


class RanwlsError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    kind = "error"

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ConfigError(RanwlsError):
    exit_code = 2
    kind = "config_error"


class ParameterError(RanwlsError, ValueError):
    exit_code = 3
    kind = "parameter_error"


class DomainError(ParameterError):
    """A point lies outside the box the basis lives on."""

    kind = "domain_error"


class SamplingError(RanwlsError):
    """The rejection sampler hit its attempt cap."""

    exit_code = 3
    kind = "sampling_error"

    def __init__(self, message: str, component=None):
        super().__init__(message)
        self.component = component

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["component"] = self.component
        return out


class DegenerateNodeError(RanwlsError):
    exit_code = 3
    kind = "degenerate_node"


class AcceptanceError(RanwlsError):
    """Too many sample sets were rejected by the spectral test."""

    exit_code = 4
    kind = "acceptance_failure"

    def __init__(self, message: str, last_deviation: float, retries: int):
        super().__init__(message)
        self.last_deviation = last_deviation
        self.retries = retries

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(last_deviation=self.last_deviation, retries=self.retries)
        return out


class ContractError(RanwlsError):
    exit_code = 3
    kind = "contract_violation"


class InvariantViolation(RanwlsError):
    exit_code = 1
    kind = "invariant_violation"


class TruncationError(RanwlsError):
    """A quantity needs eigenvalues beyond the enumerated range."""

    exit_code = 5
    kind = "truncation_exceeded"
