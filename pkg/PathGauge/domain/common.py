from abc import ABC
from dataclasses import dataclass


@dataclass(frozen=True)
class DataclassValidation(ABC):
    """Frozen `dataclass` base calling the `self._validate` hook after `__init__`.

    Value objects put their invariant checks into `_validate` and raise from there,
    so an instance that exists is always valid.
    """

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        """Hook for attribute validation. Does nothing by default."""
        pass
