"""Entity type inventory and per-type canonical value formats."""

from __future__ import annotations

import re
from enum import Enum


class EntityType(Enum):
    """Numeric entity classes. Declaration order is the tie-break order
    for classifier argmax, so do not reorder."""

    ROUTING = "ROUTING"
    BANKACC = "BANKACC"
    CCNUM = "CCNUM"
    CVV = "CVV"
    EXPDATE = "EXPDATE"
    ZIP = "ZIP"
    OTHER = "OTHER"

    def __str__(self) -> str:
        return self.value


#: Entity types whose audio is masked by default. EXPDATE and ZIP are
#: captured but left audible; OTHER is never sensitive.
DEFAULT_SENSITIVE = frozenset(
    {EntityType.CCNUM, EntityType.CVV, EntityType.BANKACC, EntityType.ROUTING}
)

#: Canonical value format per type. EXPDATE is MM/YY; the rest are bare
#: digit strings of constrained length.
CANONICAL_FORMATS: dict[EntityType, re.Pattern[str]] = {
    EntityType.ROUTING: re.compile(r"^\d{9}$"),
    EntityType.BANKACC: re.compile(r"^\d{4,17}$"),
    EntityType.CCNUM: re.compile(r"^\d{13,19}$"),
    EntityType.CVV: re.compile(r"^\d{3,4}$"),
    EntityType.EXPDATE: re.compile(r"^(0[1-9]|1[0-2])/\d{2}$"),
    EntityType.ZIP: re.compile(r"^\d{5}$"),
    EntityType.OTHER: re.compile(r"^\d{1,19}$"),
}


def format_ok(entity_type: EntityType, value: str) -> bool:
    """True when *value* matches the canonical format for *entity_type*."""
    return bool(CANONICAL_FORMATS[entity_type].match(value))


def parse_entity_type(name: str) -> EntityType:
    try:
        return EntityType[name.strip().upper()]
    except KeyError:
        raise ValueError(f"unknown entity type {name!r}") from None


def parse_sensitive_set(spec: str) -> frozenset[EntityType]:
    """Parse a comma-separated entity type list, e.g. ``CCNUM,CVV``."""
    names = [p for p in (s.strip() for s in spec.split(",")) if p]
    return frozenset(parse_entity_type(n) for n in names)
