"""Spoken-number grammar: words to digits, checksums, and the inverse verbalizer.

The forward direction resolves self-corrections, expands repeaters
("double oh seven"), and parses numeral phrases into canonical values,
keeping alternative readings when a phrase like "one hundred twenty" is
ambiguous (120 vs 100-20). The inverse direction renders canonical values
back into spoken words in several styles; the two directions are built to
round-trip exactly, which the corpus generator and tests rely on.

Grammar-based on purpose: normalization must stay cheap enough to run on
every captured entity without measurable CPU cost.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import product

from .entities import EntityType, format_ok


class EmptyValueError(ValueError):
    """No digit-bearing tokens to normalize."""


class DigitFormatError(ValueError):
    """Checksum input is not a digit string of the required shape."""


_DIGITS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4,
    "five": 5, "six": 6, "seven": 7, "eight": 8, "nine": 9,
}
_TEENS = {
    "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19,
}
_TENS = {
    "twenty": 2, "thirty": 3, "forty": 4, "fifty": 5,
    "sixty": 6, "seventy": 7, "eighty": 8, "ninety": 9,
}
_MONTHS = {
    "january": "01", "february": "02", "march": "03", "april": "04",
    "may": "05", "june": "06", "july": "07", "august": "08",
    "september": "09", "october": "10", "november": "11", "december": "12",
}


@dataclass(frozen=True)
class NumberLexicon:
    """Token inventory for the grammar; loadable from JSON so new phrasings
    need no code changes."""

    digits: dict[str, int] = field(default_factory=lambda: dict(_DIGITS))
    oh_words: frozenset[str] = frozenset({"oh", "o"})
    teens: dict[str, int] = field(default_factory=lambda: dict(_TEENS))
    tens: dict[str, int] = field(default_factory=lambda: dict(_TENS))
    multipliers: dict[str, int] = field(default_factory=lambda: {"hundred": 100, "thousand": 1000})
    repeaters: dict[str, int] = field(default_factory=lambda: {"double": 2, "triple": 3})
    months: dict[str, str] = field(default_factory=lambda: dict(_MONTHS))
    correction_markers: tuple[tuple[str, ...], ...] = (
        ("scratch", "that"),
        ("i", "mean"),
        ("no", "no"),
        ("sorry",),
        ("wait",),
    )

    @classmethod
    def from_file(cls, path) -> "NumberLexicon":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        kwargs = {}
        for key in ("digits", "teens", "tens", "multipliers", "repeaters", "months"):
            if key in raw:
                kwargs[key] = raw[key]
        if "oh_words" in raw:
            kwargs["oh_words"] = frozenset(raw["oh_words"])
        if "correction_markers" in raw:
            kwargs["correction_markers"] = tuple(tuple(m) for m in raw["correction_markers"])
        return cls(**kwargs)

    def is_number_token(self, tok: str) -> bool:
        return (
            tok in self.digits
            or tok in self.oh_words
            or tok in self.teens
            or tok in self.tens
            or tok in self.multipliers
            or tok in self.repeaters
            or tok in self.months
        )

    def is_trigger_token(self, tok: str) -> bool:
        """Tokens that may open an entity candidate. "oh"/"o" are excluded:
        standalone they are usually hesitations, and a digit neighbor will
        fire the trigger one word later anyway."""
        return self.is_number_token(tok) and tok not in self.oh_words


DEFAULT_LEXICON = NumberLexicon()


@dataclass(frozen=True)
class CanonicalValue:
    entity_type: EntityType
    value: str
    valid: bool
    alternatives: tuple[str, ...] = ()
    diagnostic: str = ""


# ---------------------------------------------------------------------------
# forward direction: words -> digits


def resolve_corrections(tokens: list[str], lex: NumberLexicon = DEFAULT_LEXICON) -> tuple[list[str], bool]:
    """Apply correction markers: each marker deletes the maximal number
    group immediately before it, leaving the restated group in place.

    Returns (tokens, unresolved); unresolved is True when a marker had no
    following number group to stand in for the deleted one. Idempotent:
    the output contains no markers.
    """
    toks = list(tokens)
    unresolved = False
    while True:
        hit = None
        for i in range(len(toks)):
            for marker in lex.correction_markers:
                if tuple(toks[i : i + len(marker)]) == marker:
                    hit = (i, i + len(marker))
                    break
            if hit:
                break
        if hit is None:
            return toks, unresolved
        i, j = hit
        a = i
        while a > 0 and lex.is_number_token(toks[a - 1]):
            a -= 1
        k = j  # the restated group may sit a couple of filler words away
        while k < len(toks) and not lex.is_number_token(toks[k]) and k - j < 2:
            k += 1
        has_following = k < len(toks) and lex.is_number_token(toks[k])
        if has_following and a < i:
            toks = toks[:a] + toks[j:]
        else:
            if not has_following:
                unresolved = True
            toks = toks[:i] + toks[j:]


def expand_repeaters(tokens: list[str], lex: NumberLexicon = DEFAULT_LEXICON) -> list[str]:
    """Expand "double X" / "triple X" for single-digit X (including oh)."""
    out: list[str] = []
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if t in lex.repeaters and i + 1 < len(tokens) and (
            tokens[i + 1] in lex.digits or tokens[i + 1] in lex.oh_words
        ):
            out.extend([tokens[i + 1]] * lex.repeaters[t])
            i += 2
        elif t in lex.repeaters:
            i += 1  # dangling repeater contributes nothing
        else:
            out.append(t)
            i += 1
    return out


def _clean_number_tokens(tokens: list[str], lex: NumberLexicon) -> list[str]:
    """Keep number tokens; decide oh-as-zero by neighborhood.

    An "oh" counts as digit zero when its run of adjacent number-ish
    tokens contains a real number word, or when the run is a deliberate
    doubled "oh oh"; an isolated "oh" is a hesitation and is dropped.
    """
    kept: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        if not lex.is_number_token(tokens[i]):
            i += 1
            continue
        j = i
        while j < n and lex.is_number_token(tokens[j]):
            j += 1
        run = tokens[i:j]
        has_real = any(t not in lex.oh_words for t in run)
        if has_real or len(run) >= 2:
            kept.extend(run)
        i = j
    return kept


_NUM, _MULT = 0, 1


def _atoms(tokens: list[str], lex: NumberLexicon) -> list[tuple[int, str, int]]:
    """Lex number tokens into (kind, digits, value) atoms; tens+unit fuse."""
    out: list[tuple[int, str, int]] = []
    i = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t in lex.digits:
            out.append((_NUM, str(lex.digits[t]), lex.digits[t]))
        elif t in lex.oh_words:
            out.append((_NUM, "0", 0))
        elif t in lex.teens:
            v = lex.teens[t]
            out.append((_NUM, str(v), v))
        elif t in lex.tens:
            tv = lex.tens[t]
            if i + 1 < n and tokens[i + 1] in lex.digits and lex.digits[tokens[i + 1]] != 0:
                v = tv * 10 + lex.digits[tokens[i + 1]]
                out.append((_NUM, str(v), v))
                i += 1
            else:
                out.append((_NUM, str(tv * 10), tv * 10))
        elif t in lex.multipliers:
            out.append((_MULT, "", lex.multipliers[t]))
        # months and anything else produce no digits here
        i += 1
    return out


def _group_arith(group: list[tuple[int, str, int]]) -> str:
    total, cur = 0, 0
    for kind, _, v in group:
        if kind == _NUM:
            cur += v
        elif v == 100:
            cur = (cur or 1) * 100
        else:
            total += (cur or 1) * v
            cur = 0
    return str(total + cur)


def _group_concat(group: list[tuple[int, str, int]]) -> str:
    out: list[str] = []
    pending: int | None = None
    for kind, digits, v in group:
        if kind == _NUM:
            if pending is not None:
                out.append(str(pending))
            pending = v
        else:
            pending = (pending if pending is not None else 1) * v
    if pending is not None:
        out.append(str(pending))
    return "".join(out)


def _readings(atoms: list[tuple[int, str, int]], cap: int = 8) -> list[str]:
    """Candidate digit strings, arithmetic reading listed before concatenative."""
    if not any(kind == _MULT for kind, _, _ in atoms):
        return ["".join(d for _, d, _ in atoms)]

    # Split into plain atoms and multiplier groups: [num]? mult (num? mult | num)*
    segments: list[tuple[bool, object]] = []
    i = 0
    n = len(atoms)
    while i < n:
        is_pre = atoms[i][0] == _NUM and i + 1 < n and atoms[i + 1][0] == _MULT
        if atoms[i][0] == _MULT or is_pre:
            j = i + (2 if is_pre else 1)
            while j < n:
                if atoms[j][0] == _MULT:
                    j += 1
                elif j + 1 < n and atoms[j + 1][0] == _MULT:
                    j += 2
                elif atoms[j][0] == _NUM and atoms[j - 1][0] == _MULT:
                    j += 1
                    break
                else:
                    break
            segments.append((True, atoms[i:j]))
            i = j
        else:
            segments.append((False, atoms[i][1]))
            i += 1

    choices: list[list[str]] = []
    for grouped, seg in segments:
        if grouped:
            arith = _group_arith(seg)  # type: ignore[arg-type]
            concat = _group_concat(seg)  # type: ignore[arg-type]
            choices.append([arith] if arith == concat else [arith, concat])
        else:
            choices.append([seg])  # type: ignore[list-item]
    readings: list[str] = []
    for combo in product(*choices):
        readings.append("".join(combo))
        if len(readings) >= cap:
            break
    return readings


def _pick(entity_type: EntityType, readings: list[str]) -> tuple[str, tuple[str, ...]]:
    seen: list[str] = []
    for r in readings:
        if r not in seen:
            seen.append(r)
    ranked = sorted(
        range(len(seen)),
        key=lambda k: (not format_ok(entity_type, seen[k]), len(seen[k]), k),
    )
    value = seen[ranked[0]]
    return value, tuple(seen[k] for k in ranked[1:])


def _parse_date(tokens: list[str], lex: NumberLexicon) -> tuple[str, tuple[str, ...], bool, str]:
    month = next((lex.months[t] for t in tokens if t in lex.months), None)
    rest = [t for t in tokens if t not in lex.months]
    atoms = _atoms(rest, lex)
    if month is not None:
        if not atoms:
            return f"{month}/00", (), False, "expiration date without a year"
        readings = _readings(atoms)
        years = []
        for r in readings:
            yy = r[-2:] if len(r) >= 2 else "0" + r
            if yy not in years:
                years.append(yy)
        return f"{month}/{years[0]}", tuple(f"{month}/{y}" for y in years[1:]), True, ""
    if not atoms:
        raise EmptyValueError("no parseable date tokens")
    digits = _readings(atoms)[0]
    if len(digits) == 3:
        value = f"0{digits[0]}/{digits[1:]}"
    elif len(digits) >= 4:
        value = f"{digits[:2]}/{digits[2:4]}"
    else:
        return f"0{digits[0] if digits else '0'}/00", (), False, "too few digits for a date"
    return value, (), True, ""


def words_to_digits(
    tokens: list[str],
    entity_type: EntityType,
    lexicon: NumberLexicon = DEFAULT_LEXICON,
) -> CanonicalValue:
    """Normalize a spoken token sequence into the entity's canonical value.

    Steps, in order: correction resolution, repeater expansion, numeral
    parsing with ambiguity handling. The preferred reading is the
    format-satisfying one (then fewest digits, then parse priority);
    remaining readings land in ``alternatives``.
    """
    toks = [t.lower() for t in tokens]
    toks, unresolved = resolve_corrections(toks, lexicon)
    toks = expand_repeaters(toks, lexicon)
    toks = _clean_number_tokens(toks, lexicon)

    diagnostic = "unresolved correction" if unresolved else ""
    if entity_type is EntityType.EXPDATE:
        value, alternatives, parse_ok, diag = _parse_date(toks, lexicon)
        diagnostic = diagnostic or diag
    else:
        atoms = _atoms(toks, lexicon)
        if not atoms:
            raise EmptyValueError(f"no parseable digits for {entity_type}")
        value, alternatives = _pick(entity_type, _readings(atoms))
        parse_ok = True

    valid = parse_ok and not unresolved and format_ok(entity_type, value)
    if valid and entity_type is EntityType.CCNUM:
        valid = luhn_check(value)
    elif valid and entity_type is EntityType.ROUTING:
        valid = aba_check(value)
    return CanonicalValue(entity_type, value, valid, alternatives, diagnostic)


# ---------------------------------------------------------------------------
# checksums

_DOUBLED_DIGIT_SUM = (0, 2, 4, 6, 8, 1, 3, 5, 7, 9)


def _require_digits(digits: str, name: str) -> None:
    if not digits or not digits.isdigit():
        raise DigitFormatError(f"{name} expects a non-empty digit string, got {digits!r}")


def luhn_check(digits: str) -> bool:
    """Luhn mod-10 test, table-driven over the reversed string."""
    _require_digits(digits, "luhn_check")
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = ord(ch) - 48
        total += _DOUBLED_DIGIT_SUM[d] if i & 1 else d
    return total % 10 == 0


def luhn_complete(prefix: str) -> str:
    """Append the check digit that makes *prefix* Luhn-valid."""
    _require_digits(prefix, "luhn_complete")
    total = 0
    for i, ch in enumerate(reversed(prefix + "0")):
        d = ord(ch) - 48
        total += _DOUBLED_DIGIT_SUM[d] if i & 1 else d
    return prefix + str((10 - total % 10) % 10)


_ABA_WEIGHTS = (3, 7, 1, 3, 7, 1, 3, 7, 1)


def aba_check(digits9: str) -> bool:
    """ABA routing checksum: 3-7-1 weighted digit sum divisible by 10."""
    _require_digits(digits9, "aba_check")
    if len(digits9) != 9:
        raise DigitFormatError(f"aba_check expects exactly 9 digits, got {len(digits9)}")
    return sum(w * (ord(c) - 48) for w, c in zip(_ABA_WEIGHTS, digits9)) % 10 == 0


def aba_complete(prefix8: str) -> str:
    _require_digits(prefix8, "aba_complete")
    if len(prefix8) != 8:
        raise DigitFormatError("aba_complete expects exactly 8 digits")
    s = sum(w * (ord(c) - 48) for w, c in zip(_ABA_WEIGHTS, prefix8))
    return prefix8 + str((10 - s % 10) % 10)


# ---------------------------------------------------------------------------
# inverse direction: digits -> words

STYLES = ("plain", "grouped", "repeater", "with_corrections")

_DIGIT_WORD = {v: k for k, v in _DIGITS.items()}
_TEEN_WORD = {v: k for k, v in _TEENS.items()}
_TENS_WORD = {v: k for k, v in _TENS.items()}
_MONTH_WORD = {v: k for k, v in _MONTHS.items()}


def _zero_word(rng: random.Random, leading: bool) -> str:
    return "zero" if leading else rng.choice(("oh", "zero"))


def _render_pair(d1: int, d2: int, rng: random.Random, leading: bool) -> list[str]:
    if d1 == 0 and d2 == 0:
        return ["zero", "zero"]
    if d1 == 0:
        return [_zero_word(rng, leading), _DIGIT_WORD[d2]]
    if d2 == 0:
        return [_DIGIT_WORD[d1], _zero_word(rng, False)]
    if d1 == 1:
        return [_TEEN_WORD[10 + d2]]
    return [_TENS_WORD[d1], _DIGIT_WORD[d2]]


def _render_plain(digits: str) -> list[str]:
    return [_DIGIT_WORD[ord(c) - 48] for c in digits]


def _render_grouped(digits: str, rng: random.Random) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(digits):
        if len(digits) - i >= 2:
            out.extend(_render_pair(ord(digits[i]) - 48, ord(digits[i + 1]) - 48, rng, i == 0))
            i += 2
        else:
            d = ord(digits[i]) - 48
            out.append("zero" if d == 0 and i == 0 else (_zero_word(rng, False) if d == 0 else _DIGIT_WORD[d]))
            i += 1
    return out


def _render_repeater(digits: str, rng: random.Random) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(digits):
        d = ord(digits[i]) - 48
        run = 1
        while i + run < len(digits) and digits[i + run] == digits[i] and run < 3:
            run += 1
        word = "zero" if d == 0 and i == 0 else (_zero_word(rng, False) if d == 0 else _DIGIT_WORD[d])
        if run >= 3 and rng.random() < 0.8:
            out.extend(["triple", word])
            i += 3
        elif run >= 2 and rng.random() < 0.8:
            out.extend(["double", word])
            i += 2
        else:
            out.append(word)
            i += 1
    return out


def _render_year(yy: int, rng: random.Random) -> list[str]:
    variant = rng.randrange(3)
    pair = _render_pair(yy // 10, yy % 10, rng, leading=False)
    if variant == 0:
        return ["twenty"] + pair  # "twenty twenty five" -> 2025
    if variant == 1:
        return ["two", "thousand"] + ([] if yy == 0 else pair)
    return pair  # bare "twenty five" / "oh five"


def _render_date(mm: str, yy: str, style: str, rng: random.Random) -> list[str]:
    if style == "plain":
        return _render_plain(mm + yy)
    if style == "repeater":
        return _render_repeater(mm + yy, rng)
    return [_MONTH_WORD[mm]] + _render_year(int(yy), rng)


def _mutate_digits(digits: str, rng: random.Random) -> str:
    out = [str((ord(c) - 48 + rng.randrange(1, 10)) % 10) for c in digits]
    return "".join(out)


def verbalize(
    canonical: CanonicalValue | tuple[EntityType, str],
    style: str,
    seed: int = 0,
    lexicon: NumberLexicon = DEFAULT_LEXICON,
) -> list[str]:
    """Render a canonical value as spoken words in the given style.

    Styles plain/grouped/repeater round-trip through words_to_digits with
    no correction markers; with_corrections restates the opening group
    after a marker (a wrong month or wrong leading digits first) and still
    round-trips.
    """
    if isinstance(canonical, CanonicalValue):
        etype, value = canonical.entity_type, canonical.value
    else:
        etype, value = canonical
    if style not in STYLES:
        raise ValueError(f"unknown style {style!r}")
    rng = random.Random(seed)

    if etype is EntityType.EXPDATE:
        mm, yy = value.split("/")
        if style != "with_corrections":
            return _render_date(mm, yy, style, rng)
        wrong_mm = f"{rng.choice([m for m in range(1, 13) if f'{m:02d}' != mm]):02d}"
        marker = list(rng.choice(lexicon.correction_markers))
        return [_MONTH_WORD[wrong_mm]] + marker + _render_date(mm, yy, "grouped", rng)

    if style == "plain":
        return _render_plain(value)
    if style == "grouped":
        return _render_grouped(value, rng)
    if style == "repeater":
        return _render_repeater(value, rng)
    # with_corrections: wrong leading digits, a marker, then the full value
    k = min(len(value), rng.randrange(2, 5))
    wrong = _mutate_digits(value[:k], rng)
    marker = list(rng.choice(lexicon.correction_markers))
    base_style = rng.choice(("plain", "grouped"))
    base = _render_plain(value) if base_style == "plain" else _render_grouped(value, rng)
    return _render_plain(wrong) + marker + base
