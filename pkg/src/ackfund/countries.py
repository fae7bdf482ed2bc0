"""Country name / code lookup for ISO 3166-1 alpha-2 assignment."""
from __future__ import annotations

import re
from functools import lru_cache

import pycountry

UNKNOWN = "ZZ"

# Common forms pycountry does not list, plus demonyms seen in funder names.
_EXTRA = {
    "uk": "GB", "u.k.": "GB", "britain": "GB", "great britain": "GB", "england": "GB",
    "scotland": "GB", "wales": "GB", "northern ireland": "GB", "british": "GB",
    "usa": "US", "u.s.": "US", "u.s.a.": "US", "united states": "US", "america": "US",
    "american": "US", "czech republic": "CZ", "czech": "CZ", "korea": "KR", "south korea": "KR",
    "russia": "RU", "taiwan": "TW", "iran": "IR", "vietnam": "VN", "holland": "NL",
    "german": "DE", "french": "FR", "italian": "IT", "spanish": "ES", "dutch": "NL",
    "swedish": "SE", "danish": "DK", "norwegian": "NO", "finnish": "FI", "swiss": "CH",
    "austrian": "AT", "belgian": "BE", "irish": "IE", "japanese": "JP", "chinese": "CN",
    "canadian": "CA", "australian": "AU", "romanian": "RO", "polish": "PL", "portuguese": "PT",
    "greek": "GR", "hungarian": "HU", "israeli": "IL", "indian": "IN", "brazilian": "BR",
    "european": None,
}
# Alpha-2 codes that collide with frequent funder acronyms.
_AMBIGUOUS_CODES = {"EC", "EU"}


@lru_cache(maxsize=1)
def _names() -> dict[str, str]:
    table: dict[str, str] = {}
    for c in pycountry.countries:
        for attr in ("name", "common_name", "official_name"):
            value = getattr(c, attr, None)
            if value:
                table[value.lower()] = c.alpha_2
    table.update({k: v for k, v in _EXTRA.items() if v})
    return table


@lru_cache(maxsize=1)
def _name_regex() -> re.Pattern:
    names = sorted(_names(), key=len, reverse=True)
    return re.compile(r"(?<![\w-])(" + "|".join(re.escape(n) for n in names) + r")(?![\w-])",
                      re.IGNORECASE)


@lru_cache(maxsize=4096)
def lookup(token: str) -> str | None:
    """ISO alpha-2 code for a country name, demonym, or code; None if not a country."""
    t = token.strip()
    if not t:
        return None
    if len(t) == 2 and t.isalpha() and t.isupper():
        if t in _AMBIGUOUS_CODES:
            return None
        if t == "UK":
            return "GB"
        return t if pycountry.countries.get(alpha_2=t) else None
    if len(t) == 3 and t.isalpha() and t.isupper() and t != "USA":
        c = pycountry.countries.get(alpha_3=t)
        return c.alpha_2 if c else None
    return _names().get(t.lower())


_PAREN = re.compile(r"\(([A-Za-z.]{2,6})\)")


def find_in_text(text: str) -> str | None:
    """First country stated in a piece of text: explicit "(UK)" beats a country word."""
    for m in _PAREN.finditer(text):
        code = lookup(m.group(1))
        if code:
            return code
    m = _name_regex().search(text)
    if m:
        return _names()[m.group(1).lower()]
    return None


def is_valid_code(code: str) -> bool:
    return code == UNKNOWN or (len(code) == 2 and code.isascii() and code.isalpha()
                               and code.isupper())
