#!/usr/bin/env python3
# Word-to-digit normalization: corrections, repeaters, ambiguity, checksums,
# and the inverse verbalizer that the corpus generator uses.

from liveredact import EntityType, aba_check, luhn_check, verbalize, words_to_digits

ET = EntityType

cases = [
    ("february no no january twenty twenty five", ET.EXPDATE),
    ("double oh seven", ET.BANKACC),
    ("one hundred twenty", ET.BANKACC),
    ("one hundred twenty", ET.CVV),
    ("forty two forty two forty two forty two forty two forty two forty two forty two", ET.CCNUM),
    ("five six no no seven eight nine one", ET.CVV),
    ("oh okay its nine one five", ET.CVV),
]
for phrase, etype in cases:
    got = words_to_digits(phrase.split(), etype)
    alts = f"  alternatives={list(got.alternatives)}" if got.alternatives else ""
    print(f"{etype.value:8s} {phrase!r}\n         -> {got.value} (valid={got.valid}){alts}")

print("\nLuhn:", luhn_check("4242424242424242"), luhn_check("4242424242424243"))
print("ABA: ", aba_check("011000015"), aba_check("000000001"))

# The verbalizer inverts canonical values into each speaking style; the pair
# round-trips exactly, which is what keeps corpus annotations trustworthy.
value = "4012000033330026"
for style in ("plain", "grouped", "repeater", "with_corrections"):
    toks = verbalize((ET.CCNUM, value), style, seed=7)
    back = words_to_digits(toks, ET.CCNUM).value
    print(f"\n{style}:\n  {' '.join(toks)}\n  -> {back}  (round trip {'ok' if back == value else 'BROKEN'})")
