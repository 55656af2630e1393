"""
rclab/reward.py

    verifiable outcome rewards: final answer extraction, answer normalization and the
    domain-dispatched verifiers (rule-based matching, execution against unit tests and
    per-slot partial credit for logic puzzles)
"""


from typing import Optional, Union, Dict, Any, List, Iterable
from dataclasses import dataclass, field
from fractions import Fraction
import re

from rclab import minilang


KINDS = ("exact_string", "numeric", "assignment_set", "program_tests")


@dataclass(frozen=True)
class AnswerSpec:
    """
    ground truth for one task

    payload by kind:
    - ``numeric`` / ``exact_string``: the answer text (e.g. ``"3/4"``, ``"yes"``)
    - ``assignment_set``: mapping of slot name to value (e.g. ``{"A": "K", "B": "N"}``)
    - ``program_tests``: list of ``{"inputs": [...], "outputs": [...]}`` test cases
    """
    kind: str
    payload: Any
    domain: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"AnswerSpec: unknown kind {self.kind!r}")
        if self.payload is None or (hasattr(self.payload, "__len__") and len(self.payload) == 0):
            raise ValueError("AnswerSpec: payload must be nonempty")
        if self.kind == "numeric" and not isinstance(normalize_answer(str(self.payload)), Fraction):
            raise ValueError(f"AnswerSpec: numeric payload {self.payload!r} is not a finite rational")

    def to_json(self) -> Dict[str, Any] :
        return {"kind": self.kind, "payload": self.payload, "domain": self.domain}

    @staticmethod
    def from_json(obj: Dict[str, Any]) -> "AnswerSpec" :
        return AnswerSpec(obj["kind"], obj["payload"], obj["domain"])


@dataclass
class RewardRecord:
    raw_reward: float
    extraction_ok: bool
    verifier: str
    detail: Dict[str, Any] = field(default_factory=dict)


#------------------------------------------------------------------------------
# extraction


def _balanced_contents(text: str, start: int) -> Optional[str] :
    """ contents of the brace group opening at text[start - 1], None if never closed """
    depth = 1
    for i in range(start, len(text)):
        c = text[i]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[start:i]
    return None


def _last_balanced(text: str, tag: str) -> Optional[str] :
    idx = text.rfind(tag)
    while idx != -1:
        contents = _balanced_contents(text, idx + len(tag))
        if contents is not None:
            return contents
        idx = text.rfind(tag, 0, idx)
    return None


def extract_final(text: str) -> Optional[str] :
    """
    contents of the last well-bracketed ``\\boxed{...}`` in the text (inner braces kept),
    falls back to ``\\fbox{...}``, None when there is neither
    """
    if not text:
        return None
    found = _last_balanced(text, "\\boxed{")
    if found is None:
        found = _last_balanced(text, "\\fbox{")
    return found


#------------------------------------------------------------------------------
# normalization


_TEXT_RE = re.compile(r"\\(?:text|mathrm|mbox)\{([^{}]*)\}")
_FRAC_RE = re.compile(r"([+-]?)\\frac\{([+-]?\d+)\}\{([+-]?\d+)\}")
_SLASH_RE = re.compile(r"([+-]?\d+)/([+-]?\d+)")
_DEC_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")


def _to_rational(s: str) -> Optional[Fraction] :
    compact = "".join(s.split())
    if (m := _FRAC_RE.fullmatch(compact)) is not None:
        sign, num, den = m.groups()
        if int(den) == 0:
            return None
        v = Fraction(int(num), int(den))
        return -v if sign == "-" else v
    if (m := _SLASH_RE.fullmatch(compact)) is not None:
        num, den = m.groups()
        return Fraction(int(num), int(den)) if int(den) != 0 else None
    if _DEC_RE.fullmatch(compact):
        return Fraction(compact)
    return None


def normalize_answer(s: str) -> Union[Fraction, str] :
    """
    canonical form of an answer string

    Whitespace is trimmed, surrounding ``$`` removed, ``\\text{}`` unwrapped, ``\\dfrac`` /
    ``\\tfrac`` read as ``\\frac`` and a trailing period dropped. Fractions (``\\frac{a}{b}``,
    ``a/b``) and signed decimals/integers become a reduced ``Fraction``; anything else is
    returned lowercased with internal whitespace collapsed.
    """
    s = s.strip()
    while len(s) >= 2 and s.startswith("$") and s.endswith("$"):
        s = s[1:-1].strip()
    s = _TEXT_RE.sub(r"\1", s)
    s = s.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac")
    s = s.replace("\\left", "").replace("\\right", "").replace("\\!", "")
    s = s.strip()
    if s.endswith("."):
        s = s[:-1].rstrip()
    rational = _to_rational(s)
    if rational is not None:
        return rational
    return " ".join(s.lower().split())


#------------------------------------------------------------------------------
# verifiers


_SLOT_RE = re.compile(r"([A-Za-z]\w*)\s*(?:=|:)\s*([A-Za-z]+)")
_SLOT_SYNONYMS = {"k": "K", "knight": "K", "n": "N", "knave": "N"}


def _canonical_slot_value(v: str) -> str :
    return _SLOT_SYNONYMS.get(v.lower(), v.upper())


def parse_assignment(text: str) -> Dict[str, str] :
    """ ``"A=K, B=N"`` -> ``{"A": "K", "B": "N"}`` (first assignment of a slot wins) """
    out: Dict[str, str] = {}
    for slot, value in _SLOT_RE.findall(text):
        out.setdefault(slot.upper(), _canonical_slot_value(value))
    return out


def _verifier_name(spec: AnswerSpec) -> str :
    match spec.kind:
        case "program_tests":
            return "execution"
        case "assignment_set":
            return "partial_credit"
        case _:
            # stem answers are matched on canonical form in place of a model-based judge
            return "canonical_form" if spec.domain == "stem" else "rule_based"


def _verify(extracted: str, spec: AnswerSpec, verifier: str) -> RewardRecord :
    match spec.kind:
        case "numeric" | "exact_string":
            got = normalize_answer(extracted)
            want = normalize_answer(str(spec.payload))
            ok = got == want
            return RewardRecord(1. if ok else 0., True, verifier,
                                {"extracted": extracted, "normalized": str(got), "expected": str(want)})
        case "program_tests":
            try:
                prog = minilang.parse(extracted)
            except minilang.ParseError as e:
                return RewardRecord(0., False, verifier, {"reason": "parse_error", "message": str(e)})
            tests = [minilang.TestCase.from_json(t) for t in spec.payload]
            passed, total = minilang.run_tests(prog, tests)
            return RewardRecord(1. if passed == total else 0., True, verifier,
                                {"passed": passed, "total": total})
        case "assignment_set":
            got = parse_assignment(extracted)
            if not got:
                return RewardRecord(0., False, verifier, {"reason": "no_assignment"})
            truth = {k.upper(): _canonical_slot_value(v) for k, v in spec.payload.items()}
            correct = sorted(k for k, v in truth.items() if got.get(k) == v)
            return RewardRecord(len(correct) / len(truth), True, verifier,
                                {"correct": correct, "total": len(truth)})
    raise ValueError(f"reward: unsupported kind {spec.kind!r}")


def reward(response: str, spec: AnswerSpec) -> RewardRecord :
    """
    outcome reward of a response, a pure function of (response, spec) that never raises

    numeric / exact_string: 1 iff the normalized extraction equals the normalized truth.
    program_tests: 1 iff the boxed mini_lang program passes every unit test.
    assignment_set: fraction of slots assigned correctly.
    Any failure (no boxed answer, unparseable program, ...) gives 0 with extraction_ok False.
    """
    verifier = _verifier_name(spec)
    extracted = extract_final(response) if isinstance(response, str) else None
    if extracted is None:
        return RewardRecord(0., False, verifier, {"reason": "no_boxed_answer"})
    try:
        return _verify(extracted, spec, verifier)
    except (ValueError, TypeError, KeyError, AttributeError, ZeroDivisionError) as e:
        return RewardRecord(0., False, verifier, {"reason": "verifier_error", "message": str(e)})


def score_records(records: Iterable[Dict[str, Any]]) -> List[Dict[str, Any]] :
    """
    offline scoring protocol: each ``{"response": str, "spec": {...}}`` record maps to
    ``{"reward": float, "extraction_ok": bool, "verifier": str, "detail": {...}}``, a
    malformed record scores 0 with the problem in ``detail``
    """
    out = []
    for rec in records:
        try:
            spec = AnswerSpec.from_json(rec["spec"])
            rr = reward(rec["response"], spec)
            out.append({"reward": rr.raw_reward, "extraction_ok": rr.extraction_ok,
                        "verifier": rr.verifier, "detail": rr.detail})
        except (KeyError, TypeError, ValueError) as e:
            out.append({"reward": 0., "extraction_ok": False, "verifier": "none",
                        "detail": {"reason": "bad_record", "message": str(e)}})
    return out
