"""Extraction of structured gain proposals from free-form replies."""
from __future__ import annotations

import json
import math
from dataclasses import fields

from complab.controllers import AdaptivePidParams, CompensatorParams

SANITY_CAP = 1e3


class ParseFault(ValueError):
    """The reply holds no usable proposal. ``raw`` keeps the offending text."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


def _objects(text: str):
    """Every JSON object that decodes starting at some '{' in ``text``, in order."""
    decoder = json.JSONDecoder()
    i = text.find("{")
    while i != -1:
        try:
            obj, end = decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            i = text.find("{", i + 1)
            continue
        if isinstance(obj, dict):
            yield obj
        i = text.find("{", end)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_structured(raw: str, cls, cap: float = SANITY_CAP):
    """First object carrying every field of ``cls``; returns (params, rationale)."""
    if not isinstance(raw, str):
        raise ParseFault("reply is not text", str(raw))
    names = [f.name for f in fields(cls)]
    for obj in _objects(raw):
        if not all(k in obj for k in names):
            continue
        bad = [k for k in names if not _is_number(obj[k])]
        if bad:
            raise ParseFault(f"non-numeric fields: {bad}", raw)
        vals = [float(obj[k]) for k in names]
        if not all(math.isfinite(v) for v in vals):
            raise ParseFault("non-finite gain", raw)
        if any(abs(v) > cap for v in vals):
            raise ParseFault(f"gain magnitude beyond sanity cap {cap:g}", raw)
        rationale = obj.get("rationale", "")
        return cls(*vals), rationale if isinstance(rationale, str) else str(rationale)
    raise ParseFault(f"no object with fields {names}", raw)


def parse_proposal(raw_reply: str, cap: float = SANITY_CAP) -> CompensatorParams:
    """Compensator gain delta from a reply; tolerates prose and code fences around the object."""
    return parse_structured(raw_reply, CompensatorParams, cap)[0]


def parse_direct_proposal(raw_reply: str, cap: float = SANITY_CAP) -> AdaptivePidParams:
    return parse_structured(raw_reply, AdaptivePidParams, cap)[0]
