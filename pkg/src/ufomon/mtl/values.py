"""Runtime values shared by the target interpreter and the monitors."""

from __future__ import annotations

import itertools
from typing import Any


class _Fail:
    __slots__ = ()

    def __repr__(self) -> str:
        return "FAIL"

    def __bool__(self) -> bool:
        return False


FAIL: Any = _Fail()


class MList(list):
    """A target-program list: mutable, shared by reference, with a stable id."""

    __slots__ = ("lid",)
    _ids = itertools.count(1)

    def __init__(self, items=(), lid: int | None = None):
        super().__init__(items)
        self.lid = next(MList._ids) if lid is None else lid

    __hash__ = object.__hash__


def type_name(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, int):
        return "integer"
    if isinstance(v, float):
        return "real"
    if isinstance(v, str):
        return "string"
    if isinstance(v, list):
        return "list"
    if v is FAIL:
        return "fail"
    return type(v).__name__


def snapshot(v: Any) -> Any:
    """Detach a value from target-program storage (lists are copied)."""
    if isinstance(v, list):
        return [snapshot(x) for x in v]
    return v


def text_of(v: Any) -> str:
    """String conversion used by write(): null writes as the empty string."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return image(v)


def image(v: Any) -> str:
    if v is None:
        return "&null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ",".join(_elem_image(x) for x in v) + "]"
    if v is FAIL:
        return "fail"
    return str(v)


def _elem_image(v: Any) -> str:
    if isinstance(v, str):
        from .ast import quote
        return quote(v)
    return image(v)


def values_equal(a: Any, b: Any) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if type(a) is not type(b) and not (isinstance(a, list) and isinstance(b, list)):
        return False
    return a == b
