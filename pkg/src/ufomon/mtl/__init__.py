from .ast import Program
from .interp import AtSite, EventMask, ExitStatus, Interpreter, MTLRuntimeError, Signal, run
from .parser import parse_expression, parse_program
from .values import FAIL

__all__ = ["AtSite", "EventMask", "ExitStatus", "FAIL", "Interpreter", "MTLRuntimeError",
           "Program", "Signal", "parse_expression", "parse_program", "run"]
