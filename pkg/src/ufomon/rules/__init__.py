"""The rule language: parser, printer, static checks, desugaring, evaluation."""

from .ast import AssertionRule, RuleSet, ShowRule, WithinGroup
from .checker import Diagnostic, check_types
from .desugar import desugar
from .evaluate import MonitorError, evaluate, truthy
from .parser import parse_rules
from .printer import format_rules

__all__ = ["AssertionRule", "Diagnostic", "MonitorError", "RuleSet", "ShowRule", "WithinGroup",
           "check_types", "desugar", "evaluate", "format_rules", "parse_rules", "truthy"]
