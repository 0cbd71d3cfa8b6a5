"""Exception hierarchy.

Every error carries a machine-readable ``code``. Subclasses of
:class:`InputError` describe bad inputs (CLI exit code 2); subclasses of
:class:`SolverError` describe numerical failures on valid inputs (exit 1).
"""

from __future__ import annotations

from typing import Any


class FracMFEError(Exception):
    code = "error"


class InputError(FracMFEError, ValueError):
    code = "input_error"


class SolverError(FracMFEError, RuntimeError):
    """Numerical failure. ``best`` holds the best iterate or partial result."""

    code = "solver_error"

    def __init__(self, message: str, best: Any = None):
        super().__init__(message)
        self.best = best


# graph construction
class GraphError(InputError):
    code = "graph_error"

    def __init__(self, message: str, edge_index: int | None = None, vertex: int | None = None):
        super().__init__(message)
        self.edge_index = edge_index
        self.vertex = vertex


class TooFewVertices(GraphError):
    code = "too_few_vertices"


class IndexOutOfRange(GraphError):
    code = "index_out_of_range"


class NonPositiveMeasure(GraphError):
    code = "non_positive_measure"


class NonPositiveWeight(GraphError):
    code = "non_positive_weight"


class SelfLoop(GraphError):
    code = "self_loop"


class DuplicateEdge(GraphError):
    code = "duplicate_edge"


class Disconnected(GraphError):
    code = "disconnected"


# argument validation
class LengthMismatch(InputError):
    code = "length_mismatch"


class InvalidP(InputError):
    code = "invalid_p"


class InvalidExponent(InputError):
    code = "invalid_exponent"


class InvalidProblem(InputError):
    code = "invalid_problem"


class RequiresPositiveH(InputError):
    code = "requires_positive_h"


class NotOnConstraint(InputError):
    code = "not_on_constraint"


class NoPositivePart(InputError):
    code = "no_positive_part"


class NotMeanZero(InputError):
    code = "not_mean_zero"


class EnergyExceedsOne(InputError):
    code = "energy_exceeds_one"


class NotASolution(InputError):
    code = "not_a_solution"


class NotAZero(InputError):
    code = "not_a_zero"


class ConditionViolated(InputError):
    code = "condition_violated"


class ParseError(InputError):
    code = "parse_error"

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.reason = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


# numerical failures
class EigensolverFailure(SolverError):
    code = "eigensolver_failure"


class PositivityViolated(SolverError):
    code = "positivity_violated"


class DegenerateDenominator(SolverError):
    code = "degenerate_denominator"


class MaxIterations(SolverError):
    code = "max_iterations"


class LineSearchFailed(SolverError):
    code = "line_search_failed"


class NewtonStalled(SolverError):
    code = "newton_stalled"


class SingularJacobian(SolverError):
    code = "singular_jacobian"


class ContinuationFailed(SolverError):
    code = "continuation_failed"


class DenominatorVanished(SolverError):
    code = "denominator_vanished"


class StepUnderflow(SolverError):
    code = "step_underflow"


class HorizonReached(SolverError):
    code = "horizon_reached"


class NotConverged(SolverError):
    code = "not_converged"
