"""Exception hierarchy for contact_hybrid."""

from collections.abc import Mapping, Sequence


class ContactHybridError(Exception):
    """Base class for all errors raised by the engine and its tooling."""


class SingularBlockMatrixError(ContactHybridError):
    """Raised when [[M, Aᵀ], [A, 0]] cannot be inverted."""

    def __init__(self, smallest: float, largest: float, mode: str | None = None):
        self.smallest = smallest
        self.largest = largest
        self.mode = mode
        where = f" for mode {mode}" if mode else ""
        super().__init__(
            f"Constrained block matrix is singular{where}\n"
            f"\n"
            f"Smallest singular value {smallest:.3e} vs largest {largest:.3e}.\n"
            f"A massless coordinate is probably left unconstrained by the active contacts."
        )


class RankDeficientConstraintsError(ContactHybridError):
    """Raised when the active constraint rows are linearly dependent."""

    def __init__(self, rank: int, rows: int, mode: str | None = None):
        self.rank = rank
        self.rows = rows
        self.mode = mode
        where = f" in mode {mode}" if mode else ""
        super().__init__(f"Constraint matrix{where} has rank {rank} but {rows} rows")


class DegenerateExtensionError(ContactHybridError):
    """Raised when a rank-one extension adds a constraint the remaining inertia does not resist."""

    def __init__(self, schur: float, tolerance: float):
        self.schur = schur
        self.tolerance = tolerance
        super().__init__(
            f"Cannot extend block inverse: a_k M† a_kᵀ = {schur:.3e} <= {tolerance:.3e}\n"
            f"Rebuild the block inverse from the stacked constraints instead."
        )


class InternalInconsistencyError(ContactHybridError):
    """Raised when two computations that must agree do not."""


class DerivativeUnavailableError(ContactHybridError):
    """Raised when a derivative oracle cannot produce the requested order."""

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(
            f"Derivative of order {requested} requested but the oracle only provides "
            f"orders 0..{available}"
        )


class InconclusiveTrendError(ContactHybridError):
    """Raised when a short flow integration never leaves the tolerance band."""

    def __init__(self, horizon: float, tolerance: float):
        self.horizon = horizon
        self.tolerance = tolerance
        super().__init__(f"|h| stayed below {tolerance:.3e} over a flow horizon of {horizon:.3e}")


class DomainViolationError(ContactHybridError):
    """Raised when a state lies outside the domain of its contact mode."""

    def __init__(self, mode: str, residuals: Mapping[str, float]):
        self.mode = mode
        self.residuals = dict(residuals)
        details = "\n".join(f"  - {name}: {value:.3e}" for name, value in self.residuals.items())
        super().__init__(f"State is outside the domain of mode {mode}:\n{details}")


class NotApplicableError(ContactHybridError):
    """Raised when a check needs an invertible inertia and the system has none."""


class NoSolutionError(ContactHybridError):
    """Raised when no candidate mode satisfies a complementarity predicate."""

    def __init__(self, predicate: str, scope: Sequence[str], margins: Mapping[str, object]):
        self.predicate = predicate
        self.scope = list(scope)
        self.margins = dict(margins)
        table = "\n".join(f"  {name}: {value}" for name, value in self.margins.items())
        super().__init__(
            f"No contact mode satisfies {predicate} over scope {{{', '.join(self.scope)}}}\n"
            f"Margins per candidate:\n{table}"
        )


class MultipleSolutionsError(ContactHybridError):
    """Raised under strict uniqueness when several inequivalent modes satisfy a predicate."""

    def __init__(self, predicate: str, solutions: Sequence[str]):
        self.predicate = predicate
        self.solutions = list(solutions)
        super().__init__(
            f"{len(self.solutions)} contact modes satisfy {predicate}: {', '.join(self.solutions)}"
        )


class ProjectionRejectedError(ContactHybridError):
    """Raised when an extrapolated Zeno limit does not lie in the limit mode's domain."""

    def __init__(self, mode: str, reason: str):
        self.mode = mode
        self.reason = reason
        super().__init__(f"Zeno projection into mode {mode} rejected: {reason}")


class EventLocalizationError(ContactHybridError):
    """Raised when root bracketing cannot isolate an outlet crossing."""

    def __init__(self, name: str, t_low: float, t_high: float, reason: str):
        self.name = name
        self.t_low = t_low
        self.t_high = t_high
        super().__init__(
            f"Could not localize crossing of {name} in [{t_low:.12g}, {t_high:.12g}]: {reason}"
        )


class EventBudgetExhaustedError(ContactHybridError):
    """Raised when an execution records more events than ``max_events`` allows."""

    def __init__(self, budget: int, time: float):
        self.budget = budget
        self.time = time
        super().__init__(
            f"Event budget of {budget} exhausted at t={time:.12g} without a Zeno detection; "
            "raise max_events or tighten the Zeno settings"
        )


class ScenarioFileError(ContactHybridError):
    """Raised when a scenario file cannot be read or parsed."""

    def __init__(self, path: str, message: str, line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {message}")


class ScenarioValidationError(ContactHybridError):
    """Raised when a scenario fails schema or physical validation."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        message = f"Scenario validation failed with {len(errors)} error(s):\n"
        message += "\n".join(f"  - {e}" for e in errors)
        super().__init__(message)
