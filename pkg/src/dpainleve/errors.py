"""Exception hierarchy shared by all modules."""


class AlgebraError(Exception):
    """Base class for exact-arithmetic failures."""


class ZeroDenominator(AlgebraError):
    pass


class DivisionByZero(AlgebraError):
    pass


class VariableAbsent(AlgebraError):
    pass


class IndeterminateForm(AlgebraError):
    """A 0/0 was met; the caller should escalate to a perturbation series."""


class PrecisionExhausted(AlgebraError):
    """A series result fell outside the truncation window."""


class JetPrecisionLost(AlgebraError):
    """A jet computation consumed every guard term; retry at a higher
    jet order."""


class NonLaurentBranch(AlgebraError):
    """A step would require fractional exponents; not supported."""


class DegenerateHomography(AlgebraError):
    pass


class NotTrihomographic(AlgebraError):
    """The three-point equation admits no product-of-three-homographies form."""


class NotQuadratic(AlgebraError):
    """A root-swap leg degenerates to degree <= 1."""


class NotBiquadratic(AlgebraError):
    pass


class EliminationDegenerate(AlgebraError):
    pass


class MultistepImpossible(AlgebraError):
    pass


class NonlinearConstraint(AlgebraError):
    """A confinement condition is not linear (or log-linear) in the symbols."""

    def __init__(self, message, obstruction=None):
        super().__init__(message)
        self.obstruction = obstruction


class ConfinementLost(AlgebraError):
    """No choice of coefficient values keeps the pattern confined."""


class NonUnityRoots(AlgebraError):
    """A characteristic root lies off the unit circle."""


class UndecidedAtHorizon(AlgebraError):
    """The orbit neither confines nor cycles within the step budget."""


class ResourceBudgetExceeded(AlgebraError):
    pass


class PositiveEntropySuspected(ResourceBudgetExceeded):
    """Degree blow-up during iteration; evidence of non-integrability."""


class BudgetExhausted(AlgebraError):
    pass


class UnknownLabel(KeyError):
    pass


class DslError(Exception):
    """Base class for equation-definition parsing failures."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(message + where)
        self.line = line
        self.column = column


class DslSyntaxError(DslError):
    pass


class UnknownSymbol(DslError):
    pass


class NonBirationalRule(DslError):
    pass
