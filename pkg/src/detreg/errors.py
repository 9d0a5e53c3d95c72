"""Exception hierarchy for detreg."""


class DetregError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(DetregError, ValueError):
    pass


class RankDeficientV(RankDeficient):
    pass


class RankDeficientVC(RankDeficient):
    pass


class SingularReducedSystem(DetregError, ValueError):
    pass


class SingularSystem(DetregError, ValueError):
    pass


class SingularSubsetSystem(SingularSystem):
    pass


class NotConditionallyPSD(DetregError, ValueError):
    def __init__(self, min_eigenvalue, tolerance):
        self.min_eigenvalue = float(min_eigenvalue)
        self.tolerance = float(tolerance)
        super().__init__(
            f"projected kernel has eigenvalue {self.min_eigenvalue:.3e} "
            f"below -{self.tolerance:.3e}"
        )


class NonPositiveBandwidth(DetregError, ValueError):
    pass


class RegularityTooLow(DetregError, ValueError):
    pass


class EmptyMask(DetregError, ValueError):
    pass


class IndexOutOfRange(DetregError, IndexError):
    pass


class TooFewPoints(DetregError, ValueError):
    pass


class TooLarge(DetregError, ValueError):
    pass


class TooLargeForEnumeration(TooLarge):
    pass


class InfeasibleSize(DetregError, ValueError):
    pass


class SubsetTooSmall(DetregError, ValueError):
    pass


class ZeroProjectedKernel(DetregError, ValueError):
    pass


class ZeroFullRisk(DetregError, ValueError):
    pass


class PcgNoConvergence(DetregError, RuntimeError):
    def __init__(self, iterations, residual):
        self.iterations = int(iterations)
        self.residual = float(residual)
        super().__init__(
            f"conjugate gradient stopped after {self.iterations} iterations "
            f"with relative residual {self.residual:.3e}"
        )


class CholeskyFailure(DetregError, ValueError):
    pass


class DimensionMismatch(DetregError, ValueError):
    pass


class ParseError(DetregError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class MissingTarget(DetregError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "target column missing"


class NonFiniteValue(ParseError):
    pass


class DegenerateFeature(DetregError, ValueError):
    pass


class ConfigError(DetregError, ValueError):
    """Invalid experiment configuration; ``fields`` maps field name to problem."""

    def __init__(self, fields):
        self.fields = dict(fields)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(self.fields.items()))
        super().__init__(f"invalid configuration ({detail})")
