"""Exception hierarchy shared by every module."""


class EHFLError(Exception):
    """Base class for all package errors."""


class CausalityViolation(EHFLError):
    """A client was scheduled without an energy unit in its queue."""

    def __init__(self, clients, levels=None):
        self.clients = sorted(int(i) for i in clients)
        msg = f"clients {self.clients} participated with empty energy queues"
        if levels is not None:
            msg += f" (levels {[int(levels[i]) for i in self.clients]})"
        super().__init__(msg)


class InvalidStepsize(EHFLError):
    pass


class FeasibilityViolation(EHFLError):
    """Base stepsize outside the admissible interval of the convergence theorem."""

    def __init__(self, eta, max_eta, mode):
        self.eta = eta
        self.max_eta = max_eta
        self.mode = mode
        super().__init__(
            f"eta={eta!r} infeasible for {mode} mode; admissible range is (0, {max_eta!r}]"
        )


class InfeasibleEta(FeasibilityViolation):
    pass


class DegenerateDenominator(EHFLError):
    pass


class EmptyCohort(EHFLError):
    pass


class EmptyRound(EHFLError):
    pass


class NonFiniteModel(EHFLError):
    pass


class InvalidShape(EHFLError):
    pass


class ShapeMismatch(EHFLError):
    pass


class ConfigError(EHFLError):
    """Invalid experiment configuration; ``problems`` maps field -> message."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = {"config": problems}
        self.problems = dict(problems)
        lines = [f"{field}: {msg}" for field, msg in self.problems.items()]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
