"""Exception types shared across the toolkit."""


class EventParseError(ValueError):
    """A record in an event file could not be parsed. Carries the 1-based line number."""

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class GeometryError(ValueError):
    """An event coordinate lies outside the declared sensor geometry."""


class EmptyStreamError(ValueError):
    """A stream with zero events cannot be binned or processed."""


class ShapeError(ValueError):
    """Tensor/factor dimensions are inconsistent."""


class NumericalError(RuntimeError):
    """A linear solve produced or received non-finite values. Carries the iteration index."""

    def __init__(self, iteration, message):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


class ProtocolError(ValueError):
    """The evaluation protocol cannot proceed (empty split, single class, missing labels)."""


class ConsistencyError(ValueError):
    """Event coordinates do not match the factor/tensor dimensions they are paired with."""
