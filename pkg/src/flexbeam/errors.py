"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid scenario, grid or experiment configuration."""


class SolverError(RuntimeError):
    """A numerical update failed (singular system, zero precoder, ...).

    ``iteration`` and ``step`` are filled in by the outer loops when known.
    """

    def __init__(self, message, iteration=None, step=None):
        self.iteration = iteration
        self.step = step
        where = []
        if iteration is not None:
            where.append(f"iteration {iteration}")
        if step is not None:
            where.append(step)
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
