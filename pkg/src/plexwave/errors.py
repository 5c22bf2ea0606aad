"""Exception types shared across the package."""


class PlexwaveError(Exception):
    """Base class for all library errors."""


class LoadError(PlexwaveError):
    """A cohort manifest or matrix file could not be ingested."""


class ConfigError(PlexwaveError):
    """A run configuration value or config-file entry is invalid."""


class SimplexBudgetError(PlexwaveError):
    """Clique enumeration exceeded the simplex budget at some order."""

    def __init__(self, order: int, count: int, budget: int):
        self.order = order
        self.count = count
        self.budget = budget
        super().__init__(
            f"simplex budget exceeded at order {order}: "
            f"more than {budget} simplices (reached {count}); "
            f"lower the VR threshold or the max order"
        )


class TrainingDiverged(PlexwaveError):
    """The training loss became non-finite."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
