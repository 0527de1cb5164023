"""Exception hierarchy shared by every module of the package."""


class CliqueBMAError(Exception):
    """Base class for all package errors."""


class InputError(CliqueBMAError, ValueError):
    """Malformed user input (files, matrices, flags)."""


class InputShapeError(InputError):
    pass


class InputValueError(InputError):
    pass


class SubsetError(InputError):
    pass


class PartitionError(InputError):
    pass


class LabelMismatchError(InputError):
    pass


class SpecError(InputError):
    pass


class PreprocessError(InputError):
    pass


class GuardError(CliqueBMAError, ValueError):
    """Requested size exceeds a hard computational guard."""


class ModelInvalidError(CliqueBMAError):
    """A clique model has no maximum likelihood estimates on the table."""


class NoValidModelError(CliqueBMAError):
    """No clique model with existing MLEs could be produced."""


class EmptyBagError(CliqueBMAError, ValueError):
    pass


class EmptyModelSpaceWarning(UserWarning):
    """Every variable was pruned as isolated; the search space is trivial."""
