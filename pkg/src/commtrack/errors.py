"""Exception types shared across the package."""


class CommtrackError(Exception):
    """Base class for all commtrack errors."""


class InputError(CommtrackError, ValueError):
    """Invalid user input or violated operation precondition.

    CLI maps this to exit code 2.
    """


class InternalInvariantError(CommtrackError, RuntimeError):
    """A bookkeeping invariant broke; indicates a bug, not bad input.

    CLI maps this to exit code 3.
    """
