"""Exception hierarchy shared by all modules."""


class AttackError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(AttackError, ValueError):
    """A caller broke an operation's precondition."""


class ParseError(AttackError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LoadError(ParseError):
    """Malformed resource file (embeddings, LM, victim weights)."""


class TrainError(AttackError):
    pass


class WordNotFound(AttackError, KeyError):
    def __init__(self, word):
        self.word = word
        super().__init__(word)

    def __str__(self):
        return f"word not in vocabulary: {self.word!r}"


class NoReplaceablePositions(AttackError):
    pass


class EmptyCandidates(AttackError):
    pass


class VictimUnavailable(AttackError):
    """Remote victim could not be reached or answered garbage."""


class CampaignError(AttackError):
    pass
