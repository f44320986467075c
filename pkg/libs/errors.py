"""Exception hierarchy shared by every epistemia module."""


class EpistemiaError(Exception):
    """Base class for all errors raised by the library."""


# ---- Structures ----

class ValidationError(EpistemiaError, ValueError):
    """An input relation is not an equivalence relation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StrictnessViolation(ValidationError):
    """Strict input omitted a reflexive loop."""


class NotEquivalence(ValidationError):
    """Symmetric, reflexive input is not transitive."""


class DanglingWorldId(EpistemiaError, ValueError):
    def __init__(self, world, n_worlds):
        super().__init__(f"World id {world} outside 0..{n_worlds - 1}")
        self.world = world
        self.n_worlds = n_worlds


class EmptyStructure(EpistemiaError, ValueError):
    """Operation needs at least one world."""


class SignatureMismatch(EpistemiaError, ValueError):
    def __init__(self, left, right):
        super().__init__(f"Signatures differ: {left} vs {right}")
        self.left = left
        self.right = right


class StructureFormatError(EpistemiaError, ValueError):
    """A structure file does not follow the JSON format."""


# ---- Formulas ----

class FormulaSyntaxError(EpistemiaError, ValueError):
    def __init__(self, message, position=None, column=None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")
        self.position = position
        self.column = column


class UnknownAgent(EpistemiaError, ValueError):
    def __init__(self, name):
        super().__init__(f"Unknown agent {name!r}")
        self.name = name


class UnknownProp(EpistemiaError, ValueError):
    def __init__(self, name):
        super().__init__(f"Unknown proposition {name!r}")
        self.name = name


class UnboundVariable(EpistemiaError, ValueError):
    def __init__(self, var):
        super().__init__(f"Variable x{var} is not assigned")
        self.var = var


# ---- Coverings ----

class CoveringError(EpistemiaError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotSurjective(CoveringError):
    pass


class NotHomomorphism(CoveringError):
    pass


class NotBisimilar(CoveringError):
    pass


# ---- Cayley ----

class NotConnected(EpistemiaError, ValueError):
    """Construction needs a connected base structure."""


class GroupTooLarge(EpistemiaError, RuntimeError):
    def __init__(self, cap):
        super().__init__(f"Group enumeration exceeded {cap} elements")
        self.cap = cap


# ---- Acyclicity ----

class Not2Acyclic(EpistemiaError, ValueError):
    def __init__(self, message="Structure is not 2-acyclic", witness=None):
        super().__init__(message)
        self.witness = witness


class NotConnectedTuple(EpistemiaError, ValueError):
    """Worlds of the tuple lie in different connected components."""


class NoLeastElement(EpistemiaError, RuntimeError):
    """No least connecting coalition; only possible without 2-acyclicity."""


# ---- Hypergraphs ----

class PreconditionDistance(EpistemiaError, ValueError):
    def __init__(self, distance, m):
        super().__init__(f"Vertex lies at distance {distance}, need 1..{m}")
        self.distance = distance
        self.m = m


class PreconditionClosed(EpistemiaError, ValueError):
    """Vertex set is not closed under the required path length."""


class NotAcyclic(EpistemiaError, ValueError):
    def __init__(self, remainder):
        super().__init__(f"Hypergraph is not acyclic; {len(remainder)} hyperedges remain after reduction")
        self.remainder = remainder


# ---- Freeness ----

class MalformedPath(EpistemiaError, ValueError):
    """Coset path is not an alternating world/coalition list."""


class SameWorld(EpistemiaError, ValueError):
    """Distance between a world and itself is undefined."""


class FreenessError(EpistemiaError, RuntimeError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class HypothesisViolated(FreenessError):
    pass


class NoCandidate(FreenessError):
    pass


class PostconditionFailed(FreenessError):
    pass


class InsufficientAcyclicity(FreenessError):
    pass


# ---- Games ----

class NotConnectedTree(EpistemiaError, ValueError):
    """World-labelled skeleton is not a tree."""


class GameError(EpistemiaError, RuntimeError):
    pass


class InvariantBroken(GameError):
    def __init__(self, bullet, witness=None):
        super().__init__(f"Invariant broken: {bullet}")
        self.bullet = bullet
        self.witness = witness


class FreenessUnavailable(GameError):
    def __init__(self, cause):
        super().__init__(f"No free witness: {cause}")
        self.cause = cause


class GatesFailed(GameError):
    def __init__(self, failures):
        super().__init__("Gates failed: " + "; ".join(failures))
        self.failures = failures


# ---- Suite ----

class SpecParse(EpistemiaError, ValueError):
    """Corpus or suite spec cannot be parsed."""


class CorpusIoError(EpistemiaError, OSError):
    """Corpus files cannot be written or read."""
