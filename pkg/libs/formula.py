"""
ML[CK] formulas: AST, parser, printer, model checking, characteristic
formulae, and the first-order side used by the game oracles.
"""

import logging
from dataclasses import dataclass, fields
from functools import cached_property

import numpy as np
from lark import Lark, Token, Tree
from lark.exceptions import UnexpectedInput

from libs.errors import FormulaSyntaxError, UnboundVariable, UnknownAgent, UnknownProp
from libs.kripke import format_coalition

__all__ = [
    'Formula', 'Top', 'Bot', 'Prop', 'Not', 'And', 'Or', 'Box', 'Diamond',
    'FOFormula', 'FOTrue', 'FOFalse', 'Rel', 'Pred', 'Eq', 'FONot', 'FOAnd',
    'FOOr', 'Exists', 'Forall', 'FormulaTable', 'conjunction', 'disjunction',
    'parse', 'format_formula', 'modal_depth', 'satisfaction', 'model_check',
    'characteristic_formula', 'standard_translation', 'fo_eval',
    'quantifier_rank', 'free_vars', 'random_formula', 'random_fo_formula',
]


class _Node:
    """Structural equality with a cached hash; subclasses are frozen dataclasses."""

    def _values(self):
        return tuple(getattr(self, f.name) for f in fields(self))

    @cached_property
    def _hash(self):
        return hash((type(self).__name__,) + self._values())

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._values() == other._values()


class Formula(_Node):
    pass


@dataclass(frozen=True, eq=False)
class Top(Formula):
    pass


@dataclass(frozen=True, eq=False)
class Bot(Formula):
    pass


@dataclass(frozen=True, eq=False)
class Prop(Formula):
    index: int


@dataclass(frozen=True, eq=False)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True, eq=False)
class And(Formula):
    items: tuple


@dataclass(frozen=True, eq=False)
class Or(Formula):
    items: tuple


@dataclass(frozen=True, eq=False)
class Box(Formula):
    coalition: int
    sub: Formula


@dataclass(frozen=True, eq=False)
class Diamond(Formula):
    coalition: int
    sub: Formula


class FormulaTable:
    """Interns nodes so equal subformulas share one object."""

    def __init__(self):
        self._nodes = {}

    def __len__(self):
        return len(self._nodes)

    def intern(self, node):
        return self._nodes.setdefault(node, node)

    def make(self, cls, *args):
        return self.intern(cls(*args))


def conjunction(items, table=None):
    items = tuple(items)
    if not items:
        node = Top()
    elif len(items) == 1:
        return items[0]
    else:
        node = And(items)
    return table.intern(node) if table is not None else node


def disjunction(items, table=None):
    items = tuple(items)
    if not items:
        node = Bot()
    elif len(items) == 1:
        return items[0]
    else:
        node = Or(items)
    return table.intern(node) if table is not None else node


# ---- Parsing ----

GRAMMAR = r'''
?start: impl

?impl: disj
    | disj "->" impl -> implies

?disj: conj
    | disj "|" conj -> disjunction

?conj: unary
    | conj "&" unary -> conjunction

?unary: atom
    | "~" unary -> neg
    | "[" agent_list "]" unary -> box
    | "<" agent_list ">" unary -> diamond

agent_list: (NAME ("," NAME)*)?

?atom: "T" -> top
    | "F" -> bot
    | PROP -> prop
    | "(" impl ")" -> group

PROP: /p[0-9]+/
NAME: /[A-Za-z_][A-Za-z0-9_]*/

%import common.WS
%ignore WS
'''

_PARSER = Lark(GRAMMAR, parser='lalr')


def parse(text, agents, prop_names=None):
    """
    Parse formula text over the given agents.

    Props are written ``p<k>``; with ``prop_names`` they are looked up by
    name, otherwise ``p<k>`` denotes proposition k.

    Raises:
        FormulaSyntaxError: With the offending position.
        UnknownAgent, UnknownProp: For names outside the signature.
    """
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as e:
        raise FormulaSyntaxError(f"Cannot parse {text!r}", getattr(e, 'pos_in_stream', None),
                                 getattr(e, 'column', None)) from e
    return _translate(tree, tuple(agents), None if prop_names is None else tuple(prop_names))


def _translate(ast, agents, prop_names):
    """Translate from the Lark tree to Formula nodes."""
    if isinstance(ast, Token):
        raise FormulaSyntaxError(f"Unexpected token {ast!r}", ast.start_pos)

    kind = ast.data if isinstance(ast.data, str) else ast.data.value
    args = ast.children

    if kind == 'top':
        return Top()
    if kind == 'bot':
        return Bot()
    if kind == 'prop':
        name = str(args[0])
        if prop_names is None:
            return Prop(int(name[1:]))
        if name not in prop_names:
            raise UnknownProp(name)
        return Prop(prop_names.index(name))
    if kind == 'group':
        return _translate(args[0], agents, prop_names)
    if kind == 'neg':
        return Not(_translate(args[0], agents, prop_names))
    if kind in ('box', 'diamond'):
        mask = 0
        for name in args[0].children:
            if str(name) not in agents:
                raise UnknownAgent(str(name))
            mask |= 1 << agents.index(str(name))
        sub = _translate(args[1], agents, prop_names)
        return Box(mask, sub) if kind == 'box' else Diamond(mask, sub)
    if kind == 'implies':
        left = _translate(args[0], agents, prop_names)
        return Or((Not(left), _translate(args[1], agents, prop_names)))
    if kind in ('conjunction', 'disjunction'):
        items = []
        for child in _flatten(ast, kind):
            items.append(_translate(child, agents, prop_names))
        return And(tuple(items)) if kind == 'conjunction' else Or(tuple(items))
    raise FormulaSyntaxError(f"Unknown construct {kind}")


def _flatten(tree, kind):
    # a parenthesised group is a barrier
    for child in tree.children:
        if isinstance(child, Tree) and child.data == kind:
            yield from _flatten(child, kind)
        else:
            yield child


def format_formula(f, agents, prop_names=None):
    """Print in the parser's grammar."""
    def name_of(i):
        return prop_names[i] if prop_names is not None else f"p{i}"

    def wrap(g):
        text = show(g)
        return f"({text})" if isinstance(g, (And, Or)) else text

    def show(g):
        if isinstance(g, Top):
            return "T"
        if isinstance(g, Bot):
            return "F"
        if isinstance(g, Prop):
            return name_of(g.index)
        if isinstance(g, Not):
            return "~" + wrap(g.sub)
        if isinstance(g, And):
            return " & ".join(wrap(x) for x in g.items)
        if isinstance(g, Or):
            return " | ".join(wrap(x) for x in g.items)
        if isinstance(g, Box):
            return f"[{format_coalition(g.coalition, agents)}]" + wrap(g.sub)
        if isinstance(g, Diamond):
            return f"<{format_coalition(g.coalition, agents)}>" + wrap(g.sub)
        raise TypeError(f"Not a formula: {g!r}")

    return show(f)


def modal_depth(f, _memo=None):
    memo = {} if _memo is None else _memo
    if f in memo:
        return memo[f]
    if isinstance(f, (Top, Bot, Prop)):
        depth = 0
    elif isinstance(f, Not):
        depth = modal_depth(f.sub, memo)
    elif isinstance(f, (And, Or)):
        depth = max(modal_depth(x, memo) for x in f.items)
    else:
        depth = 1 + modal_depth(f.sub, memo)
    memo[f] = depth
    return depth


# ---- Semantics ----

def satisfaction(ck, f):
    """Truth value of f at every world, as a boolean vector."""
    memo = {}

    def sat(g):
        if g in memo:
            return memo[g]
        n = ck.n_worlds
        if isinstance(g, Top):
            s = np.ones(n, dtype=bool)
        elif isinstance(g, Bot):
            s = np.zeros(n, dtype=bool)
        elif isinstance(g, Prop):
            if g.index >= len(ck.prop_names):
                raise UnknownProp(f"p{g.index}")
            s = ck.valuation[g.index].copy()
        elif isinstance(g, Not):
            s = ~sat(g.sub)
        elif isinstance(g, And):
            s = np.ones(n, dtype=bool)
            for x in g.items:
                s &= sat(x)
        elif isinstance(g, Or):
            s = np.zeros(n, dtype=bool)
            for x in g.items:
                s |= sat(x)
        elif isinstance(g, (Box, Diamond)):
            if g.coalition > ck.full:
                raise UnknownAgent(f"coalition mask {g.coalition}")
            inner = sat(g.sub)
            b = ck.blocks[g.coalition]
            hits = np.zeros(ck.n_classes(g.coalition), dtype=bool)
            if isinstance(g, Box):
                hits[b[~inner]] = True
                s = ~hits[b]
            else:
                hits[b[inner]] = True
                s = hits[b]
        else:
            raise TypeError(f"Not a formula: {g!r}")
        memo[g] = s
        return s

    return sat(f)


def model_check(ck, w, f):
    return bool(satisfaction(ck, f)[w])


def characteristic_formula(ck, w, ell, table=None):
    """
    The depth-ell Hintikka formula of (ck, w).

    Built from the ∼^j types realised in ck (j < ell); one formula per
    (level, type), shared through the table.
    """
    from libs.bisim import refinement_levels

    table = table if table is not None else FormulaTable()
    levels = refinement_levels(ck, ell, mode="ck")
    reps = []
    for labels in levels:
        first = {}
        for x in range(ck.n_worlds):
            first.setdefault(int(labels[x]), x)
        reps.append(first)
    memo = {}

    def literals(x):
        lits = []
        for i in range(len(ck.prop_names)):
            p = table.make(Prop, i)
            lits.append(p if ck.valuation[i, x] else table.make(Not, p))
        return lits

    def chi(level, label):
        key = (level, label)
        if key in memo:
            return memo[key]
        x = reps[level][label]
        parts = literals(x)
        if level > 0:
            below = levels[level - 1]
            for alpha in range(1, ck.full + 1):
                members = ck.members(alpha, ck.block(alpha, x))
                types = sorted({int(below[y]) for y in members})
                subs = [chi(level - 1, t) for t in types]
                parts.extend(table.make(Diamond, alpha, s) for s in subs)
                parts.append(table.make(Box, alpha, disjunction(subs, table)))
        node = conjunction(parts, table)
        memo[key] = node
        return node

    result = chi(ell, int(levels[ell][w]))
    logging.debug(f"Characteristic formula depth {ell}: {len(table)} interned nodes.")
    return result


# ---- First-order side ----

class FOFormula(_Node):
    pass


@dataclass(frozen=True, eq=False)
class FOTrue(FOFormula):
    pass


@dataclass(frozen=True, eq=False)
class FOFalse(FOFormula):
    pass


@dataclass(frozen=True, eq=False)
class Rel(FOFormula):
    coalition: int
    x: int
    y: int


@dataclass(frozen=True, eq=False)
class Pred(FOFormula):
    index: int
    x: int


@dataclass(frozen=True, eq=False)
class Eq(FOFormula):
    x: int
    y: int


@dataclass(frozen=True, eq=False)
class FONot(FOFormula):
    sub: FOFormula


@dataclass(frozen=True, eq=False)
class FOAnd(FOFormula):
    items: tuple


@dataclass(frozen=True, eq=False)
class FOOr(FOFormula):
    items: tuple


@dataclass(frozen=True, eq=False)
class Exists(FOFormula):
    var: int
    body: FOFormula


@dataclass(frozen=True, eq=False)
class Forall(FOFormula):
    var: int
    body: FOFormula


def standard_translation(f, free_var=0):
    """FO formula in the single free variable ``free_var``; quantifier rank equals modal depth."""
    memo = {}

    def st(g, x):
        key = (g, x)
        if key in memo:
            return memo[key]
        if isinstance(g, Top):
            out = FOTrue()
        elif isinstance(g, Bot):
            out = FOFalse()
        elif isinstance(g, Prop):
            out = Pred(g.index, x)
        elif isinstance(g, Not):
            out = FONot(st(g.sub, x))
        elif isinstance(g, And):
            out = FOAnd(tuple(st(i, x) for i in g.items))
        elif isinstance(g, Or):
            out = FOOr(tuple(st(i, x) for i in g.items))
        elif isinstance(g, Box):
            y = x + 1
            out = Forall(y, FOOr((FONot(Rel(g.coalition, x, y)), st(g.sub, y))))
        elif isinstance(g, Diamond):
            y = x + 1
            out = Exists(y, FOAnd((Rel(g.coalition, x, y), st(g.sub, y))))
        else:
            raise TypeError(f"Not a formula: {g!r}")
        memo[key] = out
        return out

    return st(f, free_var)


def quantifier_rank(phi):
    if isinstance(phi, (Exists, Forall)):
        return 1 + quantifier_rank(phi.body)
    if isinstance(phi, FONot):
        return quantifier_rank(phi.sub)
    if isinstance(phi, (FOAnd, FOOr)):
        return max((quantifier_rank(x) for x in phi.items), default=0)
    return 0


def free_vars(phi):
    if isinstance(phi, Rel):
        return {phi.x, phi.y}
    if isinstance(phi, Pred):
        return {phi.x}
    if isinstance(phi, Eq):
        return {phi.x, phi.y}
    if isinstance(phi, FONot):
        return free_vars(phi.sub)
    if isinstance(phi, (FOAnd, FOOr)):
        out = set()
        for x in phi.items:
            out |= free_vars(x)
        return out
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body) - {phi.var}
    return set()


def fo_eval(ck, assignment, phi):
    """
    Tarskian truth; R_alpha is read off the coalition partitions.

    Raises:
        UnboundVariable: If a free variable is not assigned.
    """
    def value(var, env):
        if var not in env:
            raise UnboundVariable(var)
        return env[var]

    def ev(g, env):
        if isinstance(g, FOTrue):
            return True
        if isinstance(g, FOFalse):
            return False
        if isinstance(g, Rel):
            return bool(ck.same_class(g.coalition, value(g.x, env), value(g.y, env)))
        if isinstance(g, Pred):
            return bool(ck.valuation[g.index, value(g.x, env)])
        if isinstance(g, Eq):
            return value(g.x, env) == value(g.y, env)
        if isinstance(g, FONot):
            return not ev(g.sub, env)
        if isinstance(g, FOAnd):
            return all(ev(x, env) for x in g.items)
        if isinstance(g, FOOr):
            return any(ev(x, env) for x in g.items)
        if isinstance(g, Exists):
            return any(ev(g.body, {**env, g.var: w}) for w in range(ck.n_worlds))
        if isinstance(g, Forall):
            return all(ev(g.body, {**env, g.var: w}) for w in range(ck.n_worlds))
        raise TypeError(f"Not an FO formula: {g!r}")

    return ev(phi, dict(assignment))


# ---- Random generation ----

def random_formula(rng, n_agents, n_props, depth, size=4):
    """Random ML[CK] formula of modal depth at most ``depth``; ``size`` bounds connective nesting."""
    full = (1 << n_agents) - 1
    if size <= 0:
        return Prop(int(rng.integers(0, n_props))) if n_props else Top()
    roll = int(rng.integers(0, 6 if depth > 0 else 4))
    if roll == 0:
        return Prop(int(rng.integers(0, n_props))) if n_props else Top()
    if roll == 1:
        return Not(random_formula(rng, n_agents, n_props, depth, size - 1))
    if roll in (2, 3):
        items = tuple(random_formula(rng, n_agents, n_props, depth, size - 1) for _ in range(2))
        return And(items) if roll == 2 else Or(items)
    alpha = int(rng.integers(0, full + 1))
    sub = random_formula(rng, n_agents, n_props, depth - 1, size - 1)
    return Box(alpha, sub) if roll == 4 else Diamond(alpha, sub)


def random_fo_formula(rng, n_agents, n_props, rank, bound=(0,), size=4):
    """Random FO formula of quantifier rank at most ``rank`` whose free variables lie in ``bound``."""
    full = (1 << n_agents) - 1
    bound = tuple(bound)

    def pick():
        return bound[int(rng.integers(0, len(bound)))]

    roll = int(rng.integers(0, 3)) if size <= 0 else int(rng.integers(0, 7 if rank > 0 else 5))
    if roll == 0:
        return Pred(int(rng.integers(0, n_props)), pick()) if n_props else FOTrue()
    if roll == 1:
        return Rel(int(rng.integers(0, full + 1)), pick(), pick())
    if roll == 2:
        return Eq(pick(), pick())
    if roll == 3:
        return FONot(random_fo_formula(rng, n_agents, n_props, rank, bound, size - 1))
    if roll == 4:
        items = tuple(random_fo_formula(rng, n_agents, n_props, rank, bound, size - 1) for _ in range(2))
        return FOAnd(items) if rng.integers(0, 2) else FOOr(items)
    var = max(bound) + 1
    body = random_fo_formula(rng, n_agents, n_props, rank - 1, bound + (var,), size - 1)
    return Exists(var, body) if roll == 5 else Forall(var, body)
