"""Tree-based symbolic regression, single-gene and multi-gene.

Expressions are nested tuples: ``("const", 3.0)``, ``("x", 0)`` or
``(op, child, ...)``.  All operators are protected so that every tree is a
total function: division by zero yields zero, roots and logs act on the
absolute value, and every intermediate result is clamped to ±1e12, which
rules out overflow and NaN propagation by construction.

Multi-gene models are least-squares-weighted sums of trees; the single-gene
mode is the same machinery capped at one gene, so a single-gene model still
carries a fitted scale and bias.  Fitness is the training-set mean absolute
error.  A Pareto archive over (node count, MAE) accumulates across the whole
run.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lti import ParameterError

log = logging.getLogger(__name__)

CLAMP = 1e12
_EXP_CAP = 700.0  # exp input bound; keeps exp finite before clamping

BINARY_OPS = ("add", "sub", "mul", "pdiv")
UNARY_OPS = ("psqrt", "sin", "cos", "tanh", "plog", "exp", "square")

_INFIX = {"add": "+", "sub": "-", "mul": "*"}


def _clamp(v: np.ndarray) -> np.ndarray:
    return np.clip(v, -CLAMP, CLAMP)


def _apply_op(op: str, args: list[np.ndarray]) -> np.ndarray:
    if op == "add":
        return _clamp(args[0] + args[1])
    if op == "sub":
        return _clamp(args[0] - args[1])
    if op == "mul":
        return _clamp(args[0] * args[1])
    if op == "pdiv":
        a, b = args
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(b == 0.0, 0.0, a / np.where(b == 0.0, 1.0, b))
        return _clamp(q)
    if op == "psqrt":
        return np.sqrt(np.abs(args[0]))
    if op == "plog":
        a = np.abs(args[0])
        with np.errstate(divide="ignore"):
            return np.where(a == 0.0, 0.0, np.log(np.where(a == 0.0, 1.0, a)))
    if op == "exp":
        return _clamp(np.exp(np.clip(args[0], -_EXP_CAP, _EXP_CAP)))
    if op == "square":
        return _clamp(args[0] * args[0])
    if op == "sin":
        return np.sin(args[0])
    if op == "cos":
        return np.cos(args[0])
    if op == "tanh":
        return np.tanh(args[0])
    raise ParameterError(f"unknown operator {op!r}")


@dataclass(frozen=True)
class FeatureVector:
    """Reduced-model quantities offered to the regression as terminals.

    The derived ratios are always recomputed from the base fields.
    """

    K: float
    tau_max: float
    tau_min: float
    L: float

    @property
    def ratio_tt(self) -> float:
        return self.tau_max / self.tau_min

    @property
    def ratio_Lmin(self) -> float:
        return self.L / self.tau_min

    @property
    def ratio_Lmax(self) -> float:
        return self.L / self.tau_max

    def to_array(self) -> np.ndarray:
        return np.array([
            self.K, self.tau_max, self.tau_min, self.L,
            self.ratio_tt, self.ratio_Lmin, self.ratio_Lmax,
        ])


N_FEATURES = 7


def feature_matrix(rows) -> np.ndarray:
    """Stack FeatureVector rows (or raw arrays) into a 2-D design input."""
    out = np.atleast_2d(np.array(
        [r.to_array() if isinstance(r, FeatureVector) else np.asarray(r, float) for r in rows]
    ))
    return out


def eval_rows(tree, X: np.ndarray) -> np.ndarray:
    """Evaluate a tree on every row of X; total by construction."""
    kind = tree[0]
    if kind == "const":
        return np.full(X.shape[0], float(tree[1]))
    if kind == "x":
        return X[:, tree[1]].astype(float, copy=True)
    args = [eval_rows(c, X) for c in tree[1:]]
    return _apply_op(kind, args)


def eval_tree(tree, x) -> float:
    """Single-point evaluation; accepts a FeatureVector or a flat array."""
    row = x.to_array() if isinstance(x, FeatureVector) else np.asarray(x, float)
    return float(eval_rows(tree, row.reshape(1, -1))[0])


def node_count(obj) -> int:
    """Total operator + terminal nodes; multi-gene sums its genes."""
    if isinstance(obj, MultiGeneModel):
        return sum(node_count(g) for g in obj.genes)
    if obj[0] in ("const", "x"):
        return 1
    return 1 + sum(node_count(c) for c in obj[1:])


def tree_depth(obj) -> int:
    if obj[0] in ("const", "x"):
        return 1
    return 1 + max(tree_depth(c) for c in obj[1:])


def _subtrees(tree, _prefix=()):
    """Preorder list of (path, subtree); path is a tuple of child indices."""
    out = [(_prefix, tree)]
    if tree[0] not in ("const", "x"):
        for i, c in enumerate(tree[1:]):
            out.extend(_subtrees(c, _prefix + (i,)))
    return out


def _replace(tree, path, new):
    if not path:
        return new
    i = path[0]
    kids = list(tree[1:])
    kids[i] = _replace(kids[i], path[1:], new)
    return (tree[0],) + tuple(kids)


def _random_terminal(rng, n_features: int, const_range):
    if rng.random() < 0.3:
        return ("const", float(rng.uniform(*const_range)))
    return ("x", int(rng.integers(n_features)))


def random_tree(rng, depth: int, method: str, n_features: int, const_range):
    """Grow or full construction to the given depth budget (>= 1)."""
    if depth <= 1:
        return _random_terminal(rng, n_features, const_range)
    if method == "grow" and rng.random() < 0.3:
        return _random_terminal(rng, n_features, const_range)
    ops = BINARY_OPS + UNARY_OPS
    op = ops[int(rng.integers(len(ops)))]
    arity = 2 if op in BINARY_OPS else 1
    kids = tuple(
        random_tree(rng, depth - 1, method, n_features, const_range)
        for _ in range(arity)
    )
    return (op,) + kids


def trim_to_depth(tree, max_depth: int, rng, n_features: int, const_range):
    """Replace every subtree that would exceed max_depth with a terminal."""
    if max_depth <= 1:
        if tree[0] in ("const", "x"):
            return tree
        return _random_terminal(rng, n_features, const_range)
    if tree[0] in ("const", "x"):
        return tree
    kids = tuple(
        trim_to_depth(c, max_depth - 1, rng, n_features, const_range)
        for c in tree[1:]
    )
    return (tree[0],) + kids


@dataclass(frozen=True)
class MultiGeneConfig:
    max_genes: int = 8
    p_highlevel_xover: float = 0.2
    p_lowlevel_xover: float = 0.8
    p_subtree_mutation: float = 0.9

    def __post_init__(self):
        if self.max_genes < 1:
            raise ParameterError("max_genes must be >= 1")
        if abs(self.p_highlevel_xover + self.p_lowlevel_xover - 1.0) > 1e-9:
            raise ParameterError("crossover level probabilities must sum to 1")
        if not 0.0 <= self.p_subtree_mutation <= 1.0:
            raise ParameterError("p_subtree_mutation must lie in [0, 1]")


@dataclass(frozen=True)
class GPConfig:
    pop_size: int = 500
    tournament_size: int = 3
    max_depth: int = 7
    p_crossover: float = 0.85
    p_mutation: float = 0.10
    p_reproduction: float = 0.05
    multigene: MultiGeneConfig = field(default_factory=MultiGeneConfig)
    constant_range: tuple[float, float] = (-10.0, 10.0)
    constant_jitter: float = 0.5
    generations: int = 100
    init_depths: tuple[int, ...] = (2, 3, 4)

    def __post_init__(self):
        if self.pop_size < 2:
            raise ParameterError("pop_size must be >= 2")
        if not 1 <= self.tournament_size <= self.pop_size:
            raise ParameterError("tournament_size must lie in [1, pop_size]")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        total = self.p_crossover + self.p_mutation + self.p_reproduction
        if abs(total - 1.0) > 1e-9:
            raise ParameterError("event probabilities must sum to 1")
        lo, hi = self.constant_range
        if not lo < hi:
            raise ParameterError("constant_range must satisfy lo < hi")
        if not all(d >= 1 for d in self.init_depths):
            raise ParameterError("init depths must be >= 1")


class GPMode(str, enum.Enum):
    SINGLE_GENE = "single_gene"
    MULTI_GENE = "multi_gene"


@dataclass(frozen=True)
class MultiGeneModel:
    """bias + sum(weight_i * gene_i(x)); the exported rule object."""

    genes: tuple
    weights: tuple[float, ...]
    bias: float

    def predict(self, X) -> np.ndarray:
        X = feature_matrix(X) if not isinstance(X, np.ndarray) else np.atleast_2d(X)
        acc = np.full(X.shape[0], self.bias)
        for w, g in zip(self.weights, self.genes):
            acc = acc + w * eval_rows(g, X)
        return acc

    def predict_one(self, x) -> float:
        row = x.to_array() if isinstance(x, FeatureVector) else np.asarray(x, float)
        return float(self.predict(row.reshape(1, -1))[0])


@dataclass(frozen=True)
class ParetoEntry:
    node_count: int
    mae: float
    model: MultiGeneModel


def tournament_select(pop: list, k: int, rng) -> int:
    """Index of the best-MAE individual among k picks without replacement."""
    picks = rng.choice(len(pop), size=min(k, len(pop)), replace=False)
    return int(min(picks, key=lambda i: pop[i].mae))


def subtree_crossover(a, b, rng, max_depth: int = 7,
                      n_features: int = N_FEATURES,
                      const_range=(-10.0, 10.0)):
    """Swap uniformly chosen subtrees; depth-trim the children."""
    sub_a = _subtrees(a)
    sub_b = _subtrees(b)
    path_a, cut_a = sub_a[int(rng.integers(len(sub_a)))]
    path_b, cut_b = sub_b[int(rng.integers(len(sub_b)))]
    child_a = _replace(a, path_a, cut_b)
    child_b = _replace(b, path_b, cut_a)
    child_a = trim_to_depth(child_a, max_depth, rng, n_features, const_range)
    child_b = trim_to_depth(child_b, max_depth, rng, n_features, const_range)
    return child_a, child_b


def subtree_mutate(a, rng, max_depth: int = 7,
                   n_features: int = N_FEATURES,
                   const_range=(-10.0, 10.0)):
    """Replace a uniformly chosen node with a freshly grown subtree."""
    subs = _subtrees(a)
    path, _ = subs[int(rng.integers(len(subs)))]
    budget = max_depth - len(path)
    method = "grow" if rng.random() < 0.5 else "full"
    depth = 1 if budget <= 1 else int(rng.integers(1, budget + 1))
    repl = random_tree(rng, depth, method, n_features, const_range)
    return _replace(a, path, repl)


def _jitter_constant(tree, rng, sigma: float):
    """Gaussian-perturb one random constant; None when there is none."""
    consts = [(p, s) for p, s in _subtrees(tree) if s[0] == "const"]
    if not consts:
        return None
    path, node = consts[int(rng.integers(len(consts)))]
    return _replace(tree, path, ("const", float(node[1] + rng.normal(0.0, sigma))))


def fit_gene_weights(genes, X, y) -> tuple[tuple[float, ...], float]:
    """Least-squares weights and bias for the gene outputs.

    Normal equations with a ridge fallback whenever the plain solve is
    singular or produces non-finite values.  The ridge is scaled to the Gram
    diagonal so it survives rounding even when clamped gene outputs push the
    Gram entries to ~1e24; a minimum-norm lstsq is the last resort.
    """
    X = feature_matrix(X) if not isinstance(X, np.ndarray) else np.atleast_2d(X)
    y = np.asarray(y, float)
    cols = [np.ones(X.shape[0])]
    cols.extend(eval_rows(g, X) for g in genes)
    design = np.column_stack(cols)
    if design.shape[0] < design.shape[1]:
        log.debug("underdetermined gene-weight fit: %d rows < %d columns",
                  design.shape[0], design.shape[1])
    gram = design.T @ design
    rhs = design.T @ y
    try:
        sol = np.linalg.solve(gram, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("non-finite solution")
        # guard against a numerically singular but non-raising solve
        if not np.allclose(gram @ sol, rhs, rtol=1e-5, atol=1e-6 * (1 + np.abs(rhs).max())):
            raise np.linalg.LinAlgError("inconsistent solution")
    except np.linalg.LinAlgError:
        ridge = 1e-8 * max(1.0, float(np.abs(np.diag(gram)).max()))
        try:
            sol = np.linalg.solve(gram + ridge * np.eye(gram.shape[0]), rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(design, y, rcond=None)
        sol = np.nan_to_num(sol, nan=0.0, posinf=0.0, neginf=0.0)
    return tuple(float(w) for w in sol[1:]), float(sol[0])


@dataclass
class _Individual:
    genes: tuple
    weights: tuple[float, ...] = ()
    bias: float = 0.0
    mae: float = math.inf

    def model(self) -> MultiGeneModel:
        return MultiGeneModel(self.genes, self.weights, self.bias)


def _evaluate(ind: _Individual, X: np.ndarray, y: np.ndarray) -> None:
    weights, bias = fit_gene_weights(ind.genes, X, y)
    pred = np.full(X.shape[0], bias)
    for w, g in zip(weights, ind.genes):
        pred = pred + w * eval_rows(g, X)
    mae = float(np.mean(np.abs(pred - y)))
    ind.weights = weights
    ind.bias = bias
    ind.mae = mae if math.isfinite(mae) else math.inf


def _stream(seed: int, gen: int, slot: int):
    return np.random.default_rng([seed, gen, slot])


class _Archive:
    """Non-dominated (node_count, mae) set; earlier discovery wins ties."""

    def __init__(self):
        self.entries: list[ParetoEntry] = []

    def offer(self, nodes: int, mae: float, model: MultiGeneModel) -> None:
        if not math.isfinite(mae):
            return
        for e in self.entries:
            if e.node_count <= nodes and e.mae <= mae:
                return  # dominated or duplicate; earlier entry wins
        self.entries = [
            e for e in self.entries
            if not (nodes <= e.node_count and mae <= e.mae)
        ]
        self.entries.append(ParetoEntry(nodes, mae, model))

    def sorted_entries(self) -> list[ParetoEntry]:
        return sorted(self.entries, key=lambda e: (e.node_count, e.mae))


def _initial_genes(rng, cfg: GPConfig, n_genes: int, n_features: int) -> tuple:
    genes = []
    for g in range(n_genes):
        depth = cfg.init_depths[int(rng.integers(len(cfg.init_depths)))]
        method = "full" if rng.random() < 0.5 else "grow"
        genes.append(random_tree(rng, depth, method, n_features, cfg.constant_range))
    return tuple(genes)


def _crossover(p1: _Individual, p2: _Individual, rng, cfg: GPConfig,
               max_genes: int, n_features: int) -> tuple:
    mg = cfg.multigene
    if max_genes > 1 and rng.random() < mg.p_highlevel_xover:
        # exchange a contiguous gene segment between the parents
        g1, g2 = list(p1.genes), list(p2.genes)
        i1, j1 = sorted(rng.integers(0, len(g1) + 1, size=2))
        i2, j2 = sorted(rng.integers(0, len(g2) + 1, size=2))
        child = g1[:i1] + g2[i2:j2] + g1[j1:]
        child = child[:max_genes]
        if not child:
            child = [g2[min(i2, len(g2) - 1)]]
        return tuple(child)
    gi1 = int(rng.integers(len(p1.genes)))
    gi2 = int(rng.integers(len(p2.genes)))
    ca, _ = subtree_crossover(
        p1.genes[gi1], p2.genes[gi2], rng, cfg.max_depth, n_features, cfg.constant_range
    )
    genes = list(p1.genes)
    genes[gi1] = ca
    return tuple(genes)


def _mutate(p: _Individual, rng, cfg: GPConfig, n_features: int) -> tuple:
    genes = list(p.genes)
    gi = int(rng.integers(len(genes)))
    if rng.random() < cfg.multigene.p_subtree_mutation:
        genes[gi] = subtree_mutate(
            genes[gi], rng, cfg.max_depth, n_features, cfg.constant_range
        )
    else:
        jittered = _jitter_constant(genes[gi], rng, cfg.constant_jitter)
        if jittered is None:
            genes[gi] = subtree_mutate(
                genes[gi], rng, cfg.max_depth, n_features, cfg.constant_range
            )
        else:
            genes[gi] = jittered
    return tuple(genes)


def run_gp(X, y, cfg: GPConfig | None = None,
           mode: GPMode = GPMode.MULTI_GENE,
           seed: int = 0) -> tuple[MultiGeneModel, list[ParetoEntry]]:
    """Evolve a regression model; returns (best model, Pareto archive).

    Deterministic per (X, y, cfg, mode, seed): every stochastic decision
    draws from a stream keyed by (seed, generation, slot).
    """
    cfg = cfg or GPConfig()
    mode = GPMode(mode)
    X = feature_matrix(X) if not isinstance(X, np.ndarray) else np.atleast_2d(X)
    y = np.asarray(y, float)
    if X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ParameterError("need at least 2 samples with matching X, y")
    n_features = X.shape[1]
    max_genes = 1 if mode is GPMode.SINGLE_GENE else cfg.multigene.max_genes

    pop: list[_Individual] = []
    for i in range(cfg.pop_size):
        rng = _stream(seed, 0, i)
        n_genes = 1 if max_genes == 1 else int(rng.integers(1, max_genes + 1))
        pop.append(_Individual(_initial_genes(rng, cfg, n_genes, n_features)))

    archive = _Archive()
    best: _Individual | None = None
    for ind in pop:
        _evaluate(ind, X, y)
        archive.offer(node_count(ind.model()), ind.mae, ind.model())
        if best is None or ind.mae < best.mae:
            best = ind

    for gen in range(1, cfg.generations + 1):
        children: list[_Individual] = [best]  # elitism: slot 0 keeps the best
        for slot in range(1, cfg.pop_size):
            rng = _stream(seed, gen, slot)
            u = rng.random()
            if u < cfg.p_crossover:
                p1 = pop[tournament_select(pop, cfg.tournament_size, rng)]
                p2 = pop[tournament_select(pop, cfg.tournament_size, rng)]
                genes = _crossover(p1, p2, rng, cfg, max_genes, n_features)
            elif u < cfg.p_crossover + cfg.p_mutation:
                p1 = pop[tournament_select(pop, cfg.tournament_size, rng)]
                genes = _mutate(p1, rng, cfg, n_features)
            else:
                p1 = pop[tournament_select(pop, cfg.tournament_size, rng)]
                genes = p1.genes
            children.append(_Individual(genes))
        for ind in children[1:]:
            _evaluate(ind, X, y)
            archive.offer(node_count(ind.model()), ind.mae, ind.model())
            if ind.mae < best.mae:
                best = ind
        pop = children

    return best.model(), archive.sorted_entries()


# --- text form and parser ----------------------------------------------------

def expr_to_text(obj) -> str:
    """Parenthesized infix; protected ops print as function calls.

    Multi-gene models print as the full linear combination, so the output
    of either form parses back through :func:`parse_expr`.
    """
    if isinstance(obj, MultiGeneModel):
        text = _fmt_const(obj.bias)
        for w, g in zip(obj.weights, obj.genes):
            text = f"({text} + ({_fmt_const(w)} * {expr_to_text(g)}))"
        return text
    kind = obj[0]
    if kind == "const":
        return _fmt_const(obj[1])
    if kind == "x":
        return f"x{obj[1] + 1}"
    if kind in _INFIX:
        return f"({expr_to_text(obj[1])} {_INFIX[kind]} {expr_to_text(obj[2])})"
    if kind == "pdiv":
        return f"pdiv({expr_to_text(obj[1])}, {expr_to_text(obj[2])})"
    return f"{kind}({expr_to_text(obj[1])})"


def _fmt_const(v: float) -> str:
    return repr(float(v))


class _Parser:
    """Recursive descent over the printed grammar plus infix ``/``.

    ``a / b`` parses to the protected division node, so transcribed rule
    text stays readable.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def parse(self):
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise ParameterError(f"trailing input at {self.pos}: {self.text[self.pos:]!r}")
        return node

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expr(self):
        node = self.term()
        while True:
            ch = self.peek()
            if ch == "+":
                self.pos += 1
                node = ("add", node, self.term())
            elif ch == "-":
                self.pos += 1
                node = ("sub", node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                node = ("mul", node, self.factor())
            elif ch == "/":
                self.pos += 1
                node = ("pdiv", node, self.factor())
            else:
                return node

    def factor(self):
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            inner = self.factor()
            if inner[0] == "const":
                return ("const", -inner[1])
            return ("sub", ("const", 0.0), inner)
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                raise ParameterError(f"expected ')' at {self.pos}")
            self.pos += 1
            return node
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch.isalpha():
            return self.name()
        raise ParameterError(f"unexpected character {ch!r} at {self.pos}")

    def number(self):
        self.skip_ws()
        start = self.pos
        seen_exp = False
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c.isdigit() or c == ".":
                self.pos += 1
            elif c in "eE" and not seen_exp:
                nxt = self.text[self.pos + 1:self.pos + 2]
                if nxt.isdigit() or nxt in "+-":
                    seen_exp = True
                    self.pos += 1
                    if nxt in "+-":
                        self.pos += 1
                else:
                    break
            else:
                break
        return ("const", float(self.text[start:self.pos]))

    def name(self):
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        word = self.text[start:self.pos]
        if word.startswith("x") and word[1:].isdigit():
            return ("x", int(word[1:]) - 1)
        if word in UNARY_OPS:
            if self.peek() != "(":
                raise ParameterError(f"{word} needs parentheses at {self.pos}")
            self.pos += 1
            node = (word, self.expr())
            if self.peek() != ")":
                raise ParameterError(f"expected ')' at {self.pos}")
            self.pos += 1
            return node
        if word == "pdiv":
            if self.peek() != "(":
                raise ParameterError(f"pdiv needs parentheses at {self.pos}")
            self.pos += 1
            a = self.expr()
            if self.peek() != ",":
                raise ParameterError(f"expected ',' at {self.pos}")
            self.pos += 1
            b = self.expr()
            if self.peek() != ")":
                raise ParameterError(f"expected ')' at {self.pos}")
            self.pos += 1
            return ("pdiv", a, b)
        raise ParameterError(f"unknown name {word!r} at {self.pos}")


def parse_expr(text: str):
    """Parse the grammar produced by :func:`expr_to_text`."""
    return _Parser(text).parse()
