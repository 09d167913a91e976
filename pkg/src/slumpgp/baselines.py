"""Comparison models: multiple linear regression, standard tree GP, LS-SVM.

All three consume the same Dataset type as the semantic engine. OLS and
tree GP work on raw features; the LS-SVM scales features to [0, 1] per
column internally because the RBF kernel is scale-sensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random

import numpy as np

from .dataset import Dataset, ScaleParams, scale_minmax
from .expr import ExprTree, GenMethod, eval_matrix, ramped_half_and_half, random_tree, tree_depth, tree_size
from .gsgp import (
    INIT_MAX_DEPTH,
    INIT_MIN_DEPTH,
    GenerationStats,
    Individual,
    RunResult,
    TreeOrigin,
    fitness,
)


class BaselineError(ValueError):
    """Invalid input or unsolvable system in a baseline model."""


# ---------------------------------------------------------------------------
# Multiple linear regression

@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) != 8:
            raise BaselineError(f"expected 8 coefficients, got {len(self.coefficients)}")
        for v in (self.intercept, *self.coefficients):
            if not math.isfinite(v):
                raise BaselineError(f"model parameters must be finite, got {v!r}")


RIDGE_JITTER = 1e-8


def ols_fit(train: Dataset) -> LinearModel:
    """Least-squares fit of slump ~ intercept + features.

    Solves the normal equations (XᵀX + λI)β = Xᵀy with λ = 1e-8 on the
    diagonal — the total-mass column is near-collinear with the rest, so a
    tiny ridge keeps the system well-posed. The solve goes through the
    equivalent augmented least-squares problem [X; √λ·I] for numerical
    stability; a plain dense solve of the normal matrix loses ~5 digits.
    """
    if not train.has_targets:
        raise BaselineError("training dataset must carry slump targets")
    n = len(train)
    if n <= 9:
        raise BaselineError(f"need more than 9 training rows, got {n}")
    design = np.hstack([np.ones((n, 1)), train.features])
    augmented = np.vstack([design, math.sqrt(RIDGE_JITTER) * np.eye(9)])
    rhs = np.concatenate([train.targets, np.zeros(9)])
    beta, _, rank, _ = np.linalg.lstsq(augmented, rhs, rcond=None)
    if rank < 9:
        raise BaselineError("design matrix is singular even after ridge jitter")
    return LinearModel(intercept=float(beta[0]), coefficients=tuple(float(c) for c in beta[1:]))


def ols_predict(m: LinearModel, x) -> float:
    """Affine forward pass on one 8-feature row."""
    x = np.asarray(x, dtype=float)
    if x.shape != (8,):
        raise BaselineError(f"expected an 8-feature row, got shape {x.shape}")
    return float(m.intercept + np.dot(np.asarray(m.coefficients), x))


# ---------------------------------------------------------------------------
# Standard tree GP

STGP_MUTATION_DEPTH = 4  # grow depth for replacement subtrees


@dataclass(frozen=True)
class StgpConfig:
    population_size: int = 500
    generations: int = 50
    max_depth: int = 17
    p_crossover: float = 0.9
    p_mutation: float = 0.1
    tournament_size: int = 4
    elitism: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 1:
            raise BaselineError(f"population_size must be >= 1, got {self.population_size}")
        if self.generations < 0:
            raise BaselineError(f"generations must be >= 0, got {self.generations}")
        if self.max_depth < 1:
            raise BaselineError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0.0 <= self.p_crossover <= 1.0 or not 0.0 <= self.p_mutation <= 1.0:
            raise BaselineError("operator probabilities must lie in [0, 1]")
        if self.p_crossover + self.p_mutation > 1.0:
            raise BaselineError("p_crossover + p_mutation must be <= 1")
        if self.tournament_size < 2:
            raise BaselineError(f"tournament_size must be >= 2, got {self.tournament_size}")
        if self.tournament_size > self.population_size:
            raise BaselineError("tournament_size cannot exceed population_size")
        if not 1 <= self.elitism <= self.population_size:
            raise BaselineError("elitism must be in 1..population_size")


def _node_at(t: ExprTree, idx: int) -> ExprTree:
    """Node at preorder position idx (root is 0)."""
    if idx == 0:
        return t
    pos = 1
    for c in t.children:
        sz = tree_size(c)
        if idx < pos + sz:
            return _node_at(c, idx - pos)
        pos += sz
    raise IndexError(idx)


def _replace_at(t: ExprTree, idx: int, sub: ExprTree) -> ExprTree:
    """Copy of t with the subtree at preorder position idx swapped for sub."""
    if idx == 0:
        return sub
    pos = 1
    children = list(t.children)
    for ci, c in enumerate(children):
        sz = tree_size(c)
        if idx < pos + sz:
            children[ci] = _replace_at(c, idx - pos, sub)
            return ExprTree(t.kind, t.index, t.value, tuple(children))
        pos += sz
    raise IndexError(idx)


@dataclass(eq=False)
class _Prog:
    tree: ExprTree
    train_sem: np.ndarray
    test_sem: np.ndarray
    fit: float


def stgp_run(cfg: StgpConfig, train: Dataset, test: Dataset) -> RunResult:
    """Koza-style tree GP with subtree crossover/mutation and a depth cap.

    Crossover picks one node uniformly in each parent and grafts the second
    parent's subtree into the first; mutation grafts a fresh grow tree at a
    uniform node. Offspring deeper than max_depth are rejected in favour of
    the first parent. Fitness is the same absolute-error sum the semantic
    engine uses; non-finite fitness is treated as worst-possible.
    """
    if not train.has_targets:
        raise BaselineError("training dataset must carry slump targets")
    rng = Random(cfg.rng_seed)
    targets = train.targets
    n_train, n_test = len(train), len(test)
    stacked = np.vstack([train.features, test.features])
    test_targets = test.targets

    def evaluate(tree: ExprTree) -> _Prog:
        with np.errstate(all="ignore"):
            sem = eval_matrix(tree, stacked)
        train_sem, test_sem = sem[:n_train], sem[n_train:]
        fit = fitness(train_sem, targets)
        if math.isnan(fit):
            fit = math.inf
        return _Prog(tree, train_sem, test_sem, fit)

    def best_indices(pop: list[_Prog], count: int) -> list[int]:
        return sorted(range(len(pop)), key=lambda i: (pop[i].fit, i))[:count]

    def select(pop: list[_Prog]) -> _Prog:
        entrants = rng.sample(range(len(pop)), cfg.tournament_size)
        return pop[min(entrants, key=lambda i: (pop[i].fit, i))]

    def capped(offspring: ExprTree, fallback: _Prog) -> _Prog:
        if tree_depth(offspring) > cfg.max_depth:
            return fallback
        return evaluate(offspring)

    init_hi = min(INIT_MAX_DEPTH, cfg.max_depth)
    init_lo = min(INIT_MIN_DEPTH, init_hi)
    pop = [evaluate(t) for t in ramped_half_and_half(rng, cfg.population_size, init_lo, init_hi)]

    def generation_stats(best: _Prog) -> GenerationStats:
        if test_targets is None:
            test_fit = math.nan
        else:
            test_fit = fitness(best.test_sem, test_targets)
        return GenerationStats(
            train_fitness=best.fit,
            test_fitness=test_fit,
            train_mean_error=best.fit / n_train,
            test_mean_error=test_fit / n_test,
        )

    best_ever = pop[best_indices(pop, 1)[0]]
    history = [generation_stats(best_ever)]

    for _ in range(cfg.generations):
        next_pop = [pop[i] for i in best_indices(pop, cfg.elitism)]
        while len(next_pop) < cfg.population_size:
            draw = rng.random()
            if draw < cfg.p_crossover:
                p1 = select(pop)
                p2 = select(pop)
                i1 = rng.randrange(tree_size(p1.tree))
                i2 = rng.randrange(tree_size(p2.tree))
                child = capped(_replace_at(p1.tree, i1, _node_at(p2.tree, i2)), p1)
            elif draw < cfg.p_crossover + cfg.p_mutation:
                p = select(pop)
                i = rng.randrange(tree_size(p.tree))
                graft = random_tree(rng, GenMethod("grow", STGP_MUTATION_DEPTH))
                child = capped(_replace_at(p.tree, i, graft), p)
            else:
                child = select(pop)
            next_pop.append(child)
        pop = next_pop
        gen_best = pop[best_indices(pop, 1)[0]]
        if gen_best.fit < best_ever.fit:
            best_ever = gen_best
        history.append(generation_stats(gen_best))

    best = Individual(
        train_semantics=best_ever.train_sem,
        test_semantics=best_ever.test_sem,
        train_fitness=best_ever.fit,
        ancestry=TreeOrigin(best_ever.tree),
    )
    return RunResult(history=tuple(history), best=best, predictions=best.test_semantics)


# ---------------------------------------------------------------------------
# Least-squares SVM

LSSVM_GAMMA = 100.0
LSSVM_SIGMA_SQ = 8.0


@dataclass(frozen=True)
class LssvmModel:
    """RBF-kernel LS-SVM: ŷ(x) = Σ_i α_i·K(x_i, x) + b on scaled features."""

    alphas: tuple[float, ...]
    bias: float
    gamma: float
    sigma_sq: float
    scale: ScaleParams
    train_features: np.ndarray  # scaled, one row per training sample

    def __post_init__(self):
        if len(self.alphas) != len(self.train_features):
            raise BaselineError("one support value per training row required")
        for v in (*self.alphas, self.bias):
            if not math.isfinite(v):
                raise BaselineError(f"model parameters must be finite, got {v!r}")


def _rbf_kernel(A: np.ndarray, B: np.ndarray, sigma_sq: float) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / sigma_sq)


def _solve_dual(K: np.ndarray, y: np.ndarray, gamma: float) -> tuple[float, np.ndarray]:
    n = len(y)
    A = np.zeros((n + 1, n + 1))
    A[0, 1:] = 1.0
    A[1:, 0] = 1.0
    A[1:, 1:] = K + np.eye(n) / gamma
    rhs = np.concatenate([[0.0], y])
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise BaselineError(f"LS-SVM system is singular: {exc}") from None
    return float(sol[0]), sol[1:]


def lssvm_fit(
    train: Dataset, gamma: float = LSSVM_GAMMA, sigma_sq: float = LSSVM_SIGMA_SQ
) -> LssvmModel:
    """Fit the LS-SVM dual system [[0, 1ᵀ], [1, K + I/γ]]·[b; α] = [0; y].

    K is the RBF kernel exp(−‖x_i−x_j‖²/σ²) over min-max-scaled features;
    the scaling parameters are fitted here and stored on the model.
    """
    if not train.has_targets:
        raise BaselineError("training dataset must carry slump targets")
    if not gamma > 0 or not sigma_sq > 0:
        raise BaselineError(f"gamma and sigma_sq must be > 0, got {gamma}, {sigma_sq}")
    _, _, params = scale_minmax(train)
    scaled = params.transform(train.features)
    K = _rbf_kernel(scaled, scaled, sigma_sq)
    bias, alphas = _solve_dual(K, train.targets, gamma)
    return LssvmModel(
        alphas=tuple(float(a) for a in alphas),
        bias=bias,
        gamma=gamma,
        sigma_sq=sigma_sq,
        scale=params,
        train_features=scaled,
    )


def lssvm_predict(m: LssvmModel, x) -> float:
    """Kernel expansion ŷ = Σ_i α_i·K(x_i, x) + b for one raw feature row."""
    x = np.asarray(x, dtype=float)
    if x.shape != (8,):
        raise BaselineError(f"expected an 8-feature row, got shape {x.shape}")
    scaled = m.scale.transform(x[None, :])
    k = _rbf_kernel(m.train_features, scaled, m.sigma_sq)[:, 0]
    return float(np.dot(np.asarray(m.alphas), k) + m.bias)


def linear_payload(m: LinearModel) -> dict:
    """JSON-able form of a linear model; floats survive round trips exactly."""
    return {"intercept": m.intercept, "coefficients": list(m.coefficients)}


def linear_from_payload(d: dict) -> LinearModel:
    try:
        return LinearModel(
            intercept=float(d["intercept"]),
            coefficients=tuple(float(c) for c in d["coefficients"]),
        )
    except (KeyError, TypeError) as exc:
        raise BaselineError(f"malformed linear model payload: {exc}") from None


def lssvm_payload(m: LssvmModel) -> dict:
    """JSON-able form of an LS-SVM model, scaling parameters included."""
    return {
        "alphas": list(m.alphas),
        "bias": m.bias,
        "gamma": m.gamma,
        "sigma_sq": m.sigma_sq,
        "scale": {
            "mins": list(m.scale.mins),
            "maxs": list(m.scale.maxs),
            "degenerate": list(m.scale.degenerate),
        },
        "train_features": [list(row) for row in m.train_features],
    }


def lssvm_from_payload(d: dict) -> LssvmModel:
    try:
        scale = ScaleParams(
            mins=tuple(float(v) for v in d["scale"]["mins"]),
            maxs=tuple(float(v) for v in d["scale"]["maxs"]),
            degenerate=tuple(bool(v) for v in d["scale"]["degenerate"]),
        )
        return LssvmModel(
            alphas=tuple(float(a) for a in d["alphas"]),
            bias=float(d["bias"]),
            gamma=float(d["gamma"]),
            sigma_sq=float(d["sigma_sq"]),
            scale=scale,
            train_features=np.array(d["train_features"], dtype=float).reshape(
                len(d["train_features"]), -1
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BaselineError(f"malformed LS-SVM model payload: {exc}") from None


LSSVM_GAMMA_GRID = (1.0, 10.0, 100.0, 1000.0)
LSSVM_SIGMA_SQ_GRID = (1.0, 8.0, 64.0)


def lssvm_grid_search(
    train: Dataset,
    gammas: tuple[float, ...] = LSSVM_GAMMA_GRID,
    sigma_sqs: tuple[float, ...] = LSSVM_SIGMA_SQ_GRID,
) -> tuple[float, float, float]:
    """Pick (γ, σ²) by naive leave-one-out mean absolute error.

    Features are scaled once on the full training set; each fold refits the
    dual system on the remaining rows. Returns (gamma, sigma_sq, loo_error)
    of the strict minimum, first grid cell winning ties.
    """
    if not train.has_targets:
        raise BaselineError("training dataset must carry slump targets")
    n = len(train)
    if n < 2:
        raise BaselineError("leave-one-out needs at least 2 training rows")
    _, _, params = scale_minmax(train)
    scaled = params.transform(train.features)
    y = train.targets
    best: tuple[float, float, float] | None = None
    for gamma in gammas:
        for sigma_sq in sigma_sqs:
            K = _rbf_kernel(scaled, scaled, sigma_sq)
            total = 0.0
            for held in range(n):
                keep = [i for i in range(n) if i != held]
                bias, alphas = _solve_dual(K[np.ix_(keep, keep)], y[keep], gamma)
                pred = float(np.dot(alphas, K[keep, held]) + bias)
                total += abs(pred - y[held])
            loo = total / n
            if best is None or loo < best[2]:
                best = (gamma, sigma_sq, loo)
    return best
