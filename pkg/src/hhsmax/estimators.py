"""scikit-learn style wrappers around the checks.

The inputs are graphs, structures and models rather than feature matrices,
so these estimators only borrow the get_params/set_params/fit conventions.
They do not go into sklearn pipelines or take part in cross-validation.
"""
from __future__ import annotations

from fractions import Fraction

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .boundary import BoundaryError, BoundaryProxy, classify_element, validate_proxy
from .hhs_core.axioms import check_all
from .hhs_core.structure import HhsStructure, StructureError
from .maximization import MaximizationResult, maximize
from .metric_graph import GraphError, MetricGraph, estimate_delta
from .models import Model, ModelError


# ---------------------------------------------------------------- validation helpers

def check_graph(g) -> MetricGraph:
    if not isinstance(g, MetricGraph):
        raise GraphError(f"expected a MetricGraph, got {type(g).__name__}")
    if g.n < 1:
        raise GraphError("graph has no vertices")
    return g


def check_structure(h) -> HhsStructure:
    if isinstance(h, Model):
        h = h.structure
    if not isinstance(h, HhsStructure):
        raise StructureError("type", f"expected an HhsStructure, got {type(h).__name__}")
    h.validate_relations()
    return h


def check_model(m) -> Model:
    if not isinstance(m, Model):
        raise ModelError(f"expected a Model, got {type(m).__name__}")
    return m


def check_ladder(models) -> list:
    models = [check_model(m) for m in models]
    if len({m.spec.family for m in models}) > 1:
        raise ModelError("ladder mixes families")
    return sorted(models, key=lambda m: m.spec.radius)


def check_proxy(h, p) -> BoundaryProxy:
    if not isinstance(p, BoundaryProxy):
        raise BoundaryError(f"expected a BoundaryProxy, got {type(p).__name__}")
    return validate_proxy(check_structure(h), p)


def check_is_fitted(est, attr: str):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted; call fit first")


# ---------------------------------------------------------------- estimators

class HyperbolicityEstimator(BaseEstimator):
    """fit(graph) -> delta_ (exact when exhaustive_ is True)."""

    def __init__(self, sample_budget: int = 200_000, seed: int = 0):
        self.sample_budget = sample_budget
        self.seed = seed

    def fit(self, g, y=None):
        est = estimate_delta(check_graph(g), self.sample_budget, self.seed)
        self.delta_ = est.delta
        self.exhaustive_ = est.exhaustive
        self.triples_ = est.triples
        self.witness_ = est.witness
        return self

    def predict(self, graphs):
        return [estimate_delta(check_graph(g), self.sample_budget, self.seed).delta for g in graphs]


class AxiomChecker(BaseEstimator):
    """fit(structure) runs the eleven axiom checks; predict gives one verdict per structure."""

    def __init__(self, budget: int = 200_000, seed: int = 0, skip=()):
        self.budget = budget
        self.seed = seed
        self.skip = skip

    def _run(self, h):
        return check_all(check_structure(h), self.budget, self.seed, tuple(self.skip))

    def fit(self, h, y=None):
        self.reports_ = self._run(h)
        self.passed_ = all(r.verdict != "fail" for r in self.reports_)
        return self

    def predict(self, structures):
        return [all(r.verdict != "fail" for r in self._run(h)) for h in structures]


class Maximizer(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    """fit(structure) maximizes; transform returns the T-structure.

    Output wrapping is off: the output is a structure, not an array.
    """

    def fit(self, h, y=None):
        self.result_: MaximizationResult = maximize(check_structure(h))
        self.T_ = list(self.result_.T)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "result_")
        if X is None:
            return self.result_.t_structure
        return maximize(check_structure(X)).t_structure


class BigSetClassifier(BaseEstimator):
    """fit(model) maximizes once; predict(words) labels each element."""

    def __init__(self, K: int = 4, D_big=None):
        self.K = K
        self.D_big = D_big

    def fit(self, model, y=None):
        self.model_ = check_model(model)
        self.result_ = maximize(self.model_.structure)
        return self

    def classify(self, words):
        check_is_fitted(self, "result_")
        D = None if self.D_big is None else Fraction(self.D_big)
        return [classify_element(self.model_, self.result_, w, self.K, D) for w in words]

    def predict(self, words):
        return [c.label for c in self.classify(words)]

    def big_sets(self, words):
        return [c.big_set for c in self.classify(words)]


__all__ = ["AxiomChecker", "BigSetClassifier", "HyperbolicityEstimator", "Maximizer", "check_graph",
           "check_is_fitted", "check_ladder", "check_model", "check_proxy", "check_structure"]
