"""scikit-learn style wrappers and validation helpers."""
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import model
from hhsmax.estimators import (AxiomChecker, BigSetClassifier, HyperbolicityEstimator, Maximizer, check_graph,
                               check_ladder, check_model, check_proxy, check_structure)
from hhsmax.boundary import BoundaryError, BoundaryProxy
from hhsmax.hhs_core import StructureError
from hhsmax.metric_graph import GraphError, MetricGraph
from hhsmax.models import ModelError


def test_params_and_clone():
    est = HyperbolicityEstimator(sample_budget=10, seed=3)
    assert est.get_params() == {"sample_budget": 10, "seed": 3}
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    assert BigSetClassifier().set_params(K=6).K == 6


def test_hyperbolicity_estimator():
    est = HyperbolicityEstimator().fit(MetricGraph(6, [(i, (i + 1) % 6) for i in range(6)]))
    assert est.delta_ == 1 and est.exhaustive_
    assert est.predict([model("free-F2", 3).graph]) == [0]


def test_axiom_checker(grid6):
    chk = AxiomChecker(budget=50_000).fit(grid6.structure)
    assert chk.passed_ and len(chk.reports_) == 11


def test_maximizer(grid6):
    m = Maximizer()
    with pytest.raises(NotFittedError):
        m.transform()
    m.fit(grid6)
    assert m.T_ == ["S", "V1", "V2"]
    assert m.transform().names == ("S", "V1", "V2")


def test_big_set_classifier():
    clf = BigSetClassifier(K=4)
    with pytest.raises(NotFittedError):
        clf.predict(["a"])
    clf.fit(model("grid-Z2", 8))
    assert clf.predict(["a", "ab"]) == ["reducible", "reducible"]
    assert clf.big_sets(["ab"]) == [["V1", "V2"]]


def test_validation_helpers(grid6):
    with pytest.raises(GraphError):
        check_graph("not a graph")
    with pytest.raises(StructureError):
        check_structure(42)
    assert check_structure(grid6) is grid6.structure
    with pytest.raises(ModelError):
        check_model(grid6.structure)
    with pytest.raises(ModelError, match="mixes"):
        check_ladder([model("grid-Z2", 4), model("free-F2", 4)])
    assert [m.spec.radius for m in check_ladder([model("grid-Z2", 6), model("grid-Z2", 4)])] == [4, 6]
    with pytest.raises(BoundaryError):
        check_proxy(grid6, "p")
    with pytest.raises(BoundaryError):
        check_proxy(grid6, BoundaryProxy.of({"V1": (0, 2)}))
