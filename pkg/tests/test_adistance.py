import numpy as np
import pytest

from navgap.analysis import (LinearDomainClassifier, a_distance, classifier_err, fit_domain_classifier)
from navgap.analysis.adistance import ClassifierConfig, DomainSamples

from oracles import grid_search_separator_error


def test_identical_sets_error_near_half():
    u = np.random.default_rng(0).normal(size=(500, 3))
    clf = fit_domain_classifier(u, u)
    assert abs(classifier_err(clf, u, u) - 0.5) <= 0.05


def test_1d_separable():
    s, t = np.full((20, 1), -2.0), np.full((20, 1), 2.0)
    clf = fit_domain_classifier(s, t)
    assert clf.w[0] < 0
    assert classifier_err(clf, s, t) == 0.0


def test_classifier_err_closed_cases():
    s = np.array([[-1.0], [-2.0]])
    t = np.array([[1.0], [2.0]])
    always = LinearDomainClassifier(np.zeros(1), 1.0)
    assert classifier_err(always, s, t) == 0.5
    perfect = LinearDomainClassifier(np.array([-1.0]), 0.0)
    assert classifier_err(perfect, s, t) == 0.0
    assert classifier_err(perfect.flipped(), s, t) == 1.0


def test_flipped_separator_gives_full_distance():
    s = np.random.default_rng(0).normal(-5, 0.1, size=(50, 2))
    t = np.random.default_rng(1).normal(5, 0.1, size=(50, 2))
    assert a_distance(s, t).d_a == 2.0


def test_identical_domains_small_distance():
    rng = np.random.default_rng(3)
    u = rng.normal(size=(2000, 5))
    r = a_distance(u[:1000], u[1000:])
    assert abs(r.d_a) <= 0.1 and r.m_prime == 1000


def test_gaussian_fixture_against_grid_oracle():
    rng = np.random.default_rng(7)
    s = rng.normal(size=(2000, 2)) + [-1.0, 0.0]
    t = rng.normal(size=(2000, 2)) + [1.0, 0.0]
    clf = fit_domain_classifier(s, t)
    err = classifier_err(clf, s, t)
    xs = np.vstack([s, t])
    ys = np.concatenate([np.ones(2000), np.zeros(2000)])
    assert abs(err - grid_search_separator_error(xs, ys)) <= 0.03


def test_scale_invariance():
    rng = np.random.default_rng(2)
    s = rng.uniform(0, 1, size=(400, 6))
    t = rng.uniform(0, 1, size=(400, 6)) + [0.2, 0, 0, 0, 0, 0]
    a, b = a_distance(s, t).d_a, a_distance(255 * s, 255 * t).d_a
    assert abs(a - b) < 0.05


def test_constant_features_dropped():
    rng = np.random.default_rng(4)
    s = np.hstack([rng.normal(size=(100, 2)), np.ones((100, 1))])
    t = np.hstack([rng.normal(size=(100, 2)), np.ones((100, 1))])
    r = a_distance(s, t)
    assert r.kept_dims == 2 and r.dims == 3 and r.classifier.w[2] == 0.0


def test_unequal_sizes_are_trimmed_and_reported():
    rng = np.random.default_rng(5)
    r = a_distance(rng.normal(size=(120, 2)), rng.normal(size=(100, 2)))
    assert r.trimmed == {"source": {"from": 120, "to": 100}} and r.m_prime == 100


def test_holdout_mode():
    rng = np.random.default_rng(6)
    u = rng.normal(size=(800, 4))
    r = a_distance(u[:400], u[400:], holdout=True)
    assert r.mode == "holdout" and abs(r.d_a) <= 0.3


def test_input_validation():
    with pytest.raises(ValueError):
        DomainSamples(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        a_distance(np.zeros((5, 2)), np.zeros((5, 3)))
    with pytest.raises(ValueError):
        LinearDomainClassifier(np.array([np.nan]), 0.0)


def test_deterministic():
    rng = np.random.default_rng(8)
    s, t = rng.normal(size=(300, 3)), rng.normal(0.3, size=(300, 3))
    cfg = ClassifierConfig(epochs=100)
    assert a_distance(s, t, cfg).to_dict() == a_distance(s, t, cfg).to_dict()
