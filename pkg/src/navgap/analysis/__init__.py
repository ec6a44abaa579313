"""Evaluation metrics and the domain-gap analysis tools."""
from .adistance import (ADistanceResult, DomainSamples, LinearDomainClassifier, a_distance,
                        classifier_err, fit_domain_classifier)
from .bound import BoundInputs, BoundTerms, generalization_bound, bound_terms
from .entropy import EntropyReport, NotMarkovError, markov_chain_report
from .metrics import TrialRecord, compounding_cost, empirical_error, spl, success_rate

__all__ = [
    "ADistanceResult", "DomainSamples", "LinearDomainClassifier", "a_distance", "classifier_err",
    "fit_domain_classifier", "BoundInputs", "BoundTerms", "generalization_bound", "bound_terms",
    "EntropyReport", "NotMarkovError", "markov_chain_report", "TrialRecord", "compounding_cost",
    "empirical_error", "spl", "success_rate",
]
