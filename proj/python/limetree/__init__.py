"""Surrogate tree explanations for probabilistic classifiers."""

from ._core import (
    BlackBox,
    Domain,
    LimetreeError,
    Tree,
    bench_fidelity,
    black_box,
    cosine_distance,
    counterfactual,
    enumerate_domain,
    explain,
    exponential_kernel,
    fit_complete,
    fit_limetree,
    fit_ridge,
    loss_limetree,
    relabel_leaves,
    render_tree,
    shortest_explanation,
    verify_fidelity,
    what_if,
)

__all__ = [
    "BlackBox",
    "Domain",
    "LimetreeError",
    "Tree",
    "bench_fidelity",
    "black_box",
    "cosine_distance",
    "counterfactual",
    "enumerate_domain",
    "explain",
    "exponential_kernel",
    "fit_complete",
    "fit_limetree",
    "fit_ridge",
    "loss_limetree",
    "relabel_leaves",
    "render_tree",
    "shortest_explanation",
    "verify_fidelity",
    "what_if",
]
