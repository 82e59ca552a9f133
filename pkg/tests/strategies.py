"""Hypothesis strategies shared by the property tests"""

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from treechain.acceptance import (
    random_aud_kernel,
    random_prefix_set,
    random_spectral_matrix,
    random_step_weights,
    random_tree,
)
from treechain.kernel import ExplicitKernel
from treechain.stream import UniformStream
from treechain.tree import FiniteTree

acceptance = settings(
    max_examples=500,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def small_trees(draw, max_nodes: int = 12) -> FiniteTree:
    return random_tree(UniformStream(draw(seeds)), max_nodes)


@st.composite
def small_kernels(draw, max_nodes: int = 12) -> ExplicitKernel:
    stream = UniformStream(draw(seeds))

    return random_aud_kernel(random_tree(stream, max_nodes), stream)


@st.composite
def kernels_with_prefix_sets(draw, max_nodes: int = 12):
    stream = UniformStream(draw(seeds))
    kernel = random_aud_kernel(random_tree(stream, max_nodes), stream)

    return kernel, random_prefix_set(kernel.tree, stream)


@st.composite
def step_weights(draw):
    return random_step_weights(UniformStream(draw(seeds)))


@st.composite
def spectral_matrices(draw, max_size: int = 5):
    return random_spectral_matrix(UniformStream(draw(seeds)), max_size)


rationals = st.fractions(min_value=0, max_value=1, max_denominator=50)
