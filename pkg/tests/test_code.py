import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimq.code import (
    CodeFormatError,
    LayerConflictError,
    LayerPlan,
    ParityCheckMatrix,
    QcBaseMatrix,
    base_degree_distributions,
    degree_distributions,
    expand_qc,
    generator_matrix,
    layer_partition,
    parse_alist,
    parse_qc_table,
    serialize_alist,
    serialize_qc_table,
    validate_layer_plan,
)
from mimq.profiles import PROFILE_NAMES, get_profile

HAMMING = np.array([[1, 1, 0, 1, 1, 0, 0],
                    [1, 0, 1, 1, 0, 1, 0],
                    [0, 1, 1, 1, 0, 0, 1]])


@st.composite
def sparse_matrices(draw):
    m = draw(st.integers(2, 6))
    n = draw(st.integers(m + 1, 10))
    h = np.zeros((m, n), dtype=np.uint8)
    for c in range(n):
        rows = draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m, unique=True))
        h[rows, c] = 1
    for r in range(m):
        if not h[r].any():
            h[r, draw(st.integers(0, n - 1))] = 1
    return ParityCheckMatrix.from_dense(h)


@settings(max_examples=40, deadline=None)
@given(sparse_matrices())
def test_alist_round_trip(h):
    assert parse_alist(serialize_alist(h)) == h


def test_alist_accepts_zero_padding():
    text = "3 2\n2 2\n2 1 1\n2 2\n1 2\n1 0\n2 0\n1 2\n1 3\n"
    h = parse_alist(text)
    assert h.rows == ((0, 1), (0, 2))


@pytest.mark.parametrize("text,msg", [
    ("3 2\n2 2\n2 1 1\n2 2\n1 2\n1\n", "unexpected end"),
    ("3 2\n2 2\n2 1 1\n2 2\n1 2\n1\n2\n1 2\n1 4\n", "out of range"),
    ("3 2\n2 2\n2 1 1\n2 2\n1 2\n1\n1\n1 2\n1 3\n", "disagree"),
    ("x y\n", "non-integer"),
])
def test_alist_errors(text, msg):
    with pytest.raises(CodeFormatError, match=msg):
        parse_alist(text)


def test_qc_round_trip_and_expansion():
    base = QcBaseMatrix.from_array([[0, 1, -1], [2, -1, 0]], 3)
    assert parse_qc_table(serialize_qc_table(base)) == base
    h = expand_qc(base)
    assert (h.m, h.n, h.num_edges) == (6, 9, 12)
    # shift s: VN c*Z+k meets CN r*Z+(k+s)%Z
    assert 0 * 3 + (1 + 1) % 3 in h.cols[1 * 3 + 1]


def test_qc_shift_out_of_range():
    with pytest.raises(CodeFormatError, match="out of range"):
        parse_qc_table("1 2 4\n0 4\n")


def test_degree_distribution_of_hamming():
    dd = degree_distributions(ParityCheckMatrix.from_dense(HAMMING))
    assert dd.rho == {4: 1}
    assert float(dd.theta[1]) == pytest.approx(3 / 12)
    assert float(dd.theta[3]) == pytest.approx(3 / 12)
    assert dd.design_rate() == pytest.approx(4 / 7)


@pytest.mark.parametrize("name", [n for n in PROFILE_NAMES if n != "802.3ca"])
def test_profiles_consistent(name):
    p = get_profile(name)
    h = p.matrix()
    assert degree_distributions(h).rho == p.dd.rho
    assert degree_distributions(h).theta == p.dd.theta
    plan = p.layer_plan()
    assert plan.nb == p.nb
    validate_layer_plan(h, plan)


def test_80211n_rate_half_profile_shape():
    p = get_profile("802.11n-r12")
    h = p.matrix()
    assert (h.m, h.n) == (648, 1296)
    assert p.dd.dc_max == 8 and p.dd.dv_max == 11


def test_5g_profile_has_punctured_columns():
    p = get_profile("5g-n560")
    assert p.punctured == 56
    assert p.matrix().n - p.punctured == 560


def test_8023ca_is_profile_only():
    p = get_profile("802.3ca")
    assert p.dd.dc_max == 23
    with pytest.raises(ValueError, match="QC base matrix"):
        p.layer_plan()


def test_layer_conflict_detected():
    h = ParityCheckMatrix.from_dense(HAMMING)
    with pytest.raises(LayerConflictError):
        validate_layer_plan(h, LayerPlan((np.array([0, 1]), np.arange(2, 7))))
    with pytest.raises(LayerConflictError):
        validate_layer_plan(h, LayerPlan((np.arange(6),)))


def test_layer_partition_rejects_double_circulant_column():
    base = QcBaseMatrix.from_array([[0], [1]], 2)
    # two CN block rows are distinct, so a single column is fine
    layer_partition(base)
    h = ParityCheckMatrix.from_dense([[1, 1], [1, 1]])
    with pytest.raises(LayerConflictError):
        validate_layer_plan(h, LayerPlan((np.array([0, 1]),)))


@settings(max_examples=25, deadline=None)
@given(sparse_matrices())
def test_generator_spans_null_space(h):
    g = generator_matrix(h)
    d = h.to_dense().astype(int)
    assert not ((g.astype(int) @ d.T) % 2).any()
    rank = np.linalg.matrix_rank(d.astype(float))  # over the reals; GF(2) rank ≤ this
    assert g.shape[0] >= h.n - rank


def test_generator_of_hamming_gives_sixteen_codewords():
    g = generator_matrix(ParityCheckMatrix.from_dense(HAMMING))
    assert g.shape == (4, 7)
    words = {tuple((np.array(m) @ g) % 2) for m in np.ndindex(2, 2, 2, 2)}
    assert len(words) == 16


def test_base_degree_distribution_matches_lifted():
    base = QcBaseMatrix.from_array([[0, 1, -1, 2], [2, -1, 0, 1]], 3)
    assert base_degree_distributions(base).rho == degree_distributions(expand_qc(base)).rho
