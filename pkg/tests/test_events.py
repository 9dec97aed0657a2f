import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evtensor.errors import EmptyStreamError, EventParseError, GeometryError
from evtensor.events import (
    EventStream,
    bin_to_tensor,
    compute_bin_edges,
    parse_events,
    read_tensor_dump,
    tensor_density,
    write_events_csv,
    write_tensor_dump,
)

DAVIS = (346, 260)


def test_parse_two_events():
    stream = parse_events("t,i,j\n100,5,7\n200,5,8\n", DAVIS)
    assert len(stream) == 2
    assert stream.t_min == 100 and stream.t_max == 200
    np.testing.assert_array_equal(stream.j, [7, 8])
    assert not stream.has_labels


def test_parse_empty_source():
    with pytest.raises(EmptyStreamError):
        parse_events("", DAVIS)
    with pytest.raises(EmptyStreamError):
        parse_events("t,i,j\n", DAVIS)


def test_parse_out_of_geometry():
    with pytest.raises(GeometryError):
        parse_events("t,i,j\n100,400,7\n", DAVIS)


def test_parse_malformed_line_reports_line_number():
    with pytest.raises(EventParseError) as err:
        parse_events("t,i,j\n100,5,7\n200,x,8\n", DAVIS)
    assert err.value.line_no == 3


def test_parse_wrong_field_count():
    with pytest.raises(EventParseError):
        parse_events("t,i,j\n100,5\n", DAVIS)


def test_parse_unknown_column():
    with pytest.raises(EventParseError):
        parse_events("t,i,q\n100,5,7\n", DAVIS)


def test_parse_sorts_by_time():
    stream = parse_events("t,i,j\n300,1,1\n100,2,2\n200,3,3\n", DAVIS)
    np.testing.assert_array_equal(stream.t, [100, 200, 300])
    np.testing.assert_array_equal(stream.i, [2, 3, 1])


def test_parse_label_and_polarity_columns():
    stream = parse_events("t,i,j,label,polarity\n10,1,2,0,1\n20,3,4,-1,0\n", DAVIS)
    assert stream.has_labels
    np.testing.assert_array_equal(stream.labels, [0, -1])

    no_label = parse_events("t,i,j,polarity\n10,1,2,1\n20,3,4,0\n", DAVIS)
    assert not no_label.has_labels


def test_parse_duplicates_retained():
    stream = parse_events("t,i,j\n100,5,7\n100,5,7\n", DAVIS)
    assert len(stream) == 2


def test_csv_roundtrip():
    stream = parse_events("t,i,j,label\n100,5,7,0\n200,5,8,-1\n", DAVIS)
    buf = io.StringIO()
    write_events_csv(stream, buf)
    again = parse_events(buf.getvalue(), DAVIS)
    np.testing.assert_array_equal(again.t, stream.t)
    np.testing.assert_array_equal(again.labels, stream.labels)


def test_single_event_with_declared_range():
    stream = EventStream(i=[2], j=[3], t=[50], geometry=(5, 5), t_min=0, t_max=100)
    tensor = bin_to_tensor(stream, 2)
    expected = np.zeros((5, 5, 2), dtype=np.uint8)
    expected[2, 3, 1] = 1
    np.testing.assert_array_equal(tensor.data, expected)


def test_declared_range_must_cover_events():
    with pytest.raises(ValueError):
        EventStream(i=[2], j=[3], t=[50], geometry=(5, 5), t_min=60, t_max=100)


def test_binarization_same_pixel_same_bin():
    stream = EventStream(i=[1, 1], j=[1, 1], t=[10, 12], geometry=(3, 3),
                         t_min=0, t_max=100)
    tensor = bin_to_tensor(stream, 2)
    assert tensor.data[1, 1, 0] == 1
    assert tensor.data.sum() == 1


def test_t_max_lands_in_last_bin():
    stream = EventStream(i=[0, 0], j=[0, 0], t=[0, 100], geometry=(2, 2))
    tensor = bin_to_tensor(stream, 4)
    assert tensor.data[0, 0, 3] == 1


def test_bad_bin_count():
    stream = EventStream(i=[0], j=[0], t=[0], geometry=(2, 2), t_min=0, t_max=100)
    with pytest.raises(ValueError):
        bin_to_tensor(stream, 0)


def test_range_too_narrow_for_bins():
    stream = EventStream(i=[0, 1], j=[0, 0], t=[0, 3], geometry=(2, 2))
    with pytest.raises(ValueError):
        bin_to_tensor(stream, 10)


def test_empty_bins_allowed():
    # two distinct timestamps, plenty of range: most bins stay empty
    stream = EventStream(i=[0, 1], j=[0, 1], t=[0, 1000], geometry=(2, 2))
    tensor = bin_to_tensor(stream, 10)
    assert tensor.data.sum() == 2


def test_bin_edges_near_equal_widths():
    edges = compute_bin_edges(0, 103, 10)
    assert len(edges) == 11
    widths = np.diff(edges)
    assert widths.min() >= 1
    assert widths.max() - widths.min() <= 1
    assert edges[0] == 0 and edges[-1] == 103


def test_density():
    stream = EventStream(i=[0], j=[0], t=[0], geometry=(2, 2), t_min=0, t_max=10)
    tensor = bin_to_tensor(stream, 2)
    assert tensor_density(tensor) == pytest.approx(1 / 8)

    all_zero = tensor
    all_zero.data[:] = 0
    assert tensor_density(all_zero) == 0.0
    all_zero.data[:] = 1
    assert tensor_density(all_zero) == 1.0


def test_davis_scale_density():
    # 56205 unique activations on 346x260x100 comes out near 0.62%
    rng = np.random.default_rng(0)
    rows, cols, frames = 346, 260, 100
    n_active = 56205
    flat = rng.choice(rows * cols * frames, size=n_active, replace=False)
    i, rem = np.divmod(flat, cols * frames)
    j, n = np.divmod(rem, frames)
    t = n * 1000 + rng.integers(0, 1000, size=n_active)
    stream = EventStream(i=i, j=j, t=t, geometry=(rows, cols), t_min=0, t_max=frames * 1000)
    tensor = bin_to_tensor(stream, frames)
    assert tensor.data.sum() == n_active
    assert tensor_density(tensor) == pytest.approx(0.0062, abs=2e-4)


@given(st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_binarization_idempotent_and_order_invariant(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 40))
    i = rng.integers(0, 6, size=m)
    j = rng.integers(0, 5, size=m)
    t = rng.integers(0, 1000, size=m)
    base = EventStream(i=i, j=j, t=t, geometry=(6, 5), t_min=0, t_max=1000)
    dup = EventStream(i=np.r_[i, i], j=np.r_[j, j], t=np.r_[t, t],
                      geometry=(6, 5), t_min=0, t_max=1000)
    perm = rng.permutation(m)
    shuffled = EventStream(i=i[perm], j=j[perm], t=t[perm],
                           geometry=(6, 5), t_min=0, t_max=1000)
    a = bin_to_tensor(base, 8).data
    np.testing.assert_array_equal(a, bin_to_tensor(dup, 8).data)
    np.testing.assert_array_equal(a, bin_to_tensor(shuffled, 8).data)
    # conservation: ones never exceed the event count
    assert a.sum() <= m


def test_tensor_dump_roundtrip(tmp_path):
    stream = EventStream(i=[0, 1, 2], j=[0, 1, 0], t=[0, 50, 100], geometry=(3, 2))
    tensor = bin_to_tensor(stream, 4)
    path = str(tmp_path / "dump.txt")
    write_tensor_dump(tensor, path)
    with open(path) as fh:
        assert fh.readline().strip() == "3 2 4"
    np.testing.assert_array_equal(read_tensor_dump(path), tensor.data)


def test_tensor_dump_order_is_n_outer_i_middle_j_inner():
    data = np.zeros((2, 2, 2), dtype=np.uint8)
    data[1, 0, 0] = 1  # (i=1, j=0, n=0) -> position n*I*J + i*J + j = 2
    stream_buf = io.StringIO()
    edges = np.array([0, 1, 2])
    from evtensor.events import EventTensor

    write_tensor_dump(EventTensor(data=data, bin_edges=edges), stream_buf)
    body = stream_buf.getvalue().split("\n", 1)[1].split()
    assert [int(v) for v in body] == [0, 0, 1, 0, 0, 0, 0, 0]
