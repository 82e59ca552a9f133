from treechain.stream import UniformStream, spawn_streams


def test_uniforms_are_seeded():
    first = UniformStream(12, block=4)
    second = UniformStream(12, block=4)
    values = [first.uniform() for _ in range(10)]

    assert values == [second.uniform() for _ in range(10)]
    assert all(0 <= value < 1 for value in values)
    assert first.seed == 12


def test_block_size_does_not_change_the_stream():
    small = UniformStream(5, block=3)
    large = UniformStream(5, block=1000)

    assert [small.uniform() for _ in range(20)] == [large.uniform() for _ in range(20)]


def test_spawned_streams_differ():
    children = spawn_streams(7, 3)
    draws = [child.uniform() for child in children]

    assert len(set(draws)) == 3
    assert [child.uniform() for child in spawn_streams(7, 3)] == draws


def test_choice_and_integers():
    stream = UniformStream(1)

    assert stream.choice([0, 1, 0]) == 1
    assert all(0 <= stream.integers(4) < 4 for _ in range(50))
