import numpy as np

from strataflow.rng import KIND_GENERATE, KIND_SAMPLE, KIND_SRS, derive


class TestDerive:
    def test_same_coordinates_same_stream(self):
        a = derive(1, KIND_SAMPLE, 2, 3, 4).random(8)
        b = derive(1, KIND_SAMPLE, 2, 3, 4).random(8)
        assert np.array_equal(a, b)

    def test_any_coordinate_changes_stream(self):
        base = derive(1, KIND_SAMPLE, 2, 3, 4).random(4)
        variants = [
            derive(9, KIND_SAMPLE, 2, 3, 4),
            derive(1, KIND_SRS, 2, 3, 4),
            derive(1, KIND_SAMPLE, 7, 3, 4),
            derive(1, KIND_SAMPLE, 2, 8, 4),
            derive(1, KIND_SAMPLE, 2, 3, 5),
            derive(1, KIND_SAMPLE, 2, 3, 4, 0),
        ]
        for gen in variants:
            assert not np.array_equal(base, gen.random(4))

    def test_kind_constants_distinct(self):
        assert len({KIND_GENERATE, KIND_SAMPLE, KIND_SRS}) == 3
