import numpy as np
import pytest

from rulebench import DomainError, Tape, decode_rule, encode_rule, enumerate_orbit, step
from rulebench.ca import step_bits

from oracles import brute_decode, brute_orbit, brute_step, cells_from_string


def tape(text: str) -> Tape:
    return Tape.from_string(text)


class TestDecodeRule:
    def test_zero_rule_all_outputs_zero(self):
        assert decode_rule(0) == (0,) * 8

    def test_rule_110_table(self):
        # neighborhoods (111, 110, ..., 000) read high-to-low; table is indexed low-to-high
        assert tuple(reversed(decode_rule(110))) == (0, 1, 1, 0, 1, 1, 1, 0)

    def test_rule_204_is_center(self):
        table = decode_rule(204)
        for left in (0, 1):
            for center in (0, 1):
                for right in (0, 1):
                    assert table[4 * left + 2 * center + right] == center

    @pytest.mark.parametrize("bad", [-1, 256, 1000])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(DomainError):
            decode_rule(bad)

    def test_round_trip_all_rules(self):
        for rule in range(256):
            assert encode_rule(decode_rule(rule)) == rule

    def test_matches_brute_force(self):
        for rule in range(256):
            assert list(decode_rule(rule)) == brute_decode(rule)


class TestStep:
    def test_rule_zero_maps_everything_to_zeros(self):
        for text in ("000", "111", "01011", "11111111"):
            assert step(tape(text), 0) == Tape(0, len(text))

    def test_rule_204_is_identity_exhaustive(self):
        for length in range(3, 11):
            for bits in range(1 << length):
                assert step_bits(bits, length, 204) == bits

    def test_rule_51_is_complement_exhaustive(self):
        for length in range(3, 11):
            mask = (1 << length) - 1
            for bits in range(1 << length):
                assert step_bits(bits, length, 51) == bits ^ mask

    def test_rule_90_example(self):
        assert str(step(tape("00100"), 90)) == "01010"

    def test_length_preserved_and_deterministic(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            length = int(rng.integers(3, 12))
            t = Tape(int(rng.integers(0, 1 << length)), length)
            rule = int(rng.integers(0, 256))
            out = step(t, rule)
            assert out.length == length
            assert step(t, rule) == out

    def test_fixed_zero_boundary_matches_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            length = int(rng.integers(3, 10))
            cells = [int(b) for b in rng.integers(0, 2, size=length)]
            rule = int(rng.integers(0, 256))
            expected = brute_step(cells, rule, boundary="fixed_zero")
            assert list(step(Tape.from_cells(cells), rule, boundary="fixed_zero").cells) == expected

    def test_unknown_boundary_rejected(self):
        with pytest.raises(DomainError):
            step(tape("010"), 90, boundary="reflecting")

    def test_periodic_agrees_with_oracle_sampled(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            length = int(rng.integers(3, 10))
            cells = [int(b) for b in rng.integers(0, 2, size=length)]
            rule = int(rng.integers(0, 256))
            assert list(step(Tape.from_cells(cells), rule).cells) == brute_step(cells, rule)


class TestEnumerateOrbit:
    def test_zero_steps_is_singleton(self):
        t = tape("0110")
        assert enumerate_orbit(t, 110, 0) == [t]

    def test_rule_90_two_steps(self):
        orbit = enumerate_orbit(tape("00100"), 90, 2)
        assert [str(t) for t in orbit] == ["00100", "01010", "10001"]
        expected = brute_orbit(cells_from_string("00100"), 90, 2)
        assert [list(t.cells) for t in orbit] == expected

    def test_identity_rule_repeats_input(self):
        t = tape("1011101")
        assert enumerate_orbit(t, 204, 5) == [t] * 6

    def test_negative_steps_rejected(self):
        with pytest.raises(DomainError):
            enumerate_orbit(tape("010"), 90, -1)


class TestTape:
    def test_string_round_trip_and_cell_order(self):
        t = tape("00101")
        assert str(t) == "00101"
        assert t.cells == (0, 0, 1, 0, 1)
        assert t.cell(0) == 0 and t.cell(2) == 1

    def test_minimum_length_enforced(self):
        with pytest.raises(DomainError):
            Tape.from_string("01")
        with pytest.raises(DomainError):
            Tape(0, 2)

    def test_bits_range_enforced(self):
        with pytest.raises(DomainError):
            Tape(8, 3)
        with pytest.raises(DomainError):
            Tape(-1, 3)

    def test_invalid_characters_rejected(self):
        with pytest.raises(DomainError):
            Tape.from_string("01x")

    def test_with_flip(self):
        assert str(tape("000").with_flip(1)) == "010"
        with pytest.raises(DomainError):
            tape("000").with_flip(3)

    def test_hashable_value_semantics(self):
        assert tape("0101") == Tape(0b1010, 4)
        assert len({tape("0101"), Tape(0b1010, 4)}) == 1
