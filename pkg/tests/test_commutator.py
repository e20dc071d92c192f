import random

import numpy as np
import pytest

from sl2lab.commutator import (
    CongruenceBox,
    amplify,
    amplify_exhaustive_check,
    box_lift_codes,
    commutator_congruence,
    commutator_sweep,
    connecting_map,
    bracket_span_cover,
    solve_mod_prime_power,
    solve_mod_q,
)
from sl2lab.factored import ONE, FactoredModulus
from sl2lab.growth import GroupSet
from sl2lab.sl2 import LieVector, SL2Residue, identity, inverse, mul


def test_commutator_congruence_example():
    # frozen oracle: both sides equal [[26,0],[0,101]] mod 125
    q = FactoredModulus.of(125)
    x = SL2Residue(q, 1, 5, 0, 1)
    y = SL2Residue(q, 1, 0, 5, 1)
    lhs, rhs, ok = commutator_congruence(x, y, 5, 1, 1)
    assert ok
    assert lhs.entries == (26, 0, 0, 101)
    assert rhs == (26, 0, 0, 101)


def test_commutator_congruence_trivial_cases():
    q = FactoredModulus.of(27)
    x = SL2Residue(q, 1, 3, 0, 1)
    e = identity(q)
    lhs, rhs, ok = commutator_congruence(x, e, 3, 1, 1)
    assert ok and lhs == e and rhs == (1, 0, 0, 1)
    lhs, rhs, ok = commutator_congruence(x, x, 3, 1, 1)
    assert ok and lhs == e


def test_commutator_congruence_preconditions():
    q = FactoredModulus.of(27)
    x = SL2Residue(q, 1, 3, 0, 1)
    y = SL2Residue(q, 1, 1, 0, 1)  # depth 0
    with pytest.raises(ValueError):
        commutator_congruence(x, y, 3, 1, 1)
    with pytest.raises(ValueError):
        commutator_congruence(x, x, 3, 2, 2)  # needs 3^6 > 27


def test_commutator_sweep_small():
    rep = commutator_sweep(2, depth=3)
    assert rep["elements"] == 2**6
    assert rep["violations"] == []
    rep3 = commutator_sweep(3, depth=2)
    assert rep3["elements"] == 27
    assert rep3["violations"] == []


def test_solve_mod_prime_power():
    rng = random.Random(0)
    for _ in range(80):
        p = rng.choice([2, 3, 5])
        k = rng.randrange(1, 4)
        pk = p**k
        rows, cols = rng.randrange(1, 4), rng.randrange(1, 5)
        m = [[rng.randrange(pk) for _ in range(cols)] for _ in range(rows)]
        z_true = [rng.randrange(pk) for _ in range(cols)]
        c = [sum(m[i][j] * z_true[j] for j in range(cols)) % pk for i in range(rows)]
        z = solve_mod_prime_power(m, c, p, k)
        assert z is not None
        for i in range(rows):
            assert sum(m[i][j] * z[j] for j in range(cols)) % pk == c[i]


def test_solve_mod_prime_power_inconsistent():
    # 2z = 1 mod 4 has no solution
    assert solve_mod_prime_power([[2]], [1], 2, 2) is None


def test_solve_mod_q_crt():
    q = FactoredModulus.of(36)
    m = [[2, 3], [1, 1]]
    z = solve_mod_q(m, [5, 7], q)
    assert z is not None
    assert (2 * z[0] + 3 * z[1]) % 36 == 5
    assert (z[0] + z[1]) % 36 == 7


def test_bracket_span_standard_pair():
    q = FactoredModulus.of(35)
    e = LieVector(q, 0, 1, 0)
    f = LieVector(q, 0, 0, 1)
    res = bracket_span_cover(e, f, q)
    assert res["covered"]
    assert set(res["certificates"]) == {"h", "e", "f"}


def test_bracket_span_rejects_dependent():
    q = FactoredModulus.of(35)
    e = LieVector(q, 0, 1, 0)
    with pytest.raises(ValueError):
        bracket_span_cover(e, e, q)
    # dependent mod 5 only
    v = LieVector(q, 1, 2, 3)
    w = LieVector(q, 6, 12, 18)  # = 6*v mod 35, dependent mod both primes
    with pytest.raises(ValueError):
        bracket_span_cover(v, w, q)


def test_bracket_span_random_instances():
    rng = random.Random(1)
    q = FactoredModulus.of(105)
    done = 0
    while done < 50:
        v = LieVector(q, rng.randrange(105), rng.randrange(105), rng.randrange(105))
        w = LieVector(q, rng.randrange(105), rng.randrange(105), rng.randrange(105))
        try:
            res = bracket_span_cover(v, w, q)
        except ValueError:
            continue
        assert res["covered"]  # substitution check done inside
        done += 1


def test_congruence_box_windows():
    b = CongruenceBox(FactoredModulus.of(4), FactoredModulus.of(16))
    assert b.window(2) == (2, 4)
    assert b.window_valid()
    bad = CongruenceBox(FactoredModulus.of(2), FactoredModulus.of(16))
    assert not bad.window_valid()  # m2 = 4 > 2 m1
    with pytest.raises(ValueError):
        CongruenceBox(FactoredModulus.of(8), FactoredModulus.of(4))


def test_amplify_window_arithmetic():
    h1 = CongruenceBox(FactoredModulus.of(2), FactoredModulus.of(4))
    out = amplify(h1, h1)
    assert out.inner.value == 4 and out.outer.value == 16
    # iterated amplification doubles depth per step
    out2 = amplify(out, out)
    assert out2.inner.value == 16 and out2.outer.value == 256
    with pytest.raises(ValueError):
        amplify(h1, CongruenceBox(FactoredModulus.of(3), FactoredModulus.of(9)))
    with pytest.raises(ValueError):
        amplify(
            CongruenceBox(FactoredModulus.of(2), FactoredModulus.of(16)),
            h1,
        )


def test_amplify_exhaustive_example():
    # the worked case: p = 2, windows (1,2) x (1,2) -> box (4, 16) mod 16
    h1 = CongruenceBox(FactoredModulus.of(2), FactoredModulus.of(4))
    rep = amplify_exhaustive_check(h1, h1, cap=128)
    assert rep["verified"]
    assert rep["primes"][2]["contained"]
    assert rep["output"].inner.value == 4 and rep["output"].outer.value == 16


def test_amplify_exhaustive_degenerate_window():
    # trivial second window: the output box degenerates but still verifies
    h1 = CongruenceBox(FactoredModulus.of(2), FactoredModulus.of(4))
    h2 = CongruenceBox(FactoredModulus.of(4), FactoredModulus.of(4))
    rep = amplify_exhaustive_check(h1, h2, cap=128)
    assert rep["verified"]
    assert rep["output"].inner.value == 8 and rep["output"].outer.value == 16


def test_amplify_exhaustive_multi_prime():
    h1 = CongruenceBox(FactoredModulus.of(6), FactoredModulus.of(36))
    rep = amplify_exhaustive_check(h1, h1, cap=81)
    assert rep["primes"][2]["checked"] and rep["primes"][2]["contained"]
    assert rep["primes"][3]["checked"] and rep["primes"][3]["contained"]


def test_amplify_cap_skips():
    h1 = CongruenceBox(FactoredModulus.of(2**4), FactoredModulus.of(2**8))
    rep = amplify_exhaustive_check(h1, h1, cap=128)
    assert not rep["primes"][2]["checked"]
    assert rep["verified"]  # nothing checked, nothing violated


def test_box_lift_codes_shape():
    codes = box_lift_codes(2, 1, 2, 4)
    assert codes.size == 8  # (m2 - m1) = 1: 2^3 lifts
    from sl2lab.packed import PairContext

    ctx = PairContext(16, 1)
    a, b, c, d = ctx.decode(codes)[:4]
    assert np.all((a - 1) % 2 == 0) and np.all(b % 2 == 0)
    assert np.all((a * d - b * c) % 16 == 1)


def test_connecting_map_full_group():
    # B = the full group: the section exists at power 1 and is the identity lift
    q5 = FactoredModulus.of(5)
    b = GroupSet.full_group(q5, ONE)
    cm = connecting_map(b, q5, ONE, k_max=3)
    assert cm.power == 1
    assert cm.validate()
    # identity-lift: the smallest preimage of x reducing to x is x itself
    some = int(cm.domain_codes[7])
    assert cm(some) == some


def test_connecting_map_trivial_target():
    q5 = FactoredModulus.of(5)
    b = GroupSet.full_group(q5, ONE)
    cm = connecting_map(b, ONE, ONE, k_max=2)
    assert cm.domain_codes.size == 1
    assert cm.validate()  # constant map onto the trivial group


def test_connecting_map_proper_powers():
    # B = generators only: needs a genuine power k > 1 to cover
    q3 = FactoredModulus.of(3)
    gens = [
        (((1, 1), (0, 1)), ((1, 0), (0, 1))),
        (((1, -1), (0, 1)), ((1, 0), (0, 1))),
        (((1, 0), (1, 1)), ((1, 0), (0, 1))),
        (((1, 0), (-1, 1)), ((1, 0), (0, 1))),
    ]
    b = GroupSet.from_intpairs(q3, ONE, gens)
    cm = connecting_map(b, q3, ONE, k_max=8)
    assert cm.power > 1
    assert cm.validate()


def test_connecting_map_coverage_failure():
    q5 = FactoredModulus.of(5)
    # a single diagonal element generates a small cyclic subgroup: no coverage
    d = GroupSet.from_elements(
        q5,
        ONE,
        [
            __import__("sl2lab.sl2", fromlist=["PairElement"]).PairElement(
                SL2Residue(q5, 2, 0, 0, 3), SL2Residue(ONE, 0, 0, 0, 0)
            )
        ],
    )
    with pytest.raises(ValueError):
        connecting_map(d, q5, ONE, k_max=3)
