"""End-to-end checks of the python bindings against known protocol facts."""

import math

import pytest

qka_sim = pytest.importorskip("qka_sim")

GOLDEN = {
    "n": 5,
    "m": 3,
    "l_verify": 2,
    "pivot": 3,
    "seed": 20240901,
    "keys": ["10,11,10", "00,01,01", "11,01,00", "11,10,11", "00,10,01"],
}


def test_cluster_state_shape():
    s = qka_sim.make_cluster_state()
    assert s.num_qubits == 6
    assert math.isclose(s.norm_sq(), 1.0, abs_tol=1e-12)
    amps = s.amps
    assert len(amps) == 64
    assert amps[0] == pytest.approx(0.5)
    assert amps[7] == pytest.approx(0.5)
    assert amps[56] == pytest.approx(0.5)
    assert amps[63] == pytest.approx(-0.5)


def test_apply_x_is_an_involution():
    s = qka_sim.make_cluster_state()
    twice = qka_sim.apply_x(qka_sim.apply_x(s, 3), 3)
    assert twice.amps == s.amps


def test_rng_is_seed_deterministic():
    a = qka_sim.RngStream(7)
    b = qka_sim.RngStream(7)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    assert qka_sim.split_seed(1, 2) == qka_sim.split_seed(1, 2)


def test_measurement_on_eigenstate_is_deterministic():
    rng = qka_sim.RngStream(3)
    outcome, post = qka_sim.measure_qubit(qka_sim.basis_state([1, 0]), 1, "Z", rng)
    assert outcome == 1
    assert post.num_qubits == 2


def test_cluster_basis_measure_identifies_the_frame():
    rng = qka_sim.RngStream(11)
    index, _ = qka_sim.cluster_basis_measure(qka_sim.make_cluster_state(), rng)
    assert index == 1
    flipped = qka_sim.apply_x(qka_sim.apply_x(qka_sim.make_cluster_state(), 3), 5)
    index, _ = qka_sim.cluster_basis_measure(flipped, rng)
    assert index == qka_sim.codebook_index_for_mask(0b1010)


def test_codebook_anchor_rows():
    assert qka_sim.codebook_index_for_mask(0b0000) == 1
    assert qka_sim.codebook_index_for_mask(0b1011) == 12
    assert qka_sim.codebook_index_for_mask(0b1110) == 15


def test_golden_run_recovers_worked_key():
    transcript = qka_sim.run(GOLDEN)
    assert transcript["result"]["outcome"] == "key-recovered"
    assert transcript["result"]["shared_key"] == "10,11,01"
    assert transcript["config"]["seed"] == 20240901
    kinds = [m["kind"] for m in transcript["messages"]]
    assert kinds[-1] == "key_announce"


def test_run_is_deterministic():
    assert qka_sim.run(GOLDEN) == qka_sim.run(GOLDEN)


def test_forged_pivot_key_aborts():
    transcript = qka_sim.run(GOLDEN, attack="forge-pivot-key:key=00,00,00")
    result = transcript["result"]
    assert result["outcome"] == "aborted"
    assert result["phase"] == "tdc-verification"
    assert result["check"] == "eq5-pivot-key-digest"
    assert result["offender"] == "P3"


def test_forgery_detection_is_certain():
    cfg = {"n": 5, "m": 2, "l_verify": 2, "decoys_per_transfer": 4}
    report = qka_sim.estimate_detection(cfg, "forge-pivot-key", trials=200, seed=1)
    assert report["detected"] == 200
    assert report["estimate"] == 1.0
    assert report["analytic"] == 1.0


def test_efficiency_closed_form():
    r = qka_sim.efficiency(5, 3)
    assert r["numerator"] == 1
    assert r["denominator"] == 23
    assert r["closed_form_denominator"] == 23
    assert r["approximation_1_over_2n"] == pytest.approx(0.1)
    assert qka_sim.efficiency(7, 1)["denominator"] == 27


def test_verify_table_rows():
    rows = qka_sim.verify_table()
    assert len(rows) == 16
    assert sum(r["agree"] for r in rows) == 13
    for r in rows:
        if not r["agree"]:
            assert r["k_b"] == "11"


def test_selftest_passes_and_inject_trips_one_check():
    results = qka_sim.selftest()
    assert len(results) == 4
    assert all(passed for _, passed, _ in results)

    tripped = qka_sim.selftest("hash-homomorphism")
    by_name = {name: passed for name, passed, _ in tripped}
    assert by_name["hash-homomorphism"] is False
    assert by_name["codebook-soundness"] is True


def test_bad_config_raises():
    with pytest.raises(ValueError):
        qka_sim.run({"n": 4})
    with pytest.raises(ValueError):
        qka_sim.run(GOLDEN, attack="no-such-attack")
