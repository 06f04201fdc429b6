from mfspec.checks import PROPERTIES, run_checks


def test_every_property_passes_small_batch():
    rep = run_checks(instances=30, seed=11)
    assert set(rep) == set(PROPERTIES)
    for name, r in rep.items():
        assert r["violations"] == 0, (name, r["witness"])


def test_check_is_deterministic():
    a = run_checks(instances=10, seed=2, only={"variational_inequality"})
    b = run_checks(instances=10, seed=2, only={"variational_inequality"})
    assert a["variational_inequality"]["violations"] == b["variational_inequality"]["violations"] == 0
