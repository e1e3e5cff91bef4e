from __future__ import annotations

import json
import math

import numpy as np
import pytest

from orthocs import harness
from orthocs.harness import ExperimentConfig, ExperimentRecord
from orthocs.model import Field, SignalPrior
from orthocs.operators import BaseTransform, EnsembleSpec


def small_config(**kw) -> ExperimentConfig:
    base = dict(
        ensemble_id="b",
        ensemble=EnsembleSpec.type_b(128, 0.75, 0.375),
        prior=SignalPrior(0.15),
        sigma0_sq=1e-2,
        lam=(0.1,),
        trials=4,
        master_seed=3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(trials=0)
    with pytest.raises(ValueError):
        small_config(lam=())
    with pytest.raises(ValueError):
        small_config(master_seed=2 ** 64)
    with pytest.raises(ValueError):
        small_config(prior=SignalPrior(0.1, Field.REAL))


def test_configs_from_dict_and_overrides():
    doc = {
        "master_seed": 9,
        "trials": 5,
        "defaults": {"base_n": 64, "lambda": 0.2, "snr_db": 20},
        "rows": [
            {"id": "a", "ensemble": "A", "alpha": 0.5},
            {"id": "c", "ensemble": "C", "mu": [1, 1], "nu": [0.5]},
            {"id": "g", "ensemble": "gaussian", "alpha": 0.5},
        ],
    }
    cfgs = harness.configs_from_dict(doc, {"trials": 2, "field": "real"})
    assert [c.ensemble_id for c in cfgs] == ["a", "c", "g"]
    assert all(c.trials == 2 and c.master_seed == 9 for c in cfgs)
    assert cfgs[0].ensemble.field is Field.REAL and cfgs[0].ensemble.base_transform is BaseTransform.DCT
    assert cfgs[1].ensemble.gains == ((0.5, 0.5),)
    assert cfgs[0].sigma0_sq == pytest.approx(0.01)
    assert [c.stream for c in cfgs] == [0, 1, 2]


def test_zero_signal_zero_noise_gives_exact_zero():
    cfg = small_config(prior=SignalPrior(0.0), sigma0_sq=0.0, trials=1)
    rec = harness.run_table([cfg])[0]
    assert rec.empirical_db == -math.inf and rec.per_trial_mse == [0.0]


def test_run_table_deterministic_and_worker_independent():
    cfg = small_config()
    a = harness.run_table([cfg])
    b = harness.run_table([cfg])
    c = harness.run_table([small_config(workers=2)])
    assert a == b == c
    assert a[0].per_trial_mse == c[0].per_trial_mse


def test_stderr_formula():
    x = np.array([0.01, 0.012, 0.009, 0.011])
    mean_db, se_db = harness.summarize(x)
    assert mean_db == pytest.approx(10 * np.log10(x.mean()))
    assert se_db == pytest.approx(10 / np.log(10) * x.std(ddof=1) / 2 / x.mean())
    assert harness.summarize(np.array([0.01]))[1] is None


def test_theory_recorded_only_when_available():
    recs = harness.run_table([
        small_config(),
        small_config(ensemble_id="g", ensemble=EnsembleSpec(128, (0.5,), (1.0,), kind="gaussian_iid")),
    ], simulate=False)
    assert recs[0].theory_db == pytest.approx(-18.7145, abs=1e-4)
    assert recs[1].theory_db is None and recs[1].note


def test_csv_round_trip(tmp_path):
    recs = harness.run_table([small_config(lam=(0.05, 0.1))])
    recs.append(ExperimentRecord("x", (1.0, 0.5), (0.5,), 0.3, 0.0, 0.1, None, -math.inf, None, 0, 16))
    path = harness.write_csv(recs, tmp_path / "t.csv")
    back = harness.read_csv(path)
    assert back == recs
    header = path.read_text().splitlines()[0]
    assert header == ",".join(harness.CSV_COLUMNS)


def test_json_round_trip_and_reproducible_files(tmp_path):
    recs = harness.run_table([small_config()])
    p1 = harness.write_json(recs, tmp_path / "a.json")
    p2 = harness.write_json(harness.run_table([small_config()]), tmp_path / "b.json")
    assert p1.read_bytes() == p2.read_bytes()
    back = harness.read_json(p1)
    assert back == recs and back[0].per_trial_mse == recs[0].per_trial_mse
    assert "wall_time" not in json.loads(p1.read_text())[0]


def test_csv_files_bit_identical(tmp_path):
    a = harness.write_csv(harness.run_table([small_config()]), tmp_path / "a.csv")
    b = harness.write_csv(harness.run_table([small_config()]), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_sweep_argmin():
    cfg = small_config(lam=(0.05, 0.1, 0.2, 0.4))
    recs, summ = harness.sweep_lambda([cfg])
    assert len(recs) == 4 and summ[0].best_lam == 0.1 and summ[0].source == "theory"
    _, one = harness.sweep_lambda([small_config(lam=(0.3,))])
    assert one[0].best_lam == 0.3
    with pytest.raises(ValueError):
        harness.sweep_lambda([small_config(lam=(0.2, 0.1))])


def test_sweep_type_b_ordering_in_mu():
    cfgs = [small_config(ensemble_id=str(mu), ensemble=EnsembleSpec.type_b(400, mu, 0.5 * mu)) for mu in (1.0, 0.75, 0.5, 0.25, 0.01)]
    recs = harness.run_table(cfgs, simulate=False)
    vals = [r.theory_db for r in recs]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_fit_quadratic_exact_and_rank_check():
    t = np.array([1 / 256, 1 / 512, 1 / 1024, 1 / 2048])
    c = np.array([0.0123, 0.7, -15.0])
    coef = harness.fit_quadratic(t, c[0] + c[1] * t + c[2] * t ** 2)
    np.testing.assert_allclose(coef, c, rtol=0, atol=1e-10)
    with pytest.raises(ValueError):
        harness.fit_quadratic([0.1, 0.1, 0.1], [1.0, 1.0, 1.0])


def test_extrapolation_small_run():
    cfg = small_config(ensemble=EnsembleSpec.type_b(64, 0.75, 0.375), n_grid=(64, 128, 256), trials=2)
    res = harness.extrapolate_n(cfg)
    assert res.trials == [8, 4, 2]
    assert res.theory_db == pytest.approx(-18.7145, abs=1e-4)
    assert math.isfinite(res.intercept_db)
    with pytest.raises(ValueError):
        harness.extrapolate_n(small_config(n_grid=(64, 128)))


def test_spectrum_report_writes_files(tmp_path):
    m = harness.spectrum_report(EnsembleSpec.type_b(256, 0.75, 0.375), 1, tmp_path / "sp")
    assert m["ks"] < 0.1 and m["eigenvalues"] == 96
    for suffix in (".density.csv", ".density.atoms.csv", ".hist.csv", ".metrics.json"):
        assert (tmp_path / f"sp{suffix}").exists()
    g = harness.spectrum_report(EnsembleSpec(256, (0.5,), (1.0,), kind="gaussian_iid"), 1)
    assert g["law"].startswith("mp")
    with pytest.raises(ValueError):
        harness.spectrum_report(EnsembleSpec.type_c(16, [1, 1], [1]), 1)
