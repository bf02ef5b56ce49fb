import csv

import numpy as np
import pytest
from scipy.optimize import minimize

from rslp.checkpoint import save_checkpoint
from rslp.errors import ParameterError
from rslp.evaluate import (
    FEASIBILITY_TOL,
    SweepSpec,
    evaluate_point,
    load_models,
    memory_table,
    run_evaluation,
    sweep_power_vs_errorbound,
    sweep_power_vs_sinr,
)
from rslp.geometry import SlotBatch
from rslp.model import build_model

SMALL = dict(samples=12, snr_points=(0.0, 10.0, 20.0), error_bounds=(0.0, 1e-4, 1e-3), seed=3)


@pytest.fixture(scope="module")
def models():
    return {f"dnet_{p}": build_model(4, 4, precision=p, seed=1) for p in ("fp32", "binary", "ternary")}


@pytest.fixture(scope="module")
def spec():
    return SweepSpec(methods=("ipm", "dnet_fp32", "dnet_binary", "dnet_ternary"),
                     models={m: f"{m}.slpw" for m in ("dnet_fp32", "dnet_binary", "dnet_ternary")},
                     **SMALL)


def test_sinr_sweep_rows(spec, models):
    rows = sweep_power_vs_sinr(spec, models)
    assert len(rows) == len(spec.snr_points) * len(spec.methods)
    assert [(r.snr_db, r.method) for r in rows] == [(s, m) for s in spec.snr_points for m in spec.methods]
    for r in rows:
        assert r.delta_sq == spec.fixed_delta_sq and r.sample_count == spec.samples
        assert 0.0 <= r.feasibility_rate <= 1.0 and r.mean_time_us > 0


def test_ipm_power_scales_with_sinr(spec):
    rows = sweep_power_vs_sinr(SweepSpec(**SMALL))
    power = np.array([r.mean_power for r in rows])
    # constraints scale with sqrt(Gamma), so optimal power is linear in Gamma
    np.testing.assert_allclose(power[1:] / power[:-1], 10.0, rtol=1e-5)
    assert all(r.failures == 0 and r.feasibility_rate == 1.0 for r in rows)


def test_ipm_power_grows_with_error_bound():
    rows = sweep_power_vs_errorbound(SweepSpec(**SMALL))
    assert len(rows) == len(SMALL["error_bounds"])
    assert np.all(np.diff([r.mean_power for r in rows]) > 0)
    assert all(r.g1_max <= 0 and r.g2_max <= 0 for r in rows)


def test_zero_bound_matches_nonrobust_problem():
    spec = SweepSpec(**dict(SMALL, samples=4))
    H, phases = spec.test_set()
    row = evaluate_point("ipm", H, phases, 10.0, 0.0)
    batch = SlotBatch.from_channels(H, phases, 10.0)
    powers = []
    for s in range(len(batch)):
        A = batch.vectors[s].reshape(-1, 8)
        c = batch.threshold[s]
        cons = {"type": "ineq", "fun": lambda v: -(A @ v + c), "jac": lambda v: -A}
        x0 = np.linalg.lstsq(A, -2 * c * np.ones(len(A)), rcond=None)[0]
        ref = minimize(lambda v: v @ v, x0, jac=lambda v: 2 * v, constraints=[cons],
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        assert ref.success
        powers.append(ref.fun)
    assert row.mean_power == pytest.approx(np.mean(powers), rel=1e-5)


def test_same_test_set_for_every_method(spec):
    H1, p1 = spec.test_set()
    H2, p2 = SweepSpec(**SMALL).test_set()
    assert np.array_equal(H1, H2) and np.array_equal(p1, p2)


def test_infeasible_network_output_is_counted(models):
    H, phases = SweepSpec(**SMALL).test_set()
    row = evaluate_point("dnet_fp32", H, phases, 10.0, 1e-4, models["dnet_fp32"])
    assert row.failures == 0
    assert np.isfinite(row.mean_power)
    # an untrained network misses the constraints on most slots
    assert row.feasibility_rate < 1.0
    assert row.g1_max > FEASIBILITY_TOL or row.g2_max > FEASIBILITY_TOL


def test_memory_ratios(models):
    rows = {r.method: r for r in memory_table(models)}
    assert rows["dnet_fp32"].ratio_vs_fp32 == 1.0 and rows["dnet_fp32"].binary_params == 0
    assert rows["dnet_binary"].ratio_vs_fp32 >= 10.0
    assert rows["dnet_ternary"].ratio_vs_fp32 >= 10.0
    assert rows["dnet_binary"].megabytes < rows["dnet_ternary"].megabytes < rows["dnet_fp32"].megabytes


def test_run_evaluation_writes_outputs(tmp_path, models):
    for name, model in models.items():
        save_checkpoint(model, tmp_path / f"{name}.slpw")
    spec = SweepSpec.from_dict(
        {"methods": ["ipm", "dnet_binary"], "samples": 6, "snr_points": [5, 15], "error_bounds": [0, 1e-4],
         "models": {"dnet_binary": "dnet_binary.slpw"}},
        base=tmp_path,
    )
    out = tmp_path / "out"
    results = run_evaluation(spec, out)
    assert len(results["power_vs_sinr"]) == 4 and len(results["power_vs_bound"]) == 4
    assert [r.method for r in results["timing"]] == ["dnet_binary"]
    for name in ("power_vs_sinr.csv", "power_vs_bound.csv", "timing.csv", "memory.csv", "timing.dat"):
        assert (out / name).is_file()
    with (out / "power_vs_sinr.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and {"method", "snr_db", "mean_power", "feasibility_rate"} <= set(rows[0])
    data = np.loadtxt(out / "power_vs_bound_ipm.dat")
    assert data.shape == (2, 2) and np.array_equal(data[:, 0], [0.0, 1e-4])
    assert (out / "power_vs_sinr_dnet_binary.dat").is_file()


def test_missing_model_file(tmp_path):
    spec = SweepSpec(methods=("dnet_fp32",), models={"dnet_fp32": str(tmp_path / "none.slpw")}, samples=2)
    with pytest.raises(OSError):
        load_models(spec)


@pytest.mark.parametrize("kw", [
    dict(methods=()),
    dict(methods=("magic",)),
    dict(methods=("dnet_fp32",)),
    dict(samples=0),
    dict(error_bounds=(-1e-4,)),
    dict(snr_points=()),
])
def test_spec_validation(kw):
    with pytest.raises(ParameterError):
        SweepSpec(**kw)


def test_spec_rejects_unknown_keys():
    with pytest.raises(ParameterError):
        SweepSpec.from_dict({"sample": 5})
