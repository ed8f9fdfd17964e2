import csv
import io
import json
import math

import numpy as np
import pytest

import oracles
from cdanneal import ansatz, experiments
from cdanneal.ansatz import CdParams, QaoaParams, cd_cost, qaoa_cost
from cdanneal.experiments import (
    ConfigError,
    ExperimentAborted,
    ExperimentConfig,
    run_experiment,
    write_result,
)
from cdanneal.model import AnnealSpec
from cdanneal.statevec import ghz_state


@pytest.fixture(scope="module")
def size_sweep():
    return run_experiment(ExperimentConfig.defaults("size-sweep"))


@pytest.fixture(scope="module")
def j_sweep():
    return run_experiment(ExperimentConfig.defaults("j-sweep"))


@pytest.fixture(scope="module")
def qaoa_compare():
    return run_experiment(ExperimentConfig.defaults("qaoa-compare"))


def small(name, **overrides):
    """A quick variant of a recipe for plumbing tests."""
    base = {"iterations": 10}
    if name in ("size-sweep", "qaoa-compare"):
        base["qubits"] = [3, 4]
    base.update(overrides)
    return ExperimentConfig.defaults(name).updated(base)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

class TestConfig:
    def test_recipe_defaults(self):
        cfg = ExperimentConfig.defaults("size-sweep")
        assert cfg.qubits == list(range(2, 11))
        assert (cfg.j, cfg.dt, cfg.total_time, cfg.iterations, cfg.spsa_a, cfg.spsa_c) == ([-1.0], 0.2, 1.0, 100, 0.15, 0.1)
        assert ExperimentConfig.defaults("j-sweep").j == [-1.0, -0.6, -0.1]
        q = ExperimentConfig.defaults("qaoa-compare")
        assert (q.qubits, q.qaoa_spsa_a, q.qaoa_spsa_c, q.p, q.t_prime) == ([4, 6, 8, 10], 0.05, 0.05, [1, 2], 1.0)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.defaults("nope")
        assert info.value.field == "experiment"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.defaults("size-sweep").updated({"spsa_b": 1})
        assert info.value.field == "spsa_b"

    def test_coercion(self):
        cfg = ExperimentConfig.defaults("size-sweep").updated({"qubits": 4, "j": "-0.5", "iterations": 20.0})
        assert cfg.qubits == [4] and cfg.j == [-0.5] and cfg.iterations == 20

    @pytest.mark.parametrize("key, value", [("iterations", 2.5), ("qubits", [True]), ("dt", "fast")])
    def test_bad_types(self, key, value):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.defaults("size-sweep").updated({key: value})
        assert info.value.field == key

    @pytest.mark.parametrize("overrides, field", [
        ({"dt": 0.3}, "dt"),
        ({"qubits": [1]}, "qubits"),
        ({"restarts": 0}, "restarts"),
        ({"shots": -1}, "shots"),
        ({"spsa_a": 0.0}, "spsa_a"),
        ({"p": [0]}, "p"),
        ({"h0": 0.0, "j": [0.0]}, "j"),
    ])
    def test_validation_names_field(self, overrides, field):
        cfg = ExperimentConfig.defaults("size-sweep").updated(overrides)
        with pytest.raises(ConfigError) as info:
            cfg.validate()
        assert info.value.field == field

    def test_trotter_validation(self):
        cfg = ExperimentConfig.defaults("trotter-scaling").updated({"trotter_dts": [0.2, 0.3]})
        with pytest.raises(ConfigError) as info:
            cfg.validate()
        assert info.value.field == "trotter_dts"
        with pytest.raises(ConfigError):
            ExperimentConfig.defaults("trotter-scaling").updated({"qubits": [5]}).validate()

    def test_unused_keys(self):
        cfg = ExperimentConfig.defaults("size-sweep")
        assert cfg.unused_keys(["dt", "p", "t_prime"]) == ["p", "t_prime"]

    def test_echo_round_trips(self):
        cfg = ExperimentConfig.defaults("qaoa-compare").updated({"seed": 9, "j": [-0.6]})
        again = ExperimentConfig.defaults("qaoa-compare").updated(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg


# ---------------------------------------------------------------------------
# recipes
# ---------------------------------------------------------------------------

class TestSizeSweep:
    def test_record_count_and_methods(self, size_sweep):
        assert len(size_sweep.records) == 27
        assert [r["method"] for r in size_sweep.records[:3]] == ["none", "analytic", "optimized"]
        assert sorted({r["n_qubits"] for r in size_sweep.records}) == list(range(2, 11))

    def test_fidelities_in_unit_interval(self, size_sweep):
        assert all(0 <= r["fidelity"] <= 1 for r in size_sweep.records)

    def test_fidelities_rederivable_from_params(self, size_sweep):
        for r in size_sweep.records:
            spec = AnnealSpec(r["n_qubits"], J=r["J"])
            cost = cd_cost(CdParams(r["params"][:-1]), spec)
            assert r["fidelity"] == pytest.approx(1 - cost, abs=1e-12)

    def test_two_qubit_analytic_near_unity(self, size_sweep):
        rec = next(r for r in size_sweep.records if r["n_qubits"] == 2 and r["method"] == "analytic")
        assert rec["fidelity"] > 0.9

    def test_five_qubit_plain_annealing_matches_dense_evolution(self, size_sweep):
        rec = next(r for r in size_sweep.records if r["n_qubits"] == 5 and r["method"] == "none")
        psi = oracles.trotter_unitary(5, -1.0, -1.0, 1.0, 0.2, np.zeros(5)) @ oracles.plus(5)
        dense = abs(np.vdot(oracles.ghz(5), psi)) ** 2
        assert rec["fidelity"] == pytest.approx(dense, abs=1e-10)

    def test_optimized_records_carry_trace_summary(self, size_sweep):
        rec = next(r for r in size_sweep.records if r["method"] == "optimized")
        assert rec["n_evaluations"] == 200
        assert rec["restart_fidelities"] == [rec["fidelity"]]
        assert rec["best_cost"] <= rec["initial_cost"]


class TestJSweep:
    def test_couplings_echoed(self, j_sweep):
        assert [r["J"] for r in j_sweep.records] == [-1.0, -1.0, -0.6, -0.6, -0.1, -0.1]
        assert j_sweep.config["j"] == [-1.0, -0.6, -0.1]

    def test_optimized_not_worse(self, j_sweep):
        by = {(r["J"], r["method"]): r["fidelity"] for r in j_sweep.records}
        for J in (-1.0, -0.6, -0.1):
            assert by[(J, "optimized")] >= by[(J, "analytic")]

    def test_weak_coupling_lowers_both(self, j_sweep):
        by = {(r["J"], r["method"]): r["fidelity"] for r in j_sweep.records}
        for method in ("analytic", "optimized"):
            assert by[(-0.1, method)] < by[(-1.0, method)]


class TestCoeffDump:
    def test_series(self):
        res = run_experiment(ExperimentConfig.defaults("coeff-dump"))
        assert [r["step"] for r in res.records] == [1, 2, 3, 4, 5]
        assert res.records[-1]["theta_cd_analytic"] == 0.0
        assert res.records[-1]["theta_cd_optimized"] == 0.0
        peaks = res.summary["n5_j-1"]
        assert peaks["peak_abs_optimized"] >= peaks["peak_abs_analytic"]

    def test_midpoint_value_on_finer_grid(self):
        res = run_experiment(small("coeff-dump", dt=0.1))
        mid = next(r for r in res.records if r["step"] == 5)
        assert mid["t"] == 0.5
        assert mid["theta_cd_analytic"] == pytest.approx(-math.pi**2 / 16, abs=1e-12)


class TestDensityDump:
    def test_matrices(self, tmp_path):
        res = run_experiment(small("density-dump"))
        assert [r["method"] for r in res.records] == ["analytic", "optimized"]
        for rec in res.records:
            assert rec["trace"] == pytest.approx(1.0, abs=1e-10)
            real = res.matrices[rec["matrix_files"][0].removesuffix(".csv")]
            imag = res.matrices[rec["matrix_files"][1].removesuffix(".csv")]
            rho = real + 1j * imag
            assert rho.shape == (32, 32)
            np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
        paths = write_result(res, tmp_path)
        names = {p.name for p in paths}
        assert "density_n5_j-1_optimized_imag.csv" in names
        rows = list(csv.reader((tmp_path / "density_n5_j-1_analytic_real.csv").open()))
        assert len(rows) == 32 and all(len(r) == 32 for r in rows)
        loaded = np.array(rows, dtype=float)
        np.testing.assert_array_equal(loaded, res.matrices["density_n5_j-1_analytic_real"])

    def test_perfect_ghz_corners(self):
        rho = ghz_state(5).density_matrix().real
        corners = [(0, 0), (0, 31), (31, 0), (31, 31)]
        for i, j in corners:
            assert rho[i, j] == pytest.approx(0.5)
        mask = np.ones_like(rho, dtype=bool)
        for i, j in corners:
            mask[i, j] = False
        assert np.all(rho[mask] == 0)


class TestQaoaCompare:
    def test_table_shape_and_order(self, qaoa_compare):
        assert qaoa_compare.summary["columns"] == ["optimal-cd", "qaoa-p1", "qaoa-p2"]
        table = qaoa_compare.summary["table"]
        assert list(table) == ["n4_j-1", "n6_j-1", "n8_j-1", "n10_j-1"]
        for cd, p1, p2 in table.values():
            assert cd > p2 > p1

    def test_reference_rows(self, qaoa_compare):
        table = qaoa_compare.summary["table"]
        cd, p1, p2 = table["n4_j-1"]
        assert (cd, p1, p2) == pytest.approx((0.77, 0.46, 0.62), abs=0.08)
        cd, p1, p2 = table["n10_j-1"]
        assert (cd, p1, p2) == pytest.approx((0.18, 0.04, 0.10), abs=0.08)

    def test_qaoa_params_rederive_fidelity(self, qaoa_compare):
        for r in qaoa_compare.records:
            if r["method"].startswith("qaoa"):
                params = QaoaParams.from_vector(r["params"])
                assert params.total_time == pytest.approx(1.0, abs=1e-9)
                assert r["fidelity"] == pytest.approx(1 - qaoa_cost(params, AnnealSpec(r["n_qubits"])), abs=1e-12)


class TestTrotterScaling:
    def test_records(self):
        res = run_experiment(ExperimentConfig.defaults("trotter-scaling"))
        errs = {r["dt"]: r["error"] for r in res.records}
        assert errs[0.001] == 0.0
        assert errs[0.1] < errs[0.2]
        fits = res.summary["fits"]["n3_j-1"]
        assert set(fits) == {"error_exponent", "splitting_exponent"}
        assert fits["splitting_exponent"] == pytest.approx(2.0, abs=0.15)


def test_fit_exponent_recovers_power_law():
    dts = np.array([0.2, 0.1, 0.05])
    assert experiments.fit_exponent(dts, 3.0 * dts**1.5) == pytest.approx(1.5, abs=1e-12)


# ---------------------------------------------------------------------------
# emission, determinism, failure handling
# ---------------------------------------------------------------------------

def test_csv_format():
    res = run_experiment(small("size-sweep"))
    rows = list(csv.DictReader(io.StringIO(res.to_csv())))
    assert len(rows) == len(res.records) == 6
    rec = res.records[2]
    assert rows[2]["fidelity"] == format(rec["fidelity"], ".17g")
    assert float(rows[2]["fidelity"]) == rec["fidelity"]
    assert [float(x) for x in rows[2]["params"].split()] == rec["params"]
    assert rows[0]["best_cost"] == ""


def test_json_payload_excludes_wall_time():
    res = run_experiment(small("size-sweep"))
    payload = json.loads(res.to_json())
    assert payload["format_version"] == experiments.FORMAT_VERSION
    assert "wall_time_s" not in res.to_json()
    assert len(res.timings) == 2 and all(t["wall_time_s"] >= 0 for t in res.timings)
    assert payload["config"] == res.config


@pytest.mark.parametrize("name", experiments.EXPERIMENTS)
def test_rerun_is_byte_identical(name, tmp_path):
    cfg = small(name, seed=5)
    a = run_experiment(cfg, threads=1)
    b = run_experiment(cfg, threads=4)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()
    pa = write_result(a, tmp_path / "a")
    pb = write_result(b, tmp_path / "b")
    for x, y in zip(pa, pb):
        if not x.name.endswith(".timings.json"):
            assert x.read_bytes() == y.read_bytes()


def test_restarts_report_best():
    res = run_experiment(small("size-sweep", qubits=[4], restarts=3))
    rec = res.records[2]
    assert len(rec["restart_fidelities"]) == 3
    assert rec["fidelity"] == max(rec["restart_fidelities"])


def test_shot_mode_runs_and_reports_exact_fidelity():
    res = run_experiment(small("size-sweep", qubits=[3], shots=1000))
    rec = res.records[2]
    spec = AnnealSpec(3)
    assert rec["fidelity"] == pytest.approx(1 - cd_cost(CdParams(rec["params"][:-1]), spec), abs=1e-12)


def test_failure_keeps_completed_points(monkeypatch):
    real = ansatz.cd_optimize

    def flaky(spec, cfg, shots=0):
        if spec.n_qubits == 4:
            raise RuntimeError("boom")
        return real(spec, cfg, shots=shots)

    monkeypatch.setattr(ansatz, "cd_optimize", flaky)
    with pytest.raises(ExperimentAborted) as info:
        run_experiment(small("size-sweep"), threads=1)
    partial = info.value.result
    assert not partial.complete
    assert {r["n_qubits"] for r in partial.records} == {3}
    assert json.loads(partial.to_json())["complete"] is False
