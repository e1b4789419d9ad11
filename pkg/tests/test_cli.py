"""Command-line interface tests: exit-code vocabulary, report files,
determinism, and config merging."""

import json

import numpy as np
import pytest

from varbounds.cli import main

pytestmark = pytest.mark.usefixtures("tmp_path")


@pytest.fixture()
def fns_path(tmp_path):
    path = tmp_path / "fns.json"
    path.write_text(json.dumps(
        {"functions": [{"expr": "x"}, {"poly": [0, 0, 1]}]}))
    return str(path)


@pytest.fixture()
def beta_table_path(tmp_path):
    xs = np.linspace(1e-7, 1 - 1e-7, 60001)
    fs = 12.0 * xs * (1 - xs) ** 2
    doc = {"custom": {"kind": "continuous", "mean": 0.4, "quadratic": None,
                      "support": [0, 1],
                      "density_table": [[float(x), float(f)]
                                        for x, f in zip(xs, fs)]}}
    path = tmp_path / "beta_table.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture()
def beta_table_with_q_path(tmp_path, beta_table_path):
    doc = json.loads(open(beta_table_path).read())
    doc["custom"]["quadratic"] = [-0.2, 0.2, 0.0]
    path = tmp_path / "beta_table_q.json"
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture()
def delta_one_path(tmp_path):
    # bounded-support member with delta = 1: every moment exists, but the
    # order-2 coefficient hits the zero factor (1 - delta)
    xs = np.linspace(-0.99, 0.99, 2001)
    fs = np.exp(-xs**2)
    fs /= np.trapezoid(fs, xs)
    doc = {"custom": {"kind": "continuous", "mean": 0.0,
                      "quadratic": [1.0, 0.0, 1.0], "support": [-1, 1],
                      "density_table": [[float(x), float(f)]
                                        for x, f in zip(xs, fs)]}}
    path = tmp_path / "delta1.json"
    path.write_text(json.dumps(doc))
    return str(path)


class TestInferQ:
    def test_beta_table_passes(self, beta_table_path, capsys):
        code = main(["infer-q", "--dist", beta_table_path])
        out = capsys.readouterr().out
        assert code == 0
        assert "delta=-0.2" in out and "beta=0.2" in out

    def test_corrupted_poisson_fails(self, tmp_path):
        # verify uses the shipped quadratic; corrupt gamma by +0.1
        import math
        pm = [[k, float(np.exp(-1.0) / math.factorial(k))]
              for k in range(40)]
        doc = {"custom": {"kind": "discrete", "mean": 1.0,
                          "quadratic": [0.0, 0.0, 1.1], "support": [0, 39],
                          "pmf_table": pm}}
        path = tmp_path / "poisson_bad.json"
        path.write_text(json.dumps(doc))
        assert main(["verify", "--dist", str(path)]) == 2

    def test_missing_file(self):
        assert main(["infer-q", "--dist", "no_such_file.json"]) == 1


class TestBounds:
    def test_normal_pass_with_reports(self, fns_path, tmp_path, capsys):
        out_json = str(tmp_path / "report.json")
        out_csv = str(tmp_path / "eig.csv")
        code = main(["bounds", "--dist", "normal:mean=0,var=1",
                     "--functions", fns_path, "--n", "1",
                     "--out-json", out_json, "--out-csv", out_csv])
        assert code == 0
        text = capsys.readouterr().out
        assert "POINCARE n=1 PASS" in text
        assert "min-eig=" in text and "tol=" in text
        payload = json.loads(open(out_json).read())
        assert payload["engine"]["quad_nodes"] == 200
        assert payload["runs"][0]["verdicts"]["poincare"]["pass"]
        header = open(out_csv).readline().strip()
        assert header == "n,matrix,index,eigenvalue"

    def test_report_round_trip(self, fns_path, tmp_path):
        from varbounds import SymMatrix, is_psd
        out_json = str(tmp_path / "report.json")
        main(["bounds", "--dist", "normal", "--functions", fns_path,
              "--n", "1,2", "--out-json", out_json, "--quiet"])
        payload = json.loads(open(out_json).read())
        for run in payload["runs"]:
            a = SymMatrix.from_array(np.array(run["A"]))
            verdict = is_psd(a, run["verdicts"]["poincare"]["tol"])
            assert verdict.ok == run["verdicts"]["poincare"]["pass"]

    def test_singular_coefficient_exit(self, delta_one_path, fns_path):
        code = main(["bounds", "--dist", delta_one_path,
                     "--functions", fns_path, "--n", "2"])
        assert code == 3

    def test_class_failure_exit(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"functions": [{"expr": "exp(x)"}]}))
        code = main(["bounds", "--dist", "gamma:shape=2,scale=2",
                     "--functions", str(path), "--n", "1"])
        assert code == 4

    def test_verdict_failure_exit(self, tmp_path, fns_path):
        # a member whose declared quadratic undershoots the true one breaks
        # the first-order bound honestly: the tool must report, not mask
        import math
        pm = [[k, float(np.exp(-2.0) * 2.0**k / math.factorial(k))]
              for k in range(60)]
        doc = {"custom": {"kind": "discrete", "mean": 2.0,
                          "quadratic": [0.0, 0.0, 1.8], "support": [0, 59],
                          "pmf_table": pm}}
        path = tmp_path / "undershoot.json"
        path.write_text(json.dumps(doc))
        code = main(["bounds", "--dist", str(path), "--functions", fns_path,
                     "--n", "1", "--quiet"])
        assert code == 6

    def test_bad_order_is_usage_error(self, fns_path):
        assert main(["bounds", "--dist", "normal", "--functions", fns_path,
                     "--n", "0"]) == 1
        assert main(["bounds", "--dist", "normal", "--functions", fns_path,
                     "--n", "1", "--theorems", "bogus"]) == 1

    def test_byte_identical_bounds_reports(self, fns_path, tmp_path):
        outs = []
        for name in ("r1.json", "r2.json"):
            out = str(tmp_path / name)
            assert main(["bounds", "--dist", "poisson:lam=2", "--functions",
                         fns_path, "--n", "1,2", "--out-json", out,
                         "--quiet"]) == 0
            outs.append(open(out, "rb").read())
        assert outs[0] == outs[1]

    def test_config_document(self, tmp_path):
        cfg_doc = {
            "distribution": {"family": "poisson", "params": {"lam": 2}},
            "functions": {"functions": [{"poly": [0, 1]}]},
            "orders": [1],
            "theorems": ["poincare"],
            "engine": {"quad_nodes": 120},
            "output": {"json": str(tmp_path / "out.json")},
        }
        path = tmp_path / "run.json"
        path.write_text(json.dumps(cfg_doc))
        assert main(["bounds", "--config", str(path), "--quiet"]) == 0
        payload = json.loads(open(tmp_path / "out.json").read())
        assert payload["engine"]["quad_nodes"] == 120
        assert payload["runs"][0]["L"] is None  # bessel not requested


class TestChain:
    def test_normal_cubic_chain(self, tmp_path, capsys):
        path = tmp_path / "g.json"
        path.write_text(json.dumps({"functions": [{"poly": [0, 0, 0, 1]}]}))
        out_csv = str(tmp_path / "chain.csv")
        out_json = str(tmp_path / "chain.json")
        code = main(["chain", "--dist", "normal", "--functions", str(path),
                     "--n", "3", "--out-csv", out_csv,
                     "--out-json", out_json])
        assert code == 0
        rows = open(out_csv).read().strip().splitlines()
        assert rows[0] == "n,bound_type,min_eig"
        kinds = [r.split(",")[1] for r in rows[1:]]
        assert kinds == ["poincare_upper", "bessel_lower", "poincare_lower",
                         "bessel_lower", "poincare_upper", "bessel_lower"]
        # scalar chain 27 >= 15 >= 9 with equality at n = 3
        payload = json.loads(open(out_json).read())
        s_values = [run["S"][0][0] for run in payload["runs"]]
        np.testing.assert_allclose(s_values, [27.0, 9.0, 15.0], atol=1e-6)
        var = payload["runs"][0]["D"][0][0]
        assert var == pytest.approx(15.0, abs=1e-6)

    def test_zero_order_usage_error(self, fns_path):
        assert main(["chain", "--dist", "normal", "--functions", fns_path,
                     "--n", "0"]) == 1

    def test_degree_one_tuple_all_zero(self, tmp_path):
        path = tmp_path / "g.json"
        path.write_text(json.dumps(
            {"functions": [{"poly": [1, 2]}, {"poly": [0, -1]}]}))
        out_json = str(tmp_path / "c.json")
        code = main(["chain", "--dist", "normal", "--functions", str(path),
                     "--n", "1", "--out-json", out_json, "--quiet"])
        assert code == 0
        payload = json.loads(open(out_json).read())
        a = np.array(payload["runs"][0]["A"])
        assert np.max(np.abs(a)) < 1e-9


class TestMcVerify:
    def test_poisson_within_slack(self, fns_path, capsys):
        code = main(["mc-verify", "--dist", "poisson:lam=2",
                     "--functions", fns_path, "--n", "1",
                     "--mc-samples", "50000"])
        assert code == 0
        assert "OK" in capsys.readouterr().out

    def test_byte_identical_reruns(self, fns_path, tmp_path):
        out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        for out in (out1, out2):
            code = main(["mc-verify", "--dist", "normal",
                         "--functions", fns_path, "--n", "1",
                         "--mc-samples", "20000", "--mc-seed", "77",
                         "--out-json", out, "--quiet"])
            assert code == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_no_sampler_exit(self, beta_table_with_q_path, fns_path):
        code = main(["mc-verify", "--dist", beta_table_with_q_path,
                     "--functions", fns_path, "--n", "1"])
        assert code == 5


class TestDistParsing:
    def test_inline_params(self, fns_path):
        assert main(["bounds", "--dist", "binomial:n=10,theta=0.3",
                     "--functions", fns_path, "--n", "1", "--quiet"]) == 0

    def test_unknown_family(self, fns_path):
        assert main(["bounds", "--dist", "cauchy",
                     "--functions", fns_path, "--n", "1"]) == 1
