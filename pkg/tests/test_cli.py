import csv
import json

import numpy as np
import pytest

from semidict import dlmio
from semidict.cli import main


@pytest.fixture(scope="module")
def batch_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "batch"
    rc = main([
        "gen", "--n", "32", "--m", "24", "--k", "2", "--N", "10000",
        "--seed", "3", "--dict-kind", "orthonormal-subset", "--out", str(out),
    ])
    assert rc == 0
    return out


def test_gen_writes_complete_batch_dir(batch_dir):
    batch, manifest, A = dlmio.read_batch_dir(batch_dir)
    assert batch.N == 10_000 and batch.m == 24
    assert A.shape == (32, 24)
    assert manifest["dictionary_kind"] == "orthonormal-subset"
    assert manifest["support_models"]["adversarial"] is None
    assert manifest["value_model"]["kind"] == "rademacher"
    assert batch.provenance is not None
    assert (batch_dir / "manifest.json").exists()


def test_gen_semirandom_mixture(tmp_path):
    out = tmp_path / "mix"
    rc = main([
        "gen", "--n", "16", "--m", "8", "--k", "2", "--N", "1000",
        "--beta", "0.4", "--support-adv", "fixed-blocks",
        "--adv-params", '{"blocks": [[0, 1]]}', "--out", str(out),
    ])
    assert rc == 0
    batch, manifest, _ = dlmio.read_batch_dir(out)
    from semidict.sampling import PROV_ADVERSARIAL, PROV_RANDOM

    assert int((batch.provenance == PROV_RANDOM).sum()) == 400
    assert int((batch.provenance == PROV_ADVERSARIAL).sum()) == 600
    assert manifest["support_models"]["adversarial"]["kind"] == "fixed-blocks"


def test_gen_rejects_bad_sizes(capsys):
    with pytest.raises(SystemExit):
        main(["gen", "--n", "0", "--m", "4", "--k", "1", "--N", "10", "--out", "x"])


def test_test_accepts_true_column(batch_dir, tmp_path):
    report = tmp_path / "outcome.json"
    rc = main([
        "test", "--batch", str(batch_dir), "--z", "0",
        "--eta", "0.15", "--kappa0", "0.05", "--kappa1", "0.01",
        "--out", str(report),
    ])
    assert rc == 0
    payload = json.loads(report.read_text())
    assert payload["accepted"] is True
    assert payload["kappa0_hat"] < 0.05


def test_test_rejects_on_harsh_thresholds(batch_dir):
    rc = main([
        "test", "--batch", str(batch_dir), "--z", "0",
        "--eta", "0.15", "--kappa0", "0.05", "--kappa1", "0.9",
    ])
    assert rc == 1


def test_test_z_from_file_and_rad(batch_dir, tmp_path):
    _, _, A = dlmio.read_batch_dir(batch_dir)
    zfile = tmp_path / "z.dlm"
    dlmio.write_matrix(zfile, A[:, [5]])
    rc = main([
        "test", "--batch", str(batch_dir), "--z", str(zfile), "--rad",
        "--eta", "0.15", "--kappa0", "0.05", "--kappa1", "0.01",
    ])
    assert rc == 0


def test_candidates_end_to_end(batch_dir, tmp_path):
    out = tmp_path / "cands"
    rc = main([
        "candidates", "--batch", str(batch_dir), "--strategy", "oracle-planted",
        "--L", "2", "--budget", "300", "--anchor-pool", "512",
        "--eta", "0.15", "--kappa0", "0.02", "--kappa1", "0.01",
        "--tv-size", "6000", "--no-rad", "--min-accepted", "1",
        "--out", str(out),
    ])
    assert rc == 0
    W = dlmio.read_matrix(out / "candidates.dlm")
    assert W.shape[0] == 32 and W.shape[1] >= 1
    np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-9)
    payload = json.loads((out / "candidates.json").read_text())
    assert payload["diagnostics"]["accepted"] == W.shape[1]
    assert len(payload["sources"]) == W.shape[1]


def test_candidates_min_accepted_gate(batch_dir, tmp_path):
    rc = main([
        "candidates", "--batch", str(batch_dir), "--strategy", "random",
        "--L", "2", "--budget", "5",
        "--eta", "0.01", "--kappa0", "0.001", "--kappa1", "0.99",
        "--tv-size", "2000", "--min-accepted", "1",
        "--out", str(tmp_path / "none"),
    ])
    assert rc == 1


@pytest.fixture(scope="module")
def recover_run(tmp_path_factory):
    from semidict.candidates import TupleStrategy
    from semidict.coltest import TestParams
    from semidict.harness import DictionaryParams, ExperimentConfig
    from semidict.recovery import RecoverConfig
    from semidict.sampling import SemirandomSpec, SupportModel, ValueModel

    root = tmp_path_factory.mktemp("cli-recover")
    cfg = ExperimentConfig(
        dictionary=DictionaryParams(n=32, m=24, kind="orthonormal-subset"),
        model=SemirandomSpec(
            support_random=SupportModel(kind="uniform-k-sparse", m=24, k=2),
            value=ValueModel(kind="rademacher"), N=12_000, seed=0,
        ),
        algorithm=RecoverConfig(
            params=TestParams(eta=0.15, kappa0=0.02, kappa1=0.01),
            strategy=TupleStrategy(kind="oracle-planted", L=2, budget=600,
                                   anchor_pool_size=512),
            t1_size=8_000, tv_size=6_000, lam=0.5, iteration_cap=4,
            stale_limit=2, dedup_angle=0.2, use_rad=False, match_tolerance=0.1,
        ),
        trials=[0],
        outputs=str(root / "run"),
    )
    cfg_path = root / "config.json"
    cfg_path.write_text(cfg.to_json())
    rc = main(["recover", "--config", str(cfg_path)])
    return rc, root / "run"


def test_recover_exit_and_artifacts(recover_run):
    rc, run_dir = recover_run
    assert rc == 0
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["all_passed"] is True
    assert (run_dir / "seed_0" / "recovered.dlm").exists()
    assert (run_dir / "seed_0" / "iterations.csv").exists()


def test_report_renders_recovery_figures(recover_run, tmp_path):
    _, run_dir = recover_run
    figs = tmp_path / "figs"
    rc = main(["report", "--run", str(run_dir), "--out", str(figs)])
    assert rc == 0
    pngs = list(figs.glob("*.png"))
    assert pngs, "report must render at least one figure"


def test_conc_bench_subtensor_csv(tmp_path):
    cfg = tmp_path / "sub.json"
    cfg.write_text(json.dumps({
        "tensor": {"kind": "identity-slice", "d": 2, "m": 50},
        "support": {"kind": "uniform-k-sparse", "m": 50, "k": 5},
        "eta": 0.01, "trials": 2000, "seed": 1,
    }))
    out = tmp_path / "sub.csv"
    rc = main(["conc-bench", "--experiment", "subtensor",
               "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["experiment", "params", "empirical", "bound", "pass"]
    assert rows[1][0] == "subtensor"
    assert rows[1][4] == "True"
    float(rows[1][2])  # repr round-trips to float


def test_conc_bench_khatri_rao_rows(tmp_path):
    cfg = tmp_path / "kr.json"
    cfg.write_text(json.dumps({"shape": [3, 4, 5], "repeats": 3, "seed": 2}))
    out = tmp_path / "kr.csv"
    rc = main(["conc-bench", "--experiment", "khatri-rao",
               "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 1 + 6  # header + (norm + psd) x 3 repeats
    names = {r[0] for r in rows[1:]}
    assert names == {"khatri-rao", "psd-frobenius"}


def test_conc_bench_report_figure(tmp_path):
    cfg = tmp_path / "z.json"
    cfg.write_text(json.dumps({
        "a": [0.01] * 100,
        "support": {"kind": "uniform-k-sparse", "m": 100, "k": 10},
        "value": {"kind": "rademacher"},
        "c": 2, "trials": 2000, "seed": 0,
    }))
    out = tmp_path / "z.csv"
    assert main(["conc-bench", "--experiment", "zconc",
                 "--config", str(cfg), "--out", str(out)]) == 0
    figs = tmp_path / "zfigs"
    assert main(["report", "--conc-csv", str(out), "--out", str(figs)]) == 0
    assert list(figs.glob("*.png"))


def test_nonident_demo_passes(tmp_path):
    report = tmp_path / "demo.json"
    rc = main(["nonident-demo", "--N", "20000", "--out", str(report)])
    assert rc == 0
    payload = json.loads(report.read_text())
    assert payload["batches_identical_1e9"] is True
    assert payload["block_triple_marginal_max"] == 0.0
    assert payload["signed_permutation_distance"] >= 1.0
    assert payload["pair_data_false_accept"]["accepted"] is True
    assert payload["triple_injected"]["accepted"] is False


def test_match_self_and_partial(batch_dir, tmp_path):
    _, _, A = dlmio.read_batch_dir(batch_dir)
    dict_path = batch_dir / "dictionary.dlm"
    rc = main(["match", "--dict", str(dict_path),
               "--recovered", str(dict_path), "--tolerance", "0.05"])
    assert rc == 0
    partial = tmp_path / "partial.dlm"
    dlmio.write_matrix(partial, A[:, :10])
    out = tmp_path / "match.json"
    rc = main(["match", "--dict", str(dict_path), "--recovered", str(partial),
               "--pass-coverage", "1.0", "--out", str(out)])
    assert rc == 1
    payload = json.loads(out.read_text())
    assert payload["coverage"] == pytest.approx(10 / 24)


def test_report_requires_an_input(tmp_path):
    assert main(["report"]) == 1


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        main([])
