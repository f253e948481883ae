import hashlib
import json
import subprocess
import sys
from pathlib import Path

from drsgt.cli import main

FAST_CFG = """
n_agents = 4
m_per_agent = 200
n = 8
r = 3
eigengap = 0.8
topology = ring
t = 1
algorithm = drsgt
alpha = 1.0
beta = 0.1
schedule = polynomial:1
max_iters = 40
seed = 0
output = run.csv
"""


def write_cfg(tmp_path, text=FAST_CFG, name="run.cfg") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def test_run_success(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code = main(["run", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "wrote 41 rows" in out
    assert (tmp_path / "run.csv").exists()


def test_run_override_echoed_in_manifest(tmp_path):
    cfg = write_cfg(tmp_path)
    code = main(["run", str(cfg), "--out", str(tmp_path),
                 "--beta=0.05", "--schedule=constant:2"])
    assert code == 0
    manifest = tmp_path / "run.manifest.jsonl"
    record = json.loads(manifest.read_text())
    assert record["config"]["beta"] == 0.05
    assert record["config"]["schedule"] == "constant:2"


def test_run_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    code = main(["run", str(missing)])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_run_bad_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    code = main(["run", str(cfg), "--out", str(tmp_path), "--beta=minus"])
    assert code == 2
    assert "beta" in capsys.readouterr().err


def test_run_target_eps_reports_complexity(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FAST_CFG.replace("max_iters = 40", "max_iters = 2000"))
    code = main(["run", str(cfg), "--out", str(tmp_path),
                 "--target-eps", "1e-8", "--oracle=exact"])
    assert code == 0
    out = capsys.readouterr().out
    assert "target grad_norm^2 <= 1e-08 reached" in out


def test_validate_graph_ring_warns(capsys):
    code = main(["validate-graph", "ring", "4", "--t", "1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "sigma2=0.333333333333" in out
    assert "t_min=2" in out
    assert "below the theoretical bound" in out


def test_validate_graph_complete_ok(capsys):
    code = main(["validate-graph", "complete", "4", "--t", "1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "t_min=1" in out and "ok" in out


def test_validate_graph_disconnected_exit2(tmp_path, capsys):
    edges = tmp_path / "edges.txt"
    edges.write_text("0 1\n2 3\n")
    code = main(["validate-graph", "explicit", str(edges)])
    assert code == 2
    assert "disconnected" in capsys.readouterr().err


def test_replicate_figure_unknown_lists_ids(tmp_path, capsys):
    code = main(["replicate-figure", "fig9", "--out", str(tmp_path)])
    assert code == 2
    assert "fig1, fig2, fig5" in capsys.readouterr().err


def test_replicate_figure_fig5_small(tmp_path, capsys):
    code = main(["replicate-figure", "fig5", "--out", str(tmp_path),
                 "--max_iters=10", "--m_per_agent=150"])
    assert code == 0
    manifest = tmp_path / "fig5" / "fig5.jsonl"
    records = [json.loads(line) for line in manifest.read_text().splitlines()]
    assert len(records) == 3
    assert all(r["status"] == "ok" for r in records)
    out = capsys.readouterr().out
    assert "constant_1: ok" in out


def test_sweep_cli(tmp_path, capsys):
    cfg = write_cfg(tmp_path, FAST_CFG.replace("max_iters = 40", "max_iters = 10"))
    code = main(["sweep", str(cfg), "--axis", "seed", "--values", "1,2",
                 "--out", str(tmp_path)])
    assert code == 0
    assert "2/2 runs ok" in capsys.readouterr().out


def test_inspect_instance_from_cache(tmp_path, capsys):
    from drsgt import generate_pca_instance, save_instance

    prob = generate_pca_instance(4, 120, 8, 3, 0.8, seed=0)
    cache = tmp_path / "inst.bin"
    save_instance(prob, cache)
    code = main(["inspect-instance", str(cache), "--sigma-draws", "50"])
    assert code == 0
    out = capsys.readouterr().out
    assert "agents=4 n=8 r=3" in out
    assert "f_star=" in out and "sigma_hat=" in out


def test_seed_determines_digest_across_processes(tmp_path):
    cfg = write_cfg(tmp_path, FAST_CFG.replace("max_iters = 40", "max_iters = 60"))
    digests = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        out.mkdir()
        proc = subprocess.run(
            [sys.executable, "-m", "drsgt.cli", "run", str(cfg), "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        digests.append(hashlib.sha256((out / "run.csv").read_bytes()).hexdigest())
    assert digests[0] == digests[1]
