import csv
import json
import math
import os
import numpy as np
import pytest
from udakit.algorithms import DANNConfig, DSANConfig, SourceOnlyConfig
from udakit.bench import BenchConfig, DomainSpec, ModelConfig, ReportRow, ReportTable, SeedResult, TaskResult, TaskSpec, dump_embeddings, emit_report, evaluate, evaluate_metrics, parse_report_csv, run_gradsuite, run_matrix, run_task
from udakit.bench.cli import main
from udakit.bench.report import format_delta, format_percent, markdown_lines
from udakit.bench.runner import build_tasks
from udakit.data import Dataset, ShiftSpec, make_domain, make_shift_pair
from udakit.errors import ConfigError, ContractError, ParseError
from udakit.models import LayerSpec, init_bundle, load_checkpoint
from udakit.ndgraph import Tensor


TINY_MODEL = ModelConfig(ef_hidden = (8, 4), d_hidden = (4,))
TINY = TaskSpec(seeds = (0, 1), epochs = 2, iterations_per_epoch = 5, batch_B = 4, model = TINY_MODEL)


@pytest.fixture(scope = "module")
def pair():
    return make_shift_pair(ShiftSpec(n_per_domain = 50, rotation_deg = 20.0, seed = 1))


def names_of(n):
    return ["d%d" % (i,) for i in range(n)]


def result(algorithm, task, bests, failed = ()):
    seeds = [SeedResult(i, [0.5, b], failed = i in failed) for i, b in enumerate(bests)]
    return TaskResult(task, algorithm, [0.5, float(np.mean(bests))], seeds)


def test_delta_formatting():
    assert format_delta(0.021) == "+2.1"
    assert format_delta(-0.034) == "-3.4"
    assert format_delta(0.0004) == "0.0"
    assert format_delta(-0.0004) == "0.0"
    assert format_delta(float("nan")) == ""
    assert format_percent(0.85) == "85.0"
    assert format_percent(None) == ""


def test_table_from_results_has_deltas_against_source_only():
    table = ReportTable.from_results([
        result("SourceOnly", "a→b", [0.8, 0.9]),
        result("DANN", "a→b", [0.9, 0.95]),
        result("DANN", "b→a", [0.7, 0.6], failed = (1,)),
    ])
    assert table.seeds == (0, 1)
    row = table.row("DANN", "a→b")
    assert row.mean == pytest.approx(0.925)
    assert abs(row.delta - (row.mean - table.row("SourceOnly", "a→b").mean)) <= 1e-12
    partial = table.row("DANN", "b→a")
    assert partial.per_seed == (0.7, None) and partial.mean == pytest.approx(0.7)
    assert math.isnan(partial.delta)
    with pytest.raises(KeyError):
        table.row("BNM", "a→b")


def test_markdown_cell_shows_difference():
    table = ReportTable((ReportRow("DANN", "a→b", 0.85, 0.021, (0.85,)),), (0,))
    lines = markdown_lines(table)
    assert lines[0] == "| algorithm | task | mean (delta) | seed 0 |"
    assert lines[2] == "| DANN | a→b | 85.0 (+2.1) | 85.0 |"


def test_empty_table_writes_only_a_header(tmp_path):
    path = str(tmp_path / "empty.csv")
    emit_report(ReportTable((), (3, 4)), path)
    with open(path, encoding = "utf-8") as f:
        assert f.read() == "algorithm,task,mean,delta,seed_3,seed_4\n"
    assert parse_report_csv(path) == ReportTable((), (3, 4))


def test_report_csv_round_trip(tmp_path):
    table = ReportTable.from_results([
        result("SourceOnly", "a→b", [0.81234, 0.9]),
        result("DSAN", "a→b", [0.9, 0.80001]),
        result("SourceOnly", "b→a", [0.5, 0.25], failed = (0, 1)),
        result("DSAN", "b→a", [0.66666, 0.33333]),
    ])
    path = str(tmp_path / "report.csv")
    emit_report(table, path, "csv")
    assert parse_report_csv(path) == table.rounded()
    emit_report(table, str(tmp_path / "report.md"), "markdown")
    with pytest.raises(ConfigError):
        emit_report(table, path, "html")


def test_parse_report_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n", encoding = "utf-8")
    with pytest.raises(ParseError):
        parse_report_csv(str(path))
    path.write_text("algorithm,task,mean,delta\nDAN,a→b,abc,0.0\n", encoding = "utf-8")
    with pytest.raises(ParseError):
        parse_report_csv(str(path))


@pytest.mark.parametrize("n, count", [(2, 2), (3, 6), (4, 12)])
def test_matrix_covers_ordered_pairs(n, count):
    tasks = build_tasks(names_of(n), [SourceOnlyConfig()], TINY)
    assert len(tasks) == count
    assert len({(t.source, t.target) for t in tasks}) == count
    assert all(t.source != t.target for t in tasks)


def test_matrix_always_includes_source_only():
    tasks = build_tasks(names_of(2), [DANNConfig()], TINY)
    assert [t.algorithm.method for t in tasks] == ["SourceOnly", "SourceOnly", "DANN", "DANN"]


def test_matrix_rejects_duplicates_and_single_domains():
    with pytest.raises(ConfigError):
        build_tasks(["a", "b", "a"], [SourceOnlyConfig()], TINY)
    with pytest.raises(ConfigError):
        build_tasks(["a"], [SourceOnlyConfig()], TINY)


def test_evaluate_with_hard_wired_classifier(pair):
    _, target = pair
    m = init_bundle(LayerSpec((2, 4)), LayerSpec((4, 2)), LayerSpec((4, 1)), seed = 0)
    params = dict(m.params)
    params["h.0.weight"] = Tensor(np.zeros((4, 2)))
    params["h.0.bias"] = Tensor([[0.0, 1.0]])
    m.params = params
    assert evaluate(m, target) == pytest.approx(np.mean(target.labels == 1))
    flipped = Dataset(target.features, 1 - target.labels, "flipped", 2)
    assert evaluate(m, target) + evaluate(m, flipped) == pytest.approx(1.0)
    metrics = evaluate_metrics(m, target)
    assert set(metrics) == {"accuracy", "precision", "recall", "f1"}
    with pytest.raises(ContractError):
        evaluate(m, target.without_labels())


def test_untrained_model_is_near_chance():
    rng = np.random.default_rng(3)
    labels = np.repeat([0, 1], 5000)
    d = Dataset(rng.normal(size = (10000, 2)), rng.permutation(labels), "chance", 2)
    ef, h, dd = TINY_MODEL.layer_specs(2, 2)
    for seed in range(3):
        assert 0.45 <= evaluate(init_bundle(ef, h, dd, seed = seed), d) <= 0.55


def test_run_task_is_deterministic(pair):
    source, target = pair
    t = TINY.for_pair("source", "target", DANNConfig())
    a = run_task(t, source, target)
    b = run_task(t, source, target)
    assert a == b
    assert len(a.curve) == 3 and len(a.per_seed) == 2
    assert not a.failed and a.best >= a.curve[0]


def test_run_task_with_zero_epochs_only_evaluates(pair):
    source, target = pair
    t = TaskSpec(source = "source", target = "target", seeds = (4,), epochs = 0, model = TINY_MODEL)
    r = run_task(t, source, target)
    assert len(r.curve) == 1 and r.best == r.final == r.per_seed[0].curve[0]


def test_run_task_rejects_mismatched_domains(pair):
    source, _ = pair
    wide = Dataset(np.zeros((5, 3)), [0, 1, 0, 1, 0], "wide", 2)
    with pytest.raises(ConfigError):
        run_task(TINY.for_pair("source", "wide", SourceOnlyConfig()), source, wide)


def test_run_task_writes_logs_and_checkpoints(tmp_path, pair):
    source, target = pair
    t = TINY.for_pair("source", "target", DANNConfig())
    r = run_task(t, source, target, out_dir = str(tmp_path), save_checkpoints = True, embeddings = True)
    for seed in (0, 1):
        with open(tmp_path / ("runlog_DANN_source_to_target_%d.csv" % (seed,)), encoding = "utf-8") as f:
            assert len(f.read().splitlines()) == 1 + 2 * 5
    ckpt = load_checkpoint(str(tmp_path / "checkpoint_DANN_source_to_target_0.npz"))
    assert ckpt.step == 10 and ckpt.epoch == 1
    assert os.path.exists(tmp_path / "embeddings_DANN_source_to_target.csv")
    assert r.per_seed[0].metrics["accuracy"] == r.per_seed[0].final


def test_run_matrix_is_independent_of_worker_count(pair):
    source, target = pair
    domains = {"source": source, "target": target}
    base = TaskSpec(seeds = (0,), epochs = 1, iterations_per_epoch = 3, batch_B = 4, model = TINY_MODEL)
    one, results = run_matrix(domains, [DANNConfig()], base, workers = 1)
    two, _ = run_matrix(domains, [DANNConfig()], base, workers = 2)
    assert one == two and len(one) == 4 and len(results) == 4


def identity_bundle():
    m = init_bundle(LayerSpec((2, 2)), LayerSpec((2, 2)), LayerSpec((2, 1)), seed = 0)
    params = dict(m.params)
    params["ef.0.weight"] = Tensor(np.eye(2))
    params["ef.0.bias"] = Tensor(np.zeros((1, 2)))
    m.params = params
    return m


def test_embeddings_rows_and_separation(tmp_path):
    spec = ShiftSpec(base = "gaussian_blobs", n_per_domain = 40, seed = 2)
    source = make_domain(spec, "left")
    target = make_domain(ShiftSpec(base = "gaussian_blobs", n_per_domain = 30, seed = 2, translation = (20.0, 0.0)), "right")
    path = str(tmp_path / "emb.csv")
    proj = dump_embeddings(identity_bundle(), source, target, path, plot_path = str(tmp_path / "emb.png"))
    with open(path, encoding = "utf-8", newline = "") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["domain_tag", "true_label", "pc1", "pc2"]
    assert len(rows) == 1 + 70
    assert rows[1][0] == "left" and rows[-1][0] == "right"
    ps, pt = proj[:40], proj[40:]
    between = np.linalg.norm(ps.mean(axis = 0) - pt.mean(axis = 0))
    within = max(np.linalg.norm(ps - ps.mean(axis = 0), axis = 1).max(), np.linalg.norm(pt - pt.mean(axis = 0), axis = 1).max())
    assert between > within
    again = str(tmp_path / "emb2.csv")
    dump_embeddings(identity_bundle(), source, target, again)
    with open(path, encoding = "utf-8") as f, open(again, encoding = "utf-8") as g:
        assert f.read() == g.read()


def write_json(path, obj):
    path.write_text(json.dumps(obj), encoding = "utf-8")
    return str(path)


def test_bench_config_defaults_and_paths(tmp_path):
    path = write_json(tmp_path / "cfg.json", {
        "domains": [{"name": "a", "shift": {"rotation_deg": 10}}, {"name": "b", "path": "b.csv"}],
        "shift_defaults": {"n_per_domain": 30, "seed": 4},
        "algorithms": ["DANN"],
    })
    cfg = BenchConfig.load(path)
    a, b = cfg.domains
    assert a.kind == "synthetic" and a.shift == ShiftSpec(n_per_domain = 30, seed = 4, rotation_deg = 10.0)
    assert b.kind == "csv" and b.path == os.path.join(str(tmp_path), "b.csv")
    assert cfg.template.epochs == 30 and cfg.template.iterations_per_epoch == 200 and cfg.template.batch_B == 16
    assert cfg.workers == 1 and cfg.template.optimizer is None
    resolved = cfg.to_dict()
    assert resolved["resolved_optimizers"]["DANN"]["weight_decay"] == 1e-3


def test_bench_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        BenchConfig.from_dict({"domains": [], "learning_rate": 1.0})
    with pytest.raises(ConfigError):
        BenchConfig.from_dict({"algorithms": ["DANN"]})
    with pytest.raises(ConfigError):
        DomainSpec.from_dict({"name": "a", "kind": "parquet"})
    with pytest.raises(ConfigError):
        TaskSpec(source = "a", target = "a")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding = "utf-8")
    with pytest.raises(ConfigError):
        BenchConfig.load(str(bad))


def test_model_config_layer_specs():
    ef, h, d = ModelConfig().layer_specs(5, 3)
    assert ef.widths == (5, 64, 32) and h.widths == (32, 3) and d.widths == (32, 16, 1)


def test_cli_gen_writes_a_pair(tmp_path):
    spec = write_json(tmp_path / "shift.json", {"n_per_domain": 25, "rotation_deg": 35, "seed": 3})
    assert main(["gen", "--spec", spec, "--out", str(tmp_path / "pair.csv")]) == 0
    for part in ("source", "target"):
        with open(tmp_path / ("pair_%s.csv" % (part,)), encoding = "utf-8") as f:
            assert len(f.read().splitlines()) == 26


def test_cli_run_and_embed(tmp_path):
    config = write_json(tmp_path / "run.json", {
        "domains": [{"name": "r0"}, {"name": "r35", "shift": {"rotation_deg": 35}}],
        "shift_defaults": {"n_per_domain": 40, "seed": 7},
        "algorithms": ["SourceOnly", "DANN"],
        "seeds": [0],
        "epochs": 1,
        "iterations_per_epoch": 3,
        "batch_B": 4,
        "model": {"ef_hidden": [8, 4], "d_hidden": [4]},
        "save_checkpoints": True,
    })
    out = tmp_path / "out"
    assert main(["run", config, "--out", str(out)]) == 0
    table = parse_report_csv(str(out / "report.csv"))
    assert len(table) == 4 and table.seeds == (0,)
    assert (out / "report.md").exists() and (out / "resolved_config.json").exists()
    assert (out / "runlog_DANN_r0_to_r35_0.csv").exists()
    first = (out / "report.csv").read_bytes()
    assert main(["run", config, "--out", str(out)]) == 0
    assert (out / "report.csv").read_bytes() == first

    spec = write_json(tmp_path / "shift.json", {"n_per_domain": 20})
    assert main(["gen", "--spec", spec, "--out", str(tmp_path / "pair.csv")]) == 0
    emb = tmp_path / "emb.csv"
    code = main(["embed", str(out / "checkpoint_DANN_r0_to_r35_0.npz"), str(tmp_path / "pair_source.csv"), str(tmp_path / "pair_target.csv"), "--out", str(emb)])
    assert code == 0
    with open(emb, encoding = "utf-8") as f:
        assert len(f.read().splitlines()) == 41


def test_cli_reports_bad_input(tmp_path):
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    bad = write_json(tmp_path / "bad.json", {"domains": [{"name": "a"}], "epochs": 0})
    assert main(["run", bad, "--out", str(tmp_path / "o")]) == 2
    assert main(["run", bad, "--out", str(tmp_path / "o"), "--workers", "0"]) == 2


def test_cli_gradcheck_subset():
    assert main(["gradcheck", "--instances", "3", "--case", "matmul", "--case", "lmmd2"]) == 0
    with pytest.raises(ConfigError):
        run_gradsuite(1, 0, ["softplus"])


def test_gradsuite_primitives_and_losses():
    results = run_gradsuite(instances = 3, seed = 1, names = ["relu", "softmax_rows", "grl", "cross_entropy", "domain_adv_loss", "mk_mmd2", "nuclear_norm", "sr_loss", "coral_loss"])
    for case in results:
        assert case.passed, str(case.worst)
        assert len(case.reports) == 3


@pytest.mark.slow
def test_full_gradsuite():
    results = run_gradsuite()
    assert all(r.passed for r in results), [str(r.worst) for r in results if not r.passed]


@pytest.mark.slow
def test_source_only_learns_an_unshifted_domain():
    spec = ShiftSpec(n_per_domain = 500, seed = 11)
    source, target = make_domain(spec, "a"), make_domain(spec, "b")
    t = TaskSpec(source = "a", target = "b", seeds = (0,), epochs = 10, iterations_per_epoch = 100, batch_B = 32)
    assert run_task(t, source, target).best >= 0.95


CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def best_per_seed(result):
    return np.array([s.best for s in result.per_seed])


@pytest.mark.slow
def test_adaptation_beats_source_only_on_rotated_moons():
    cfg = BenchConfig.load(os.path.join(CONFIGS, "rotation35.json"))
    domains = {d.name: d.build() for d in cfg.domains}
    results = {a.method: run_task(cfg.template.for_pair("r0", "r35", a), domains["r0"], domains["r35"]) for a in cfg.algorithms}
    base = best_per_seed(results["SourceOnly"])
    for method in ("Coral", "DAN", "DANN", "DSAN", "BNM"):
        best = best_per_seed(results[method])
        assert np.sum(best > base) >= 4, (method, best.tolist(), base.tolist())
        assert np.mean(best) - np.mean(base) >= 0.03, (method, best.tolist(), base.tolist())


@pytest.mark.slow
def test_dsan_degrades_less_than_source_only_under_target_noise():
    with open(os.path.join(CONFIGS, "noise_ladder.json"), encoding = "utf-8") as f:
        raw = json.load(f)
    template = BenchConfig.from_dict(raw).template
    shift_defaults = raw["shift_defaults"]
    source = DomainSpec.from_dict({"name": "clean"}, shift_defaults).build()
    targets = {sigma: DomainSpec.from_dict({"name": "target", "noise_sigma": sigma}, shift_defaults).build() for sigma in (0.0, 0.5, 1.0)}
    degradation = {}
    for algorithm in (SourceOnlyConfig(), DSANConfig()):
        best = {sigma: run_task(template.for_pair("clean", "target", algorithm), source, d).best for sigma, d in targets.items()}
        assert best[0.0] > best[1.0]
        degradation[algorithm.method] = best[0.0] - best[1.0]
    assert degradation["DSAN"] < degradation["SourceOnly"], degradation
